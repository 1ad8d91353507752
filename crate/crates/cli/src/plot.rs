//! Minimal static SVG charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Value range padded so zero is visible and the data is not flush with
/// the frame.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0f64, f64::MIN);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    (lo, hi + 0.05 * (hi - lo))
}

fn axis(s: &mut String, lo: f64, hi: f64, y_label: &str) {
    let y = |v: f64| TOP + (H - TOP - BOTTOM) * (1.0 - (v - lo) / (hi - lo));
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#, H - BOTTOM);
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, y(lo.max(0.0).min(hi)), W - RIGHT);
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(s, r#"<line x1="{}" y1="{1}" x2="{LEFT}" y2="{1}" stroke="black"/>"#, LEFT - 4.0, y(v));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, LEFT - 6.0, y(v) + 4.0, format_tick(v));
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(y_label)
    );
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 1000.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.1e}")
    }
}

/// One group of bars per entry of `groups`; `series[j].values[i]` is the
/// bar of series `j` in group `i`.
pub fn grouped_bars(title: &str, y_label: &str, groups: &[String], series: &[Series]) -> String {
    let mut s = header(title);
    let (lo, hi) = range(series.iter().flat_map(|x| x.values.iter().copied()));
    axis(&mut s, lo, hi, y_label);
    let y = |v: f64| TOP + (H - TOP - BOTTOM) * (1.0 - (v - lo) / (hi - lo));
    let plot_w = W - LEFT - RIGHT;
    let gw = plot_w / groups.len().max(1) as f64;
    let bw = 0.8 * gw / series.len().max(1) as f64;
    for (i, g) in groups.iter().enumerate() {
        let x0 = LEFT + gw * i as f64 + 0.1 * gw;
        for (j, ser) in series.iter().enumerate() {
            let v = ser.values.get(i).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let (ya, yb) = (y(v.max(0.0)), y(v.min(0.0)));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{} {}: {}</title></rect>"#,
                x0 + bw * j as f64,
                ya,
                bw * 0.95,
                (yb - ya).max(0.5),
                PALETTE[j % PALETTE.len()],
                escape(g),
                escape(&ser.label),
                v
            );
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, x0 + 0.4 * gw, H - BOTTOM + 18.0, escape(g));
    }
    legend(&mut s, series.iter().map(|x| x.label.as_str()));
    s.push_str("</svg>\n");
    s
}

fn legend<'a>(s: &mut String, labels: impl Iterator<Item = &'a str>) {
    for (j, label) in labels.enumerate() {
        let x = LEFT + 110.0 * j as f64;
        let y = H - 22.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{}"/>"#, y - 10.0, PALETTE[j % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 16.0, escape(label));
    }
}

/// Quartiles by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Box-and-whisker plot (min, quartiles, max) per series.
pub fn box_plot(title: &str, y_label: &str, series: &[Series]) -> String {
    let mut s = header(title);
    let (lo, hi) = range(series.iter().flat_map(|x| x.values.iter().copied()));
    axis(&mut s, lo, hi, y_label);
    let y = |v: f64| TOP + (H - TOP - BOTTOM) * (1.0 - (v - lo) / (hi - lo));
    let slot = (W - LEFT - RIGHT) / series.len().max(1) as f64;
    for (j, ser) in series.iter().enumerate() {
        let mut v: Vec<f64> = ser.values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        let (q0, q1, q2, q3, q4) = (v[0], quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75), v[v.len() - 1]);
        let cx = LEFT + slot * (j as f64 + 0.5);
        let half = 0.3 * slot;
        let color = PALETTE[j % PALETTE.len()];
        let _ = writeln!(s, r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#, y(q4), y(q0));
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.6" stroke="black"/>"#,
            cx - half,
            y(q3),
            2.0 * half,
            (y(q1) - y(q3)).max(0.5)
        );
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{2:.2}" x2="{:.2}" y2="{2:.2}" stroke="black" stroke-width="2"/>"#, cx - half, cx + half, y(q2));
        for q in [q0, q4] {
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{2:.2}" x2="{:.2}" y2="{2:.2}" stroke="black"/>"#, cx - half / 2.0, cx + half / 2.0, y(q));
        }
        let _ = writeln!(s, r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#, H - BOTTOM + 18.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}
