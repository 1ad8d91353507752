use std::fmt::Write as _;
use std::fs;

use anyhow::{Context, Result};
use scanmask::metrics::{MetricRow, METRIC_CSV_HEADER};

use crate::io::write_text;
use crate::plot::{box_plot, grouped_bars, quantile, Series};
use crate::{failure, ReportArgs};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_MD: &str = "summary.md";

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub recon_kind: String,
    pub mask_kind: String,
    pub n: usize,
    /// Mean and median of nmse, ssim, hfen.
    pub mean: [f64; 3],
    pub median: [f64; 3],
}

pub fn read_rows(text: &str) -> Result<Vec<MetricRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == METRIC_CSV_HEADER => {}
        _ => return Err(failure::data(format!("metrics CSV must start with `{METRIC_CSV_HEADER}`"))),
    }
    lines.filter(|l| !l.trim().is_empty()).map(|l| MetricRow::parse_csv_line(l).map_err(|e| failure::data(e.to_string()))).collect()
}

/// Groups by (recon_kind, mask_kind) in order of first appearance.
pub fn summarize(rows: &[MetricRow]) -> Vec<Summary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in rows {
        let k = (r.recon_kind.clone(), r.mask_kind.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(recon_kind, mask_kind)| {
            let group: Vec<&MetricRow> = rows.iter().filter(|r| r.recon_kind == recon_kind && r.mask_kind == mask_kind).collect();
            let cols = [
                group.iter().map(|r| r.nmse).collect::<Vec<_>>(),
                group.iter().map(|r| r.ssim).collect::<Vec<_>>(),
                group.iter().map(|r| r.hfen).collect::<Vec<_>>(),
            ];
            let mut mean = [0.0; 3];
            let mut median = [0.0; 3];
            for (i, c) in cols.iter().enumerate() {
                mean[i] = c.iter().sum::<f64>() / c.len() as f64;
                let mut s = c.clone();
                s.sort_by(f64::total_cmp);
                median[i] = quantile(&s, 0.5);
            }
            Summary { recon_kind, mask_kind, n: group.len(), mean, median }
        })
        .collect()
}

pub fn run(args: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &args.runs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        rows.extend(read_rows(&text).with_context(|| format!("in {}", path.display()))?);
    }
    if rows.is_empty() {
        return Err(failure::data("no metric rows to report"));
    }
    let summary = summarize(&rows);
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut csv = String::from("recon_kind,mask_kind,n,mean_nmse,median_nmse,mean_ssim,median_ssim,mean_hfen,median_hfen\n");
    let mut md = String::from("| reconstructor | mask | n | NMSE mean | NMSE median | SSIM mean | SSIM median | HFEN mean | HFEN median |\n");
    md.push_str("|---|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for s in &summary {
        writeln!(
            csv,
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
            s.recon_kind, s.mask_kind, s.n, s.mean[0], s.median[0], s.mean[1], s.median[1], s.mean[2], s.median[2]
        )?;
        writeln!(
            md,
            "| {} | {} | {} | {:.5} | {:.5} | {:.4} | {:.4} | {:.4} | {:.4} |",
            s.recon_kind, s.mask_kind, s.n, s.mean[0], s.median[0], s.mean[1], s.median[1], s.mean[2], s.median[2]
        )?;
    }
    write_text(&args.out.join(SUMMARY_CSV), &csv)?;
    write_text(&args.out.join(SUMMARY_MD), &md)?;

    let mut recons: Vec<String> = Vec::new();
    let mut masks: Vec<String> = Vec::new();
    for s in &summary {
        if !recons.contains(&s.recon_kind) {
            recons.push(s.recon_kind.clone());
        }
        if !masks.contains(&s.mask_kind) {
            masks.push(s.mask_kind.clone());
        }
    }
    for (i, metric) in ["nmse", "ssim", "hfen"].iter().enumerate() {
        let series: Vec<Series> = masks
            .iter()
            .map(|m| Series {
                label: m.clone(),
                values: recons
                    .iter()
                    .map(|r| summary.iter().find(|s| &s.recon_kind == r && &s.mask_kind == m).map_or(f64::NAN, |s| s.mean[i]))
                    .collect(),
            })
            .collect();
        let svg = grouped_bars(&format!("mean {}", metric.to_uppercase()), metric, &recons, &series);
        write_text(&args.out.join(format!("mean_{metric}.svg")), &svg)?;

        let boxes: Vec<Series> = summary
            .iter()
            .map(|s| Series {
                label: format!("{}/{}", s.mask_kind, s.recon_kind),
                values: rows
                    .iter()
                    .filter(|r| r.recon_kind == s.recon_kind && r.mask_kind == s.mask_kind)
                    .map(|r| [r.nmse, r.ssim, r.hfen][i])
                    .collect(),
            })
            .collect();
        let svg = box_plot(&format!("{} per scan", metric.to_uppercase()), metric, &boxes);
        write_text(&args.out.join(format!("box_{metric}.svg")), &svg)?;
    }
    print!("{md}");
    Ok(())
}
