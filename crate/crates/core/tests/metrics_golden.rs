mod common;

use common::*;
use num_complex::Complex;
use proptest::prelude::*;
use scanmask::metrics::{hfen, log_kernel, nmse, ssim, LossKind, MetricReport, MetricRow, LOG_SIGMA, LOG_SIZE};
use scanmask::Image;
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    height: usize,
    width: usize,
    gt: Vec<[f64; 2]>,
    rec: Vec<[f64; 2]>,
    nmse: f64,
    ssim: f64,
    hfen: f64,
}

fn image(h: usize, w: usize, v: &[[f64; 2]]) -> Image<f64> {
    Image::new(h, w, v.iter().map(|p| Complex::new(p[0], p[1])).collect()).unwrap()
}

#[test]
fn golden_pair_values() {
    let g: Golden = serde_json::from_str(include_str!("data/metrics_golden.json")).unwrap();
    let gt = image(g.height, g.width, &g.gt);
    let rec = image(g.height, g.width, &g.rec);
    assert!((nmse(&gt, &rec).unwrap() - g.nmse).abs() <= 1e-9);
    assert!((ssim(&gt, &rec).unwrap() - g.ssim).abs() <= 1e-9);
    assert!((hfen(&gt, &rec).unwrap() - g.hfen).abs() <= 1e-9);
    let report = MetricReport::compute(&gt, &rec, None).unwrap();
    assert!((report.ssim - g.ssim).abs() <= 1e-9);
}

#[test]
fn identities() {
    let x = random_image(24, 24, 3);
    assert_eq!(nmse(&x, &x).unwrap(), 0.0);
    assert!((nmse(&x, &Image::zeros(24, 24)).unwrap() - 1.0).abs() < 1e-15);
    assert!((nmse(&x, &x.scale(Complex::new(2.0, 0.0))).unwrap() - 1.0).abs() < 1e-15);
    assert!((ssim(&x, &x).unwrap() - 1.0).abs() <= 1e-12);
    assert_eq!(hfen(&x, &x).unwrap(), 0.0);
    assert!(nmse(&Image::zeros(4, 4), &x.crop_center(4, 4).unwrap()).is_err());
    assert!(ssim(&random_image(10, 24, 1), &random_image(10, 24, 2)).is_err());
}

#[test]
fn luminance_shift_lowers_ssim() {
    let x = random_image(16, 16, 4);
    let shifted = Image::from_fn(16, 16, |r, c| Complex::new(x.get(r, c).norm() + 5.0, 0.0));
    assert!(ssim(&x, &shifted).unwrap() < 1.0);
}

#[test]
fn log_kernel_annihilates_constants_in_the_interior() {
    let k = log_kernel(LOG_SIZE, LOG_SIGMA);
    assert!(k.iter().sum::<f64>().abs() < 1e-15);
    let (h, w) = (40, 40);
    let x = Image::from_fn(h, w, |r, c| Complex::new(((r * 7 + c * 3) % 11) as f64 / 11.0, 0.0));
    let y = Image::from_fn(h, w, |r, c| x.get(r, c) + 0.75);
    let lx = scanmask::metrics::log_filter(&x.magnitude(), h, w);
    let ly = scanmask::metrics::log_filter(&y.magnitude(), h, w);
    let half = LOG_SIZE / 2;
    for r in half..h - half {
        for c in half..w - half {
            assert!((lx[r * w + c] - ly[r * w + c]).abs() < 1e-10);
        }
    }
}

#[test]
fn csv_rows_round_trip() {
    let row = MetricRow { scan_id: "s7".into(), mask_kind: "nn".into(), recon_kind: "zero-filled".into(), nmse: 0.1 + 0.2, ssim: 0.9, hfen: 1e-17 };
    assert_eq!(MetricRow::parse_csv_line(&row.to_csv_line()).unwrap(), row);
    assert_eq!(scanmask::metrics::METRIC_CSV_HEADER, "scan_id,mask_kind,recon_kind,nmse,ssim,hfen");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nmse_ignores_a_common_phase(seed in any::<u64>(), theta in -3.2f64..3.2) {
        let x = random_image(12, 12, seed);
        let y = random_image(12, 12, seed ^ 9);
        let p = Complex::from_polar(1.0, theta);
        let a = nmse(&x, &y).unwrap();
        let b = nmse(&x.scale(p), &y.scale(p)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn ssim_and_hfen_see_only_magnitudes(seed in any::<u64>()) {
        let x = random_image(16, 16, seed);
        let y = random_image(16, 16, seed ^ 5);
        let mut r = rng(seed ^ 7);
        let yp = Image::from_fn(16, 16, |i, j| y.get(i, j) * Complex::from_polar(1.0, rand::Rng::random::<f64>(&mut r) * 6.0));
        prop_assert!((ssim(&x, &y).unwrap() - ssim(&x, &yp).unwrap()).abs() <= 1e-12);
        prop_assert!((hfen(&x, &y).unwrap() - hfen(&x, &yp).unwrap()).abs() <= 1e-12);
        let s = ssim(&x, &y).unwrap();
        prop_assert!(s <= 1.0 + 1e-9 && s >= -1.0);
    }

    #[test]
    fn nmse_loss_orders_like_squared_error(seed in any::<u64>()) {
        let x = random_image(12, 12, seed);
        let a = random_image(12, 12, seed ^ 1);
        let b = random_image(12, 12, seed ^ 2);
        let sq = |r: &Image<f64>| x.data().iter().zip(r.data()).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>();
        let la = LossKind::Nmse.evaluate(&x, &a, None).unwrap();
        let lb = LossKind::Nmse.evaluate(&x, &b, None).unwrap();
        prop_assert_eq!(la < lb, sq(&a) < sq(&b));
    }
}

#[test]
fn magnitude_loss_ignores_phase() {
    let x = random_image(16, 16, 21);
    let rotated = Image::from_fn(16, 16, |r, c| x.get(r, c) * Complex::from_polar(1.0, (r * 16 + c) as f64));
    assert!(LossKind::Nmse.evaluate(&x, &rotated, None).unwrap() > 0.1);
    assert!(LossKind::NmseMagnitude.evaluate(&x, &rotated, None).unwrap() < 1e-24);
    let mag: f64 = x.data().iter().map(|z| z.norm_sqr()).sum();
    let half = x.scale(Complex::new(0.5, 0.0));
    let want = x.data().iter().map(|z| 0.25 * z.norm_sqr()).sum::<f64>() / mag;
    assert!((LossKind::NmseMagnitude.evaluate(&x, &half, None).unwrap() - want).abs() < 1e-12);
}
