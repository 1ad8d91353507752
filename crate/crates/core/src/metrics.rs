//! Image-quality metrics: NMSE on complex values, SSIM and HFEN on
//! magnitudes.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::image::Image;
use crate::Scalar;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const LOG_SIZE: usize = 15;
pub const LOG_SIGMA: f64 = 1.5;

fn same_shape<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<()> {
    ensure!(a.shape() == b.shape(), Dimension, "metric inputs {:?} vs {:?}", a.shape(), b.shape());
    Ok(())
}

/// `‖x_gt − x_rec‖² / ‖x_gt‖²`
pub fn nmse<T: Scalar>(gt: &Image<T>, rec: &Image<T>) -> Result<T> {
    same_shape(gt, rec)?;
    let denom = gt.norm_sqr();
    if denom == T::zero() {
        return Err(Error::UndefinedMetric("nmse of an all-zero reference".into()));
    }
    let num = gt.data().iter().zip(rec.data()).fold(T::zero(), |acc, (a, b)| acc + (a - b).norm_sqr());
    Ok(num / denom)
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Weighted local means over every fully contained window; the 2-D window
/// is the outer product of `g` with itself.
fn valid_filter(src: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..k).map(|j| g[j] * src[r * w + c + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..k).map(|i| g[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean SSIM over all valid 11×11 Gaussian windows of the magnitude
/// images, with dynamic range `max |x_gt|`.
pub fn ssim<T: Scalar>(gt: &Image<T>, rec: &Image<T>) -> Result<f64> {
    same_shape(gt, rec)?;
    let (h, w) = gt.shape();
    ensure!(
        h >= SSIM_WINDOW && w >= SSIM_WINDOW,
        InvalidInput,
        "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
    );
    let x: Vec<f64> = gt.data().iter().map(|z| z.norm().to_f64_lossy()).collect();
    let y: Vec<f64> = rec.data().iter().map(|z| z.norm().to_f64_lossy()).collect();
    let range = x.iter().copied().fold(0.0, f64::max);
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let g = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);

    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).collect::<Vec<f64>>();
    let mx = valid_filter(&x, h, w, &g);
    let my = valid_filter(&y, h, w, &g);
    let mxx = valid_filter(&prod(&x, &x), h, w, &g);
    let myy = valid_filter(&prod(&y, &y), h, w, &g);
    let mxy = valid_filter(&prod(&x, &y), h, w, &g);

    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cov = mxy[i] - ux * uy;
        let num = (2.0 * ux * uy + c1) * (2.0 * cov + c2);
        let den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
        ensure!(den > 0.0, UndefinedMetric, "ssim window {i} has zero denominator (blank reference)");
        total += num / den;
    }
    Ok(total / mx.len() as f64)
}

/// Zero-sum Laplacian-of-Gaussian kernel (`size × size`, row-major) built
/// the usual way: normalized Gaussian, multiplied by `(r² − 2σ²)/σ⁴`, then
/// mean-subtracted.
pub fn log_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size as f64 - 1.0) / 2.0;
    let s2 = sigma * sigma;
    let mut g = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (y, x) = (i as f64 - half, j as f64 - half);
            g.push((-(x * x + y * y) / (2.0 * s2)).exp());
        }
    }
    let sum: f64 = g.iter().sum();
    let mut k: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let (y, x) = ((idx / size) as f64 - half, (idx % size) as f64 - half);
            v / sum * (x * x + y * y - 2.0 * s2) / (s2 * s2)
        })
        .collect();
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    k
}

/// LoG response of a real image, zero-padded, same size as the input.
pub fn log_filter(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k = log_kernel(LOG_SIZE, LOG_SIGMA);
    let half = (LOG_SIZE / 2) as isize;
    let mut out = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = 0.0;
            for i in 0..LOG_SIZE as isize {
                let rr = r + i - half;
                if rr < 0 || rr >= h as isize {
                    continue;
                }
                for j in 0..LOG_SIZE as isize {
                    let cc = c + j - half;
                    if cc < 0 || cc >= w as isize {
                        continue;
                    }
                    acc += k[(i * LOG_SIZE as isize + j) as usize] * src[(rr * w as isize + cc) as usize];
                }
            }
            out[(r * w as isize + c) as usize] = acc;
        }
    }
    out
}

/// `‖LoG(|x_rec|) − LoG(|x_gt|)‖ / ‖LoG(|x_gt|)‖`
pub fn hfen<T: Scalar>(gt: &Image<T>, rec: &Image<T>) -> Result<f64> {
    same_shape(gt, rec)?;
    let (h, w) = gt.shape();
    let x: Vec<f64> = gt.data().iter().map(|z| z.norm().to_f64_lossy()).collect();
    let y: Vec<f64> = rec.data().iter().map(|z| z.norm().to_f64_lossy()).collect();
    let lx = log_filter(&x, h, w);
    let ly = log_filter(&y, h, w);
    let denom = lx.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::UndefinedMetric("hfen of a reference with no LoG response".into()));
    }
    let num = lx.iter().zip(&ly).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(num / denom)
}

/// Central crop keeping `fraction` of each dimension (rounded, at least one
/// pixel). `None` or `1.0` leaves the image untouched.
pub fn central_crop<T: Scalar>(img: &Image<T>, fraction: Option<f64>) -> Result<Image<T>> {
    match fraction {
        None => Ok(img.clone()),
        Some(f) => {
            ensure!(f > 0.0 && f <= 1.0, InvalidInput, "crop fraction must be in (0, 1], got {f}");
            let (h, w) = img.shape();
            let rows = ((h as f64 * f).round() as usize).clamp(1, h);
            let cols = ((w as f64 * f).round() as usize).clamp(1, w);
            img.crop_center(rows, cols)
        }
    }
}

fn magnitude_image<T: Scalar>(img: &Image<T>) -> Image<T> {
    let (h, w) = img.shape();
    let data = img.magnitude().into_iter().map(|m| Complex::new(m, T::zero())).collect();
    Image::from_raw(h, w, data)
}

/// Which metric drives mask optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    Nmse,
    /// `1 − SSIM`
    Ssim,
    Hfen,
    /// NMSE between magnitude images.
    NmseMagnitude,
}

impl LossKind {
    pub fn evaluate<T: Scalar>(self, gt: &Image<T>, rec: &Image<T>, crop: Option<f64>) -> Result<f64> {
        let (gt, rec) = match crop {
            None => (std::borrow::Cow::Borrowed(gt), std::borrow::Cow::Borrowed(rec)),
            Some(_) => (
                std::borrow::Cow::Owned(central_crop(gt, crop)?),
                std::borrow::Cow::Owned(central_crop(rec, crop)?),
            ),
        };
        match self {
            LossKind::Nmse => Ok(nmse(&gt, &rec)?.to_f64_lossy()),
            LossKind::Ssim => Ok(1.0 - ssim(&gt, &rec)?),
            LossKind::Hfen => hfen(&gt, &rec),
            LossKind::NmseMagnitude => Ok(nmse(&magnitude_image(&gt), &magnitude_image(&rec))?.to_f64_lossy()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmse: f64,
    pub ssim: f64,
    pub hfen: f64,
}

impl MetricReport {
    pub fn compute<T: Scalar>(gt: &Image<T>, rec: &Image<T>, crop: Option<f64>) -> Result<Self> {
        let gt = central_crop(gt, crop)?;
        let rec = central_crop(rec, crop)?;
        let report = MetricReport { nmse: nmse(&gt, &rec)?.to_f64_lossy(), ssim: ssim(&gt, &rec)?, hfen: hfen(&gt, &rec)? };
        ensure!(
            report.nmse.is_finite() && report.ssim.is_finite() && report.hfen.is_finite(),
            Numerical,
            "non-finite metric report {report:?}"
        );
        Ok(report)
    }
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scan_id: String,
    pub mask_kind: String,
    pub recon_kind: String,
    pub nmse: f64,
    pub ssim: f64,
    pub hfen: f64,
}

pub const METRIC_CSV_HEADER: &str = "scan_id,mask_kind,recon_kind,nmse,ssim,hfen";

impl MetricRow {
    pub fn new(scan_id: &str, mask_kind: &str, recon_kind: &str, report: MetricReport) -> Self {
        Self {
            scan_id: scan_id.into(),
            mask_kind: mask_kind.into(),
            recon_kind: recon_kind.into(),
            nmse: report.nmse,
            ssim: report.ssim,
            hfen: report.hfen,
        }
    }

    /// CSV line with round-trip (shortest exact) float formatting.
    pub fn to_csv_line(&self) -> String {
        format!("{},{},{},{:?},{:?},{:?}", self.scan_id, self.mask_kind, self.recon_kind, self.nmse, self.ssim, self.hfen)
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        ensure!(f.len() == 6, InvalidInput, "metrics row needs 6 fields: `{line}`");
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number `{s}` in `{line}`")));
        Ok(Self {
            scan_id: f[0].into(),
            mask_kind: f[1].into(),
            recon_kind: f[2].into(),
            nmse: num(f[3])?,
            ssim: num(f[4])?,
            hfen: num(f[5])?,
        })
    }
}
