use rayon::prelude::*;

use crate::bundle::ScanBundle;
use crate::error::{ensure, Error, Result};
use crate::image::Image;
use crate::metrics::LossKind;
use crate::operator::Acquisition;
use crate::recon::{reconstruct_lines, ReconKind, ReconParams};
use crate::Scalar;

/// Reconstruction loss of a column set.
pub trait MaskObjective: Sync {
    fn width(&self) -> usize;

    fn loss(&self, lines: &[usize]) -> Result<f64>;

    /// Loss of `base ∪ {k}` for every `k` in `candidates` (none of which
    /// may be in `base`), in candidate order.
    fn losses_with_added(&self, base: &[usize], candidates: &[usize]) -> Result<Vec<f64>>;
}

fn finite(loss: f64, lines: &[usize]) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Numerical(format!("non-finite loss for lines {lines:?}")))
    }
}

/// `L(x_gt, f(Aᴴ M_Ω y))` for one scan with the reconstructor held fixed.
pub struct ScanObjective<T: Scalar> {
    acq: Acquisition<T>,
    gt: Image<T>,
    params: ReconParams,
    loss: LossKind,
    crop: Option<f64>,
}

impl<T: Scalar> ScanObjective<T> {
    pub fn new(scan: &ScanBundle<T>, params: &ReconParams, loss: LossKind, crop: Option<f64>) -> Result<Self> {
        params.validate()?;
        Ok(Self { acq: scan.acquisition()?, gt: scan.gt().clone(), params: *params, loss, crop })
    }

    pub fn from_parts(acq: Acquisition<T>, gt: Image<T>, params: &ReconParams, loss: LossKind, crop: Option<f64>) -> Result<Self> {
        params.validate()?;
        ensure!(acq.shape() == gt.shape(), Dimension, "acquisition {:?} vs ground truth {:?}", acq.shape(), gt.shape());
        Ok(Self { acq, gt, params: *params, loss, crop })
    }

    pub fn acquisition(&self) -> &Acquisition<T> {
        &self.acq
    }

    pub fn gt(&self) -> &Image<T> {
        &self.gt
    }

    pub fn params(&self) -> &ReconParams {
        &self.params
    }

    pub fn reconstruct(&self, lines: &[usize]) -> Result<Image<T>> {
        reconstruct_lines(&self.acq, lines, &self.params)
    }
}

impl<T: Scalar> MaskObjective for ScanObjective<T> {
    fn width(&self) -> usize {
        self.acq.shape().1
    }

    fn loss(&self, lines: &[usize]) -> Result<f64> {
        let rec = self.reconstruct(lines)?;
        finite(self.loss.evaluate(&self.gt, &rec, self.crop)?, lines)
    }

    fn losses_with_added(&self, base: &[usize], candidates: &[usize]) -> Result<Vec<f64>> {
        if self.params.kind == ReconKind::ZeroFilled {
            // zero-filled is linear in the column set
            let base_img = self.acq.adjoint_lines(base);
            return candidates
                .par_iter()
                .map(|&k| {
                    let rec = base_img.add_scaled(num_complex::Complex::new(T::one(), T::zero()), &self.acq.column_image(k))?;
                    finite(self.loss.evaluate(&self.gt, &rec, self.crop)?, &[k])
                })
                .collect();
        }
        candidates
            .par_iter()
            .map(|&k| {
                let mut lines = base.to_vec();
                lines.push(k);
                lines.sort_unstable();
                self.loss(&lines)
            })
            .collect()
    }
}

/// Mean of per-scan objectives; drives the single shared mask.
pub struct PopulationObjective<T: Scalar> {
    scans: Vec<ScanObjective<T>>,
}

impl<T: Scalar> PopulationObjective<T> {
    pub fn new(scans: Vec<ScanObjective<T>>) -> Result<Self> {
        ensure!(!scans.is_empty(), InvalidInput, "population objective needs at least one scan");
        let w = scans[0].width();
        ensure!(scans.iter().all(|s| s.width() == w), Dimension, "scans of different widths in one population");
        Ok(Self { scans })
    }

    pub fn scans(&self) -> &[ScanObjective<T>] {
        &self.scans
    }
}

impl<T: Scalar> MaskObjective for PopulationObjective<T> {
    fn width(&self) -> usize {
        self.scans[0].width()
    }

    fn loss(&self, lines: &[usize]) -> Result<f64> {
        let per_scan = self.scans.par_iter().map(|s| s.loss(lines)).collect::<Result<Vec<_>>>()?;
        Ok(per_scan.iter().sum::<f64>() / per_scan.len() as f64)
    }

    fn losses_with_added(&self, base: &[usize], candidates: &[usize]) -> Result<Vec<f64>> {
        let per_scan = self
            .scans
            .par_iter()
            .map(|s| s.losses_with_added(base, candidates))
            .collect::<Result<Vec<_>>>()?;
        let n = per_scan.len() as f64;
        Ok((0..candidates.len()).map(|i| per_scan.iter().map(|v| v[i]).sum::<f64>() / n).collect())
    }
}
