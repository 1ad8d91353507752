use serde::{Deserialize, Serialize};

use super::objective::{MaskObjective, ScanObjective};
use super::{argmin_with_ties, with_parallelism, OptimConfig};
use crate::bundle::ScanBundle;
use crate::error::{ensure, Error, Result};
use crate::mask::LineMask;
use crate::recon::ReconParams;
use crate::Scalar;

/// One visited line of a coordinate-descent sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcdStep {
    pub sweep: usize,
    pub removed: usize,
    /// Equal to `removed` when the line stayed put.
    pub inserted: usize,
    pub loss_before: f64,
    pub loss_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcdTrace {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps: Vec<IcdStep>,
    pub sweeps: usize,
    /// The last sweep moved nothing.
    pub converged: bool,
}

/// Coordinate descent over line positions: each movable line in turn is
/// taken out and put back at the admissible column with the lowest loss.
/// A line only moves when some other column beats staying by more than the
/// tie tolerance; among tied winners the lowest column is chosen.
pub(crate) fn icd_search(obj: &dyn MaskObjective, mask0: &LineMask, config: &OptimConfig) -> Result<(LineMask, IcdTrace)> {
    let width = obj.width();
    config.validate(width)?;
    ensure!(mask0.width() == width, Dimension, "mask width {} vs scan width {width}", mask0.width());
    ensure!(mask0.is_complete(), InvalidInput, "initial mask has {} of {} lines", mask0.len(), mask0.budget());

    let admissible = config.candidates(width);
    let mut lines = mask0.lines().to_vec();
    let initial_loss = obj.loss(&lines)?;
    let mut current = initial_loss;
    let mut steps = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;

    for sweep in 0..config.n_icd_iters {
        sweeps += 1;
        let entries: Vec<usize> = if config.freeze_lowfreq {
            lines.iter().copied().filter(|l| !mask0.fixed().contains(l)).collect()
        } else {
            lines.clone()
        };
        let mut changed = false;
        for removed in entries {
            let rest: Vec<usize> = lines.iter().copied().filter(|&l| l != removed).collect();
            let mut slots: Vec<usize> = admissible.iter().copied().filter(|k| !rest.contains(k)).collect();
            if !slots.contains(&removed) {
                slots.push(removed);
                slots.sort_unstable();
            }
            let losses = obj.losses_with_added(&rest, &slots)?;
            let stay = slots.binary_search(&removed).expect("current line is a slot");
            let best = argmin_with_ties(&losses, config.tie_tol)
                .ok_or_else(|| Error::Numerical("no finite candidate loss".into()))?;
            let threshold = losses[stay] - config.tie_tol * losses[stay].abs();
            let chosen = if losses[best] < threshold { best } else { stay };
            let inserted = slots[chosen];
            if inserted != removed {
                changed = true;
                lines = rest;
                lines.push(inserted);
                lines.sort_unstable();
            }
            steps.push(IcdStep { sweep, removed, inserted, loss_before: current, loss_after: losses[chosen] });
            current = losses[chosen];
        }
        if !changed {
            converged = true;
            break;
        }
    }

    let fixed: Vec<usize> = mask0.fixed().iter().copied().filter(|f| lines.contains(f)).collect();
    let mask = LineMask::new(width, mask0.budget(), fixed, lines)?;
    Ok((mask, IcdTrace { initial_loss, final_loss: current, steps, sweeps, converged }))
}

pub fn icd_optimize<T: Scalar>(
    scan: &ScanBundle<T>,
    mask0: &LineMask,
    recon: &ReconParams,
    config: &OptimConfig,
) -> Result<LineMask> {
    icd_optimize_traced(scan, mask0, recon, config).map(|(m, _)| m)
}

/// [`icd_optimize`] plus the loss after every visited line.
pub fn icd_optimize_traced<T: Scalar>(
    scan: &ScanBundle<T>,
    mask0: &LineMask,
    recon: &ReconParams,
    config: &OptimConfig,
) -> Result<(LineMask, IcdTrace)> {
    let obj = ScanObjective::new(scan, recon, config.loss, config.crop)?;
    with_parallelism(config.parallelism, || icd_search(&obj, mask0, config))
}
