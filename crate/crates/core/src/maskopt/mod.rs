//! Sampling-pattern search: variable-density random baseline, per-scan
//! greedy selection, iterative coordinate descent refinement, the
//! population-wide greedy baseline and the alternating training driver.

mod greedy;
mod icd;
mod objective;
mod train;
mod vdrs;

use serde::{Deserialize, Serialize};

pub use greedy::{greedy_optimize, greedy_optimize_traced, population_greedy, population_greedy_traced, GreedyStep};
pub use icd::{icd_optimize, icd_optimize_traced, IcdStep, IcdTrace};
pub use objective::{MaskObjective, PopulationObjective, ScanObjective};
pub use train::{alternate_train, AuditRow, Stage, TrainOutcome, TrainSchedule};
pub use vdrs::{make_vdrs_mask, vdrs_draw_order, vdrs_weights};

use crate::error::{ensure, Result};
use crate::metrics::LossKind;

/// Settings shared by every mask search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    /// Total number of sampled lines `B`.
    pub budget: usize,
    /// Size of the always-sampled central block.
    pub n_lowfreq: usize,
    /// Maximum number of coordinate-descent sweeps.
    pub n_icd_iters: usize,
    /// Admissible columns; `None` means every column.
    pub candidate_set: Option<Vec<usize>>,
    pub loss: LossKind,
    /// Keep the central block in place during coordinate descent.
    pub freeze_lowfreq: bool,
    /// Relative tolerance under which candidate losses count as tied.
    pub tie_tol: f64,
    /// Worker threads for candidate evaluation; 0 uses the ambient pool.
    pub parallelism: usize,
    /// Optional central-crop fraction applied before the loss.
    pub crop: Option<f64>,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            budget: 16,
            n_lowfreq: 6,
            n_icd_iters: 1,
            candidate_set: None,
            loss: LossKind::Nmse,
            freeze_lowfreq: true,
            tie_tol: 1e-12,
            parallelism: 0,
            crop: None,
        }
    }
}

impl OptimConfig {
    pub fn new(budget: usize, n_lowfreq: usize) -> Self {
        Self { budget, n_lowfreq, ..Self::default() }
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        ensure!(self.budget <= width, InvalidInput, "budget {} exceeds width {width}", self.budget);
        ensure!(
            self.n_lowfreq <= self.budget,
            InvalidInput,
            "low-frequency block {} exceeds budget {}",
            self.n_lowfreq,
            self.budget
        );
        if let Some(c) = &self.candidate_set {
            ensure!(c.iter().all(|&k| k < width), InvalidInput, "candidate column out of range for width {width}");
        }
        ensure!(self.tie_tol >= 0.0, InvalidInput, "tie tolerance must be ≥ 0");
        Ok(())
    }

    /// Sorted, deduplicated admissible columns.
    pub fn candidates(&self, width: usize) -> Vec<usize> {
        match &self.candidate_set {
            None => (0..width).collect(),
            Some(c) => {
                let mut c = c.clone();
                c.sort_unstable();
                c.dedup();
                c
            }
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the current
/// pool when `threads == 0`.
pub(crate) fn with_parallelism<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Index (into `losses`) of the minimum, preferring the earliest entry among
/// those within `tie_tol` (relative) of it.
pub(crate) fn argmin_with_ties(losses: &[f64], tie_tol: f64) -> Option<usize> {
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    losses.iter().position(|&l| l <= best + tie_tol * best.abs())
}
