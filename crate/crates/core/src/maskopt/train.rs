//! Alternating optimization of per-scan masks and a shared reconstructor.
//!
//! Default schedule:
//! 1. seeded variable-density random mask per scan;
//! 2. tune the reconstructor on those pairs;
//! 3. greedy mask per scan under the tuned reconstructor;
//! 4. re-tune on the greedy pairs;
//! 5. coordinate descent per scan, reconstructor from (4) held fixed;
//! 6. final re-tune.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::greedy::greedy_search;
use super::icd::icd_search;
use super::objective::{MaskObjective, ScanObjective};
use super::vdrs::make_vdrs_mask;
use super::{with_parallelism, OptimConfig};
use crate::bundle::ScanBundle;
use crate::error::{ensure, Result};
use crate::mask::LineMask;
use crate::recon::{tune_prepared, ReconKind, ReconParams};
use crate::seed::derive_seed;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub config: OptimConfig,
    pub kind: ReconKind,
    pub grid: Vec<ReconParams>,
    pub vdrs_seed: u64,
    pub density_power: f64,
}

impl TrainSchedule {
    pub fn new(config: OptimConfig, kind: ReconKind) -> Self {
        Self { config, kind, grid: ReconParams::default_grid(kind), vdrs_seed: 0, density_power: 2.0 }
    }

    /// Seed of the random baseline mask for the `index`-th scan.
    pub fn vdrs_scan_seed(&self, index: usize) -> u64 {
        derive_seed(self.vdrs_seed, index as u64)
    }
}

/// Audited stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Random masks under the reconstructor tuned on them.
    Vdrs,
    /// Greedy masks under the same reconstructor.
    Greedy,
    /// Greedy masks under the re-tuned reconstructor.
    GreedyRetuned,
    /// Coordinate-descent masks under the reconstructor of `GreedyRetuned`.
    Icd,
    /// Coordinate-descent masks under the final reconstructor.
    IcdRetuned,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Vdrs, Stage::Greedy, Stage::GreedyRetuned, Stage::Icd, Stage::IcdRetuned];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Vdrs => "vdrs",
            Stage::Greedy => "greedy",
            Stage::GreedyRetuned => "greedy-retuned",
            Stage::Icd => "icd",
            Stage::IcdRetuned => "icd-retuned",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub stage: Stage,
    pub scan_id: String,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Final reconstructor, tuned on the coordinate-descent masks.
    pub recon: ReconParams,
    /// Reconstructor tuned on the random masks.
    pub vdrs_recon: ReconParams,
    /// Reconstructor tuned on the greedy masks.
    pub greedy_recon: ReconParams,
    pub vdrs_masks: Vec<LineMask>,
    pub greedy_masks: Vec<LineMask>,
    /// Final per-scan masks.
    pub masks: Vec<LineMask>,
    pub audit: Vec<AuditRow>,
}

impl TrainOutcome {
    pub fn stage_mean(&self, stage: Stage) -> f64 {
        let v: Vec<f64> = self.audit.iter().filter(|r| r.stage == stage).map(|r| r.loss).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn alternate_train<T: Scalar>(dataset: &[ScanBundle<T>], schedule: &TrainSchedule) -> Result<TrainOutcome> {
    ensure!(!dataset.is_empty(), InvalidInput, "training needs at least one scan");
    let width = dataset[0].width();
    ensure!(dataset.iter().all(|s| s.width() == width), Dimension, "training scans differ in width");
    let config = &schedule.config;
    config.validate(width)?;
    with_parallelism(config.parallelism, || run(dataset, schedule, width))
}

fn run<T: Scalar>(dataset: &[ScanBundle<T>], schedule: &TrainSchedule, width: usize) -> Result<TrainOutcome> {
    let config = &schedule.config;
    let acqs = dataset.par_iter().map(|s| s.acquisition()).collect::<Result<Vec<_>>>()?;
    let objective = |i: usize, params: &ReconParams| {
        ScanObjective::from_parts(acqs[i].clone(), dataset[i].gt().clone(), params, config.loss, config.crop)
    };
    let tune = |masks: &[LineMask]| -> Result<ReconParams> {
        let pairs: Vec<_> = acqs.iter().zip(dataset).zip(masks).map(|((a, s), m)| (a, s.gt(), m)).collect();
        tune_prepared(&pairs, schedule.kind, &schedule.grid).map(|(p, _)| p)
    };
    let mut audit = Vec::with_capacity(Stage::ALL.len() * dataset.len());
    let mut record = |stage: Stage, losses: Vec<f64>| {
        for (s, loss) in dataset.iter().zip(losses) {
            audit.push(AuditRow { stage, scan_id: s.scan_id.clone(), loss });
        }
    };
    let evaluate = |masks: &[LineMask], params: &ReconParams| -> Result<Vec<f64>> {
        (0..dataset.len()).into_par_iter().map(|i| objective(i, params)?.loss(masks[i].lines())).collect()
    };

    let vdrs_masks = (0..dataset.len())
        .map(|i| make_vdrs_mask(width, config, schedule.density_power, schedule.vdrs_scan_seed(i)))
        .collect::<Result<Vec<_>>>()?;
    let vdrs_recon = tune(&vdrs_masks)?;
    record(Stage::Vdrs, evaluate(&vdrs_masks, &vdrs_recon)?);

    let greedy_masks = (0..dataset.len())
        .into_par_iter()
        .map(|i| greedy_search(&objective(i, &vdrs_recon)?, config).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?;
    record(Stage::Greedy, evaluate(&greedy_masks, &vdrs_recon)?);

    let greedy_recon = tune(&greedy_masks)?;
    record(Stage::GreedyRetuned, evaluate(&greedy_masks, &greedy_recon)?);

    let masks = (0..dataset.len())
        .into_par_iter()
        .map(|i| icd_search(&objective(i, &greedy_recon)?, &greedy_masks[i], config).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?;
    record(Stage::Icd, evaluate(&masks, &greedy_recon)?);

    let recon = tune(&masks)?;
    record(Stage::IcdRetuned, evaluate(&masks, &recon)?);

    Ok(TrainOutcome { recon, vdrs_recon, greedy_recon, vdrs_masks, greedy_masks, masks, audit })
}
