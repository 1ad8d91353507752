use serde::{Deserialize, Serialize};

use super::objective::{MaskObjective, PopulationObjective, ScanObjective};
use super::{argmin_with_ties, with_parallelism, OptimConfig};
use crate::bundle::ScanBundle;
use crate::error::{ensure, Error, Result};
use crate::mask::{central_lines, LineMask};
use crate::recon::ReconParams;
use crate::Scalar;

/// One accepted line of a greedy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub line: usize,
    /// Loss after adding `line`.
    pub loss: f64,
    pub candidates_evaluated: usize,
}

/// Starting from the central block, repeatedly adds the admissible line
/// whose addition gives the lowest loss until the budget is met.
pub(crate) fn greedy_search(obj: &dyn MaskObjective, config: &OptimConfig) -> Result<(LineMask, Vec<GreedyStep>)> {
    let width = obj.width();
    config.validate(width)?;
    let fixed = central_lines(width, config.n_lowfreq)?;
    let mut lines = fixed.clone();
    let mut pool: Vec<usize> = config.candidates(width).into_iter().filter(|k| !lines.contains(k)).collect();
    let mut trace = Vec::with_capacity(config.budget.saturating_sub(lines.len()));

    while lines.len() < config.budget {
        if pool.is_empty() {
            return Err(Error::Infeasible(format!(
                "candidate pool exhausted with {} of {} lines placed",
                lines.len(),
                config.budget
            )));
        }
        let losses = obj.losses_with_added(&lines, &pool)?;
        let best = argmin_with_ties(&losses, config.tie_tol)
            .ok_or_else(|| Error::Numerical("no finite candidate loss".into()))?;
        let line = pool.remove(best);
        trace.push(GreedyStep { line, loss: losses[best], candidates_evaluated: losses.len() });
        lines.push(line);
        lines.sort_unstable();
    }
    Ok((LineMask::new(width, config.budget, fixed, lines)?, trace))
}

pub fn greedy_optimize<T: Scalar>(scan: &ScanBundle<T>, recon: &ReconParams, config: &OptimConfig) -> Result<LineMask> {
    greedy_optimize_traced(scan, recon, config).map(|(m, _)| m)
}

/// [`greedy_optimize`] plus the per-step record of accepted lines.
pub fn greedy_optimize_traced<T: Scalar>(
    scan: &ScanBundle<T>,
    recon: &ReconParams,
    config: &OptimConfig,
) -> Result<(LineMask, Vec<GreedyStep>)> {
    let obj = ScanObjective::new(scan, recon, config.loss, config.crop)?;
    with_parallelism(config.parallelism, || greedy_search(&obj, config))
}

/// One mask for the whole dataset: greedy on the mean loss across scans.
pub fn population_greedy<T: Scalar>(dataset: &[ScanBundle<T>], recon: &ReconParams, config: &OptimConfig) -> Result<LineMask> {
    population_greedy_traced(dataset, recon, config).map(|(m, _)| m)
}

pub fn population_greedy_traced<T: Scalar>(
    dataset: &[ScanBundle<T>],
    recon: &ReconParams,
    config: &OptimConfig,
) -> Result<(LineMask, Vec<GreedyStep>)> {
    ensure!(!dataset.is_empty(), InvalidInput, "population greedy needs at least one scan");
    with_parallelism(config.parallelism, || {
        let scans = dataset
            .iter()
            .map(|s| ScanObjective::new(s, recon, config.loss, config.crop))
            .collect::<Result<Vec<_>>>()?;
        let obj = PopulationObjective::new(scans)?;
        greedy_search(&obj, config)
    })
}
