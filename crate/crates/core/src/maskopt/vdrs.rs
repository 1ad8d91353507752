use rand::Rng;

use super::OptimConfig;
use crate::error::{ensure, Error, Result};
use crate::mask::{central_lines, LineMask};
use crate::seed::rng_from;

/// Unnormalized sampling density `(1 − |k − DC| / (width / 2))^p`, clamped
/// at zero.
pub fn vdrs_weights(width: usize, density_power: f64) -> Vec<f64> {
    let dc = (width / 2) as f64;
    let half = width as f64 / 2.0;
    (0..width).map(|k| (1.0 - (k as f64 - dc).abs() / half).max(0.0).powf(density_power)).collect()
}

/// Draws `count` distinct columns from `pool` without replacement, each
/// draw proportional to the density of the columns still available. Once
/// only zero-density columns remain they are drawn uniformly.
pub fn vdrs_draw_order(width: usize, pool: &[usize], count: usize, density_power: f64, seed: u64) -> Result<Vec<usize>> {
    ensure!(density_power >= 0.0 && density_power.is_finite(), InvalidInput, "density power must be ≥ 0");
    ensure!(pool.iter().all(|&k| k < width), InvalidInput, "pool column out of range");
    if count > pool.len() {
        return Err(Error::Infeasible(format!("cannot draw {count} lines from {} candidates", pool.len())));
    }
    let weights = vdrs_weights(width, density_power);
    let mut remaining: Vec<usize> = pool.to_vec();
    let mut rng = rng_from(seed);
    let mut drawn = Vec::with_capacity(count);
    for _ in 0..count {
        let total: f64 = remaining.iter().map(|&k| weights[k]).sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = remaining.len() - 1;
            for (i, &k) in remaining.iter().enumerate() {
                if weights[k] <= 0.0 {
                    continue;
                }
                if u < weights[k] {
                    chosen = i;
                    break;
                }
                u -= weights[k];
                chosen = i;
            }
            chosen
        } else {
            rng.random_range(0..remaining.len())
        };
        drawn.push(remaining.remove(pick));
    }
    Ok(drawn)
}

/// Central block plus `budget − n_lowfreq` variable-density random lines.
pub fn make_vdrs_mask(width: usize, config: &OptimConfig, density_power: f64, seed: u64) -> Result<LineMask> {
    config.validate(width)?;
    let fixed = central_lines(width, config.n_lowfreq)?;
    if config.budget == width {
        return LineMask::new(width, width, fixed, (0..width).collect());
    }
    let pool: Vec<usize> = config.candidates(width).into_iter().filter(|k| !fixed.contains(k)).collect();
    let extra = vdrs_draw_order(width, &pool, config.budget - fixed.len(), density_power, seed)?;
    let mut lines = fixed.clone();
    lines.extend(extra);
    LineMask::new(width, config.budget, fixed, lines)
}
