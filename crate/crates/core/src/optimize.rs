//! Maximization of an acquisition criterion over a box.
//!
//! Random candidates are scored first; the best few are then refined by
//! projected gradient ascent with finite-difference gradients and an adaptive
//! step that halves whenever a move fails to improve.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Bounds;
use crate::error::{Error, Result};

/// Relative finite-difference step, as a fraction of each box width.
pub const FD_STEP: f64 = 1e-5;
const MIN_STEP: f64 = 1e-8;
const MAX_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub n_random_candidates: usize,
    pub n_ascent_starts: usize,
    pub ascent_steps: usize,
    /// Initial ascent step as a fraction of the box width.
    pub step_size: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { n_random_candidates: 2000, n_ascent_starts: 10, ascent_steps: 100, step_size: 0.05, seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_random_candidates == 0 || self.n_ascent_starts == 0 || self.ascent_steps == 0 {
            return Err(Error::InvalidArgument("optimizer counts must be at least 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidArgument("optimizer step size must be positive".into()));
        }
        Ok(())
    }
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

/// Projected ascent from `(x, value)`. `gradient` returns the gradient at a
/// point. Steps are taken along the normalized gradient measured in
/// unit-cube coordinates, so the step length is a fraction of the box.
pub(crate) fn projected_ascent(
    mut x: Vec<f64>,
    mut value: f64,
    bounds: &Bounds,
    steps: usize,
    initial_step: f64,
    mut objective: impl FnMut(&[f64]) -> f64,
    mut gradient: impl FnMut(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, f64) {
    let d = bounds.dim();
    let mut step = initial_step.min(MAX_STEP);
    let mut grad = gradient(&x);
    let mut trial = vec![0.0; d];
    for _ in 0..steps {
        let scaled: Vec<f64> = (0..d).map(|i| grad[i] * bounds.width(i)).collect();
        let norm = scaled.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            break;
        }
        for i in 0..d {
            trial[i] = x[i] + step * bounds.width(i) * scaled[i] / norm;
        }
        bounds.clamp_in_place(&mut trial);
        let candidate = finite_or_neg_inf(objective(&trial));
        if candidate > value {
            x.copy_from_slice(&trial);
            value = candidate;
            step = (step * 1.5).min(MAX_STEP);
            grad = gradient(&x);
        } else {
            step *= 0.5;
            if step < MIN_STEP {
                break;
            }
        }
    }
    (x, value)
}

/// Central differences with step `FD_STEP * width`, one-sided where the box
/// cuts the stencil.
pub(crate) fn fd_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], bounds: &Bounds) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = FD_STEP * bounds.width(i);
            let hi = (x[i] + h).min(bounds.upper()[i]);
            let lo = (x[i] - h).max(bounds.lower()[i]);
            probe[i] = hi;
            let f_hi = f(&probe);
            probe[i] = lo;
            let f_lo = f(&probe);
            probe[i] = x[i];
            let g = (f_hi - f_lo) / (hi - lo);
            if g.is_finite() {
                g
            } else {
                0.0
            }
        })
        .collect()
}

/// Maximizes `criterion` over `bounds`. Returns the best point and value.
///
/// Non-finite criterion values are treated as `-inf`. Ties keep the lowest
/// candidate index, so the result is deterministic for a fixed seed.
pub fn maximize_acquisition<F>(criterion: F, bounds: &Bounds, cfg: &OptimizerConfig) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let candidates: Vec<Vec<f64>> = (0..cfg.n_random_candidates).map(|_| bounds.sample(&mut rng)).collect();
    let values: Vec<f64> = candidates.par_iter().map(|x| finite_or_neg_inf(criterion(x))).collect();

    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    if order.is_empty() {
        return Err(Error::OptimizerFailure);
    }
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(cfg.n_ascent_starts);

    let refined: Vec<(Vec<f64>, f64)> = order
        .par_iter()
        .map(|&i| {
            projected_ascent(
                candidates[i].clone(),
                values[i],
                bounds,
                cfg.ascent_steps,
                cfg.step_size,
                &criterion,
                |x: &[f64]| fd_gradient(&criterion, x, bounds),
            )
        })
        .collect();

    let mut best_x = candidates[order[0]].clone();
    let mut best_value = values[order[0]];
    for (x, v) in refined {
        if v > best_value {
            best_x = x;
            best_value = v;
        }
    }
    Ok((best_x, best_value))
}
