//! Evaluation metrics: threshold log loss, its version marginalized over
//! sampled maxima, and simple regret.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::BenchmarkFn;
use crate::error::{Error, Result};
use crate::gp::{Dataset, GpPosterior, PosteriorMoments};
use crate::normal::{log_cdf, log_sum_exp, PROB_FLOOR};
use crate::sampling::{ThresholdKind, ThresholdSet};

pub const DEFAULT_GRID_SIZE: usize = 7000;

/// Fixed evaluation inputs with their true function values.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    points: Vec<Vec<f64>>,
    truth: Vec<f64>,
}

impl EvalGrid {
    /// `size` inputs drawn uniformly from the benchmark domain.
    pub fn uniform(fun: &BenchmarkFn, size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..size).map(|_| fun.bounds().sample(&mut rng)).collect();
        let truth = points.iter().map(|x| fun.eval(x)).collect();
        EvalGrid { points, truth }
    }

    pub fn from_parts(points: Vec<Vec<f64>>, truth: Vec<f64>) -> Result<Self> {
        if points.len() != truth.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: truth.len() });
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument("evaluation grid is empty".into()));
        }
        Ok(EvalGrid { points, truth })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `log p(f(x) < threshold | y_D)` when `below`, else of `f(x) >= threshold`;
/// floored.
fn log_prob_side(m: &PosteriorMoments, threshold: f64, below: bool) -> f64 {
    let floor = PROB_FLOOR.ln();
    if m.variance <= 0.0 {
        return if (m.mean < threshold) == below { 0.0 } else { floor };
    }
    let h = (threshold - m.mean) / m.std_dev();
    let lp = if below { log_cdf(h) } else { log_cdf(-h) };
    lp.max(floor)
}

/// Mean negative log probability that the posterior puts each grid point on
/// its true side of `threshold`.
pub fn lse_log_loss(gp: &GpPosterior, grid: &EvalGrid, threshold: f64) -> f64 {
    let total: f64 = grid
        .points
        .iter()
        .zip(&grid.truth)
        .map(|(x, &f)| log_prob_side(&gp.posterior(x), threshold, f < threshold))
        .sum();
    // `0.0 -` rather than negation keeps a perfect score at +0.
    0.0 - total / grid.len() as f64
}

/// Log loss for the superlevel set at `max f - alpha` where the classifier
/// averages its class probability over the sampled thresholds
/// `f* - alpha`, `f*` in `fstar`. Ground-truth labels use `true_max - alpha`.
pub fn implicit_log_loss(
    gp: &GpPosterior,
    grid: &EvalGrid,
    fstar: &ThresholdSet,
    alpha: f64,
    true_max: f64,
) -> Result<f64> {
    if fstar.kind() != ThresholdKind::MaxValue {
        return Err(Error::InvalidArgument("implicit log loss expects sampled maximum values".into()));
    }
    let values = fstar.scalars().expect("max-value sets are scalar");
    if values.is_empty() {
        return Err(Error::InvalidArgument("threshold set is empty".into()));
    }
    let true_threshold = true_max - alpha;
    let log_n = (values.len() as f64).ln();
    let mut logs = vec![0.0; values.len()];
    let mut total = 0.0;
    for (x, &f) in grid.points.iter().zip(&grid.truth) {
        let m = gp.posterior(x);
        let below = f < true_threshold;
        for (slot, &fs) in logs.iter_mut().zip(values) {
            *slot = log_prob_side(&m, fs - alpha, below);
        }
        total += (log_sum_exp(&logs) - log_n).max(PROB_FLOOR.ln());
    }
    Ok(0.0 - total / grid.len() as f64)
}

/// `max f - max_i f(x_i)` over the queried inputs, re-evaluated without
/// noise. `None` for an empty dataset.
pub fn simple_regret(fun: &BenchmarkFn, data: &Dataset) -> Option<f64> {
    let best = data.inputs().iter().map(|x| fun.eval(x)).fold(f64::NEG_INFINITY, f64::max);
    if data.is_empty() {
        return None;
    }
    Some(fun.known_max() - best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Bounds;
    use crate::gp::KernelParams;
    use std::f64::consts::LN_2;

    fn grid_1d() -> EvalGrid {
        let points: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let truth = points.iter().map(|x| (6.0 * x[0]).sin()).collect();
        EvalGrid::from_parts(points, truth).unwrap()
    }

    #[test]
    fn prior_coin_flip() {
        let gp = GpPosterior::prior(KernelParams::new(vec![0.2], 1.0, 0.01).unwrap()).unwrap();
        assert!((lse_log_loss(&gp, &grid_1d(), 0.0) - LN_2).abs() < 1e-12);
    }

    #[test]
    fn implicit_collapses_to_known_threshold() {
        let data = Dataset::new(vec![vec![0.1], vec![0.5], vec![0.9]], vec![0.5, 0.1, -0.4]).unwrap();
        let gp = GpPosterior::new(KernelParams::new(vec![0.2], 1.0, 0.01).unwrap(), data).unwrap();
        let grid = grid_1d();
        let true_max = 1.0;
        let alpha = 0.2;
        let fstar = ThresholdSet::max_values(vec![true_max]).unwrap();
        let implicit = implicit_log_loss(&gp, &grid, &fstar, alpha, true_max).unwrap();
        let direct = lse_log_loss(&gp, &grid, true_max - alpha);
        assert!((implicit - direct).abs() < 1e-12);
    }

    #[test]
    fn implicit_coin_flip() {
        let gp = GpPosterior::prior(KernelParams::new(vec![0.2], 1.0, 0.01).unwrap()).unwrap();
        let fstar = ThresholdSet::max_values(vec![0.3, 0.3]).unwrap();
        let v = implicit_log_loss(&gp, &grid_1d(), &fstar, 0.3, 0.9).unwrap();
        assert!((v - LN_2).abs() < 1e-12);
    }

    #[test]
    fn regret_cases() {
        let fun = BenchmarkFn::new("bump", Bounds::unit(1), |x| -(x[0] - 0.25).powi(2));
        assert_eq!(simple_regret(&fun, &Dataset::empty()), None);
        let mut data = Dataset::new(vec![vec![0.75]], vec![0.0]).unwrap();
        assert!((simple_regret(&fun, &data).unwrap() - 0.25).abs() < 1e-9);
        data.push(vec![0.5], 0.0);
        assert!((simple_regret(&fun, &data).unwrap() - 0.0625).abs() < 1e-9);
        data.push(vec![0.25], 0.0);
        assert!(simple_regret(&fun, &data).unwrap().abs() < 1e-6);
    }
}
