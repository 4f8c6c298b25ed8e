//! Approximate posterior function draws via random Fourier features, and the
//! threshold sets built from their maxima.
//!
//! A draw is `f(x) = scale * sum_j w_j cos(omega_j . x + b_j)` with
//! `omega_j ~ N(0, diag(1 / l^2))`, `b_j ~ U[0, 2 pi)` and
//! `scale = sqrt(2 sigma_s^2 / m)`. Prior weights are standard normal; the
//! posterior draw is obtained by pathwise conditioning in the dual
//! (data-sized) form, `w = w0 + Phi^T (Phi Phi^T + sigma_n^2 I)^-1 (y - Phi w0 - e)`,
//! which is an exact draw from the weight posterior of the feature model.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::gp::{cholesky_with_jitter, GpPosterior};
use crate::optimize::projected_ascent;

pub const DEFAULT_FEATURES: usize = 500;
pub const DEFAULT_MAX_VALUE_SAMPLES: usize = 5;

/// One closed-form function draw.
#[derive(Debug, Clone, PartialEq)]
pub struct RffSample {
    frequencies: Vec<Vec<f64>>,
    phases: Vec<f64>,
    weights: Vec<f64>,
    scale: f64,
}

impl RffSample {
    pub fn new(frequencies: Vec<Vec<f64>>, phases: Vec<f64>, weights: Vec<f64>, scale: f64) -> Result<Self> {
        let m = frequencies.len();
        if m == 0 || phases.len() != m || weights.len() != m {
            return Err(Error::InvalidArgument("feature arrays must be non-empty and of equal length".into()));
        }
        let d = frequencies[0].len();
        if frequencies.iter().any(|w| w.len() != d) {
            return Err(Error::InvalidArgument("frequency rows must share one dimension".into()));
        }
        Ok(RffSample { frequencies, phases, weights, scale })
    }

    pub fn n_features(&self) -> usize {
        self.phases.len()
    }

    pub fn dim(&self) -> usize {
        self.frequencies[0].len()
    }

    pub fn frequencies(&self) -> &[Vec<f64>] {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn argument(&self, j: usize, x: &[f64]) -> f64 {
        self.frequencies[j].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.phases[j]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s: f64 = (0..self.n_features()).map(|j| self.weights[j] * self.argument(j, x).cos()).sum();
        self.scale * s
    }

    /// Value and gradient in one pass.
    pub fn eval_with_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; x.len()];
        for j in 0..self.n_features() {
            let (sin, cos) = self.argument(j, x).sin_cos();
            value += self.weights[j] * cos;
            let coef = -self.weights[j] * sin;
            for (g, w) in grad.iter_mut().zip(&self.frequencies[j]) {
                *g += coef * w;
            }
        }
        grad.iter_mut().for_each(|g| *g *= self.scale);
        (self.scale * value, grad)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.eval_with_gradient(x).1
    }

    fn features(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_features()).map(|j| self.scale * self.argument(j, x).cos()).collect()
    }
}

/// Draws an approximate sample of `f` from the posterior `gp` using `m`
/// random Fourier features.
pub fn draw_posterior_sample<R: Rng + ?Sized>(gp: &GpPosterior, m: usize, rng: &mut R) -> Result<RffSample> {
    if m == 0 {
        return Err(Error::InvalidArgument("feature count must be at least 1".into()));
    }
    let params = gp.params();
    let frequencies: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            params
                .lengthscales
                .iter()
                .map(|l| {
                    let z: f64 = StandardNormal.sample(rng);
                    z / l
                })
                .collect()
        })
        .collect();
    let phases: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..TAU)).collect();
    let prior_weights: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let scale = (2.0 * params.signal_variance / m as f64).sqrt();
    let mut sample = RffSample::new(frequencies, phases, prior_weights, scale)?;

    let data = gp.data();
    let n = data.len();
    if n == 0 {
        return Ok(sample);
    }
    let mut phi = DMatrix::zeros(n, m);
    for (i, x) in data.inputs().iter().enumerate() {
        for (j, v) in sample.features(x).into_iter().enumerate() {
            phi[(i, j)] = v;
        }
    }
    let noise = params.noise_variance;
    let mut gram = &phi * phi.transpose();
    for i in 0..n {
        gram[(i, i)] += noise;
    }
    let (chol, _) = cholesky_with_jitter(&gram, params.signal_variance)?;
    let w0 = DVector::from_column_slice(&sample.weights);
    let noise_sd = noise.sqrt();
    let residual = DVector::from_iterator(
        n,
        data.observations().iter().enumerate().map(|(i, y)| {
            let e: f64 = StandardNormal.sample(rng);
            y - (phi.row(i) * &w0)[0] - noise_sd * e
        }),
    );
    let correction = phi.transpose() * chol.solve(&residual);
    sample.weights = (w0 + correction).iter().copied().collect();
    Ok(sample)
}

/// Settings for maximizing each function draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerOptConfig {
    pub n_starts: usize,
    pub ascent_steps: usize,
    /// Initial step as a fraction of the box width.
    pub step_size: f64,
}

impl Default for InnerOptConfig {
    fn default() -> Self {
        InnerOptConfig { n_starts: 50, ascent_steps: 100, step_size: 0.05 }
    }
}

/// Maximum of a draw over `bounds`: gradient ascent from `n_starts` random
/// points and from every `extra_start`.
pub fn maximize_sample<R: Rng + ?Sized>(
    sample: &RffSample,
    bounds: &Bounds,
    extra_starts: &[Vec<f64>],
    cfg: &InnerOptConfig,
    rng: &mut R,
) -> f64 {
    let mut starts: Vec<Vec<f64>> = (0..cfg.n_starts.max(1)).map(|_| bounds.sample(rng)).collect();
    starts.extend(extra_starts.iter().cloned());
    let mut best = f64::NEG_INFINITY;
    for start in starts {
        let v0 = sample.eval(&start);
        let (_, v) = projected_ascent(
            start,
            v0,
            bounds,
            cfg.ascent_steps,
            cfg.step_size,
            |x: &[f64]| sample.eval(x),
            |x: &[f64]| sample.gradient(x),
        );
        best = best.max(v);
    }
    best
}

/// Samples `n_samples` plausible maximum values of `f` under `gp`.
pub fn sample_max_values<R: Rng + ?Sized>(
    gp: &GpPosterior,
    bounds: &Bounds,
    n_samples: usize,
    m: usize,
    rng: &mut R,
    inner: &InnerOptConfig,
) -> Result<ThresholdSet> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("at least one maximum-value sample is required".into()));
    }
    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let sample = draw_posterior_sample(gp, m, rng)?;
        values.push(maximize_sample(&sample, bounds, gp.data().inputs(), inner, rng));
    }
    ThresholdSet::max_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdKind {
    /// Sampled maximum values `F*`.
    MaxValue,
    /// `F_alpha = { f* - alpha }`.
    Shifted,
    /// Ascending vectors `(f* - alpha, f*)`.
    Stacked,
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdKind::MaxValue => "max_value",
            ThresholdKind::Shifted => "shifted",
            ThresholdKind::Stacked => "stacked",
        })
    }
}

/// Finite set of thresholds treated as a uniform discrete random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThresholdSet {
    MaxValue(Vec<f64>),
    Shifted { values: Vec<f64>, alpha: f64 },
    Stacked(Vec<Vec<f64>>),
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("threshold set is empty".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("thresholds must be finite".into()));
    }
    Ok(())
}

impl ThresholdSet {
    pub fn max_values(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(ThresholdSet::MaxValue(values))
    }

    /// Stacked set; each vector must be non-empty and strictly ascending.
    pub fn stacked(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidArgument("threshold set is empty".into()));
        }
        for b in &vectors {
            check_finite(b)?;
            if b.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidArgument("threshold vectors must be strictly ascending".into()));
            }
        }
        Ok(ThresholdSet::Stacked(vectors))
    }

    pub fn kind(&self) -> ThresholdKind {
        match self {
            ThresholdSet::MaxValue(_) => ThresholdKind::MaxValue,
            ThresholdSet::Shifted { .. } => ThresholdKind::Shifted,
            ThresholdSet::Stacked(_) => ThresholdKind::Stacked,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ThresholdSet::MaxValue(v) | ThresholdSet::Shifted { values: v, .. } => v.len(),
            ThresholdSet::Stacked(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scalar thresholds (max-value and shifted sets).
    pub fn scalars(&self) -> Option<&[f64]> {
        match self {
            ThresholdSet::MaxValue(v) | ThresholdSet::Shifted { values: v, .. } => Some(v),
            ThresholdSet::Stacked(_) => None,
        }
    }

    /// Threshold vectors (stacked sets).
    pub fn vectors(&self) -> Option<&[Vec<f64>]> {
        match self {
            ThresholdSet::Stacked(v) => Some(v),
            _ => None,
        }
    }
}

fn max_value_slice(fstar: &ThresholdSet) -> Result<&[f64]> {
    match fstar {
        ThresholdSet::MaxValue(v) => Ok(v),
        other => Err(Error::InvalidArgument(format!("expected a max_value threshold set, got {}", other.kind()))),
    }
}

/// `F_alpha = { f* - alpha | f* in F* }`.
pub fn shift_thresholds(fstar: &ThresholdSet, alpha: f64) -> Result<ThresholdSet> {
    let values = max_value_slice(fstar)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument("tolerance alpha must be finite and non-negative".into()));
    }
    Ok(ThresholdSet::Shifted { values: values.iter().map(|f| f - alpha).collect(), alpha })
}

/// `B = { (f* - alpha, f*) | f* in F* }`.
pub fn stack_thresholds(fstar: &ThresholdSet, alpha: f64) -> Result<ThresholdSet> {
    let values = max_value_slice(fstar)?;
    if alpha == 0.0 {
        return Err(Error::DegenerateThresholds);
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument("tolerance alpha must be finite and positive".into()));
    }
    ThresholdSet::stacked(values.iter().map(|&f| vec![f - alpha, f]).collect())
}
