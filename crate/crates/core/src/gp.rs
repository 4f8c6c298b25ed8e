//! Exact Gaussian-process regression with a squared-exponential ARD kernel.
//!
//! The posterior keeps the lower Cholesky factor `L` of `K_DD + sigma_n^2 I`
//! and `alpha = (K_DD + sigma_n^2 I)^-1 y_D`; every query goes through those
//! two quantities. The prior mean is zero, so callers are expected to hand in
//! centred observations.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative jitter added to the Gram diagonal before factorization.
pub const BASE_JITTER: f64 = 1e-10;
/// Largest relative jitter tried before giving up.
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let params = KernelParams { lengthscales, signal_variance, noise_variance };
        params.validate()?;
        Ok(params)
    }

    /// Same lengthscale in every dimension.
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance, noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least one lengthscale".into()));
        }
        if self.lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument("lengthscales must be positive and finite".into()));
        }
        if !(self.signal_variance > 0.0) || !self.signal_variance.is_finite() {
            return Err(Error::InvalidArgument("signal variance must be positive".into()));
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidArgument("noise variance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }
}

/// `sigma_s^2 exp(-0.5 sum_i ((x1_i - x2_i) / l_i)^2)`.
pub fn kernel(x1: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64> {
    let d = params.dim();
    if x1.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x1.len() });
    }
    if x2.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x2.len() });
    }
    Ok(kernel_unchecked(x1, x2, params))
}

#[inline]
pub(crate) fn kernel_unchecked(x1: &[f64], x2: &[f64], params: &KernelParams) -> f64 {
    let mut r2 = 0.0;
    for ((a, b), l) in x1.iter().zip(x2).zip(&params.lengthscales) {
        let t = (a - b) / l;
        r2 += t * t;
    }
    params.signal_variance * (-0.5 * r2).exp()
}

/// Noise-free Gram matrix `K_DD`.
pub fn gram_matrix(inputs: &[Vec<f64>], params: &KernelParams) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.signal_variance;
        for j in 0..i {
            let v = kernel_unchecked(&inputs[i], &inputs[j], params);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Ordered input queries and their noisy observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    observations: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, observations: Vec<f64>) -> Result<Self> {
        if inputs.len() != observations.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} observations",
                inputs.len(),
                observations.len()
            )));
        }
        if let Some(first) = inputs.first() {
            if let Some(bad) = inputs.iter().find(|x| x.len() != first.len()) {
                return Err(Error::DimensionMismatch { expected: first.len(), got: bad.len() });
            }
        }
        Ok(Dataset { inputs, observations })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) {
        self.inputs.push(x);
        self.observations.push(y);
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Gaussian belief about `f(x)` and the predictive spread of `y_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub mean: f64,
    pub variance: f64,
    /// `variance + noise_variance`.
    pub observation_variance: f64,
    pub noise_variance: f64,
}

impl PosteriorMoments {
    pub fn new(mean: f64, variance: f64, noise_variance: f64) -> Self {
        let variance = variance.max(0.0);
        PosteriorMoments { mean, variance, observation_variance: variance + noise_variance, noise_variance }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Conditions the belief about `f(x)` on one more noisy observation `y_x` at
/// the same input, without refactorizing:
/// mean `(s^2 y + n^2 mu) / s+^2`, variance `s^2 n^2 / s+^2`.
pub fn incremental_conditional(moments: &PosteriorMoments, y_x: f64) -> Result<PosteriorMoments> {
    let s2 = moments.variance;
    let n2 = moments.noise_variance;
    let plus = s2 + n2;
    if !(plus > 0.0) {
        return Err(Error::DegeneratePosterior);
    }
    let mean = (s2 * y_x + n2 * moments.mean) / plus;
    let variance = s2 * n2 / plus;
    Ok(PosteriorMoments::new(mean, variance, n2))
}

/// Factorizes `k + jitter I`, starting at `BASE_JITTER * scale` and doubling
/// up to `MAX_JITTER * scale`. Returns the lower factor and the jitter used.
pub(crate) fn cholesky_with_jitter(k: &DMatrix<f64>, scale: f64) -> Result<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    let mut jitter = BASE_JITTER * scale;
    loop {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, jitter));
        }
        if jitter >= MAX_JITTER * scale {
            return Err(Error::NotPositiveDefinite { jitter });
        }
        jitter = (jitter * 2.0).min(MAX_JITTER * scale);
    }
}

/// Trained surrogate. Immutable; conditioning on more data builds a new one.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    params: KernelParams,
    data: Dataset,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GpPosterior {
    pub fn new(params: KernelParams, data: Dataset) -> Result<Self> {
        params.validate()?;
        if let Some(x) = data.inputs().first() {
            if x.len() != params.dim() {
                return Err(Error::DimensionMismatch { expected: params.dim(), got: x.len() });
            }
        }
        let n = data.len();
        if n == 0 {
            return Ok(GpPosterior { params, data, chol: DMatrix::zeros(0, 0), alpha: DVector::zeros(0), jitter: 0.0 });
        }
        let mut k = gram_matrix(data.inputs(), &params);
        for i in 0..n {
            k[(i, i)] += params.noise_variance;
        }
        let (chol, jitter) = cholesky_with_jitter(&k, params.signal_variance)?;
        let y = DVector::from_column_slice(data.observations());
        let alpha = chol.solve(&y);
        Ok(GpPosterior { params, data, chol: chol.l(), alpha, jitter })
    }

    pub fn prior(params: KernelParams) -> Result<Self> {
        Self::new(params, Dataset::empty())
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Lower-triangular factor of `K_DD + (sigma_n^2 + jitter) I`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn noise_variance(&self) -> f64 {
        self.params.noise_variance
    }

    /// Posterior moments of `f(x)`. Panics if `x` has the wrong dimension.
    pub fn posterior(&self, x: &[f64]) -> PosteriorMoments {
        assert_eq!(x.len(), self.dim(), "query dimension does not match the kernel");
        let n = self.data.len();
        let prior_var = self.params.signal_variance;
        if n == 0 {
            return PosteriorMoments::new(0.0, prior_var, self.params.noise_variance);
        }
        let mut v: Vec<f64> =
            self.data.inputs().iter().map(|xi| kernel_unchecked(x, xi, &self.params)).collect();
        let mean: f64 = v.iter().zip(self.alpha.iter()).map(|(k, a)| k * a).sum();
        // Forward substitution L v = k, in place.
        let l = &self.chol;
        for i in 0..n {
            let mut s = v[i];
            for j in 0..i {
                s -= l[(i, j)] * v[j];
            }
            v[i] = s / l[(i, i)];
        }
        let explained: f64 = v.iter().map(|t| t * t).sum();
        PosteriorMoments::new(mean, prior_var - explained, self.params.noise_variance)
    }

    /// Same hyperparameters, one more observation.
    pub fn with_observation(&self, x: Vec<f64>, y: f64) -> Result<Self> {
        let mut data = self.data.clone();
        data.push(x, y);
        Self::new(self.params.clone(), data)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.data.len();
        if n == 0 {
            return 0.0;
        }
        let y = DVector::from_column_slice(self.data.observations());
        let fit = -0.5 * y.dot(&self.alpha);
        let log_det: f64 = (0..n).map(|i| self.chol[(i, i)].ln()).sum();
        fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Box constraints on the hyperparameters (natural scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub lengthscale: Vec<(f64, f64)>,
    pub signal_variance: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl HyperBounds {
    /// Lengthscales between 1% and 200% of each domain width.
    pub fn for_domain(widths: &[f64]) -> Self {
        HyperBounds {
            lengthscale: widths.iter().map(|w| (0.01 * w, 2.0 * w)).collect(),
            signal_variance: (0.05, 20.0),
            noise_variance: (1e-6, 1.0),
        }
    }

    fn log_box(&self, fit_noise: bool) -> Vec<(f64, f64)> {
        let mut b: Vec<(f64, f64)> = self.lengthscale.iter().map(|(lo, hi)| (lo.ln(), hi.ln())).collect();
        b.push((self.signal_variance.0.ln(), self.signal_variance.1.ln()));
        if fit_noise {
            b.push((self.noise_variance.0.ln(), self.noise_variance.1.ln()));
        }
        b
    }
}

#[derive(Debug, Clone)]
pub struct MleConfig {
    pub bounds: HyperBounds,
    /// Number of ascent starts (the warm start, if any, counts as one).
    pub restarts: usize,
    pub max_iters: usize,
    /// Optimize the noise variance too; otherwise it is held at
    /// `fixed_noise_variance`.
    pub fit_noise: bool,
    pub fixed_noise_variance: f64,
    /// Optional first start point.
    pub initial: Option<KernelParams>,
}

impl MleConfig {
    pub fn new(bounds: HyperBounds, fixed_noise_variance: f64) -> Self {
        MleConfig { bounds, restarts: 10, max_iters: 200, fit_noise: false, fixed_noise_variance, initial: None }
    }
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub params: KernelParams,
    pub log_likelihood: f64,
}

fn params_from_log(theta: &[f64], dim: usize, fit_noise: bool, fixed_noise: f64) -> KernelParams {
    KernelParams {
        lengthscales: theta[..dim].iter().map(|t| t.exp()).collect(),
        signal_variance: theta[dim].exp(),
        noise_variance: if fit_noise { theta[dim + 1].exp() } else { fixed_noise },
    }
}

fn params_to_log(params: &KernelParams, fit_noise: bool) -> Vec<f64> {
    let mut theta: Vec<f64> = params.lengthscales.iter().map(|l| l.ln()).collect();
    theta.push(params.signal_variance.ln());
    if fit_noise {
        theta.push(params.noise_variance.max(1e-300).ln());
    }
    theta
}

/// Log marginal likelihood and its gradient with respect to
/// `(log l_1..log l_d, log sigma_s^2[, log sigma_n^2])`.
pub fn log_marginal_likelihood_with_grad(
    data: &Dataset,
    params: &KernelParams,
    fit_noise: bool,
) -> Result<(f64, Vec<f64>)> {
    params.validate()?;
    let n = data.len();
    let d = params.dim();
    if n == 0 {
        return Ok((0.0, vec![0.0; d + 1 + fit_noise as usize]));
    }
    let xs = data.inputs();
    let kf = gram_matrix(xs, params);
    let mut k = kf.clone();
    for i in 0..n {
        k[(i, i)] += params.noise_variance;
    }
    let (chol, _) = cholesky_with_jitter(&k, params.signal_variance)?;
    let y = DVector::from_column_slice(data.observations());
    let alpha = chol.solve(&y);
    let l = chol.l();
    let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = alpha alpha^T - K^-1; dL/dtheta_j = 0.5 tr(W dK_j).
    let k_inv = chol.inverse();
    let w = &alpha * alpha.transpose() - k_inv;
    let mut grad = vec![0.0; d + 1 + fit_noise as usize];
    for a in 0..n {
        for b in 0..n {
            let wk = w[(a, b)] * kf[(a, b)];
            grad[d] += wk;
            if a != b {
                for (i, l) in params.lengthscales.iter().enumerate() {
                    let diff = (xs[a][i] - xs[b][i]) / l;
                    grad[i] += wk * diff * diff;
                }
            }
        }
        if fit_noise {
            grad[d + 1] += w[(a, a)] * params.noise_variance;
        }
    }
    for g in grad.iter_mut() {
        *g *= 0.5;
    }
    Ok((lml, grad))
}

pub fn log_marginal_likelihood(data: &Dataset, params: &KernelParams) -> Result<f64> {
    Ok(GpPosterior::new(params.clone(), data.clone())?.log_marginal_likelihood())
}

/// Projected gradient ascent with Armijo backtracking in log space.
/// Never returns a point worse than `start`.
fn ascend(
    data: &Dataset,
    start: Vec<f64>,
    bounds: &[(f64, f64)],
    cfg: &MleConfig,
) -> Option<(Vec<f64>, f64)> {
    let dim = cfg.bounds.lengthscale.len();
    let eval = |theta: &[f64]| -> Option<(f64, Vec<f64>)> {
        let p = params_from_log(theta, dim, cfg.fit_noise, cfg.fixed_noise_variance);
        match log_marginal_likelihood_with_grad(data, &p, cfg.fit_noise) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|x| x.is_finite()) => Some((v, g)),
            _ => None,
        }
    };
    let project = |theta: &mut [f64]| {
        for (t, (lo, hi)) in theta.iter_mut().zip(bounds) {
            *t = t.clamp(*lo, *hi);
        }
    };
    let mut theta = start;
    project(&mut theta);
    let (mut value, mut grad) = eval(&theta)?;
    let mut step = 0.1;
    for _ in 0..cfg.max_iters {
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g).collect();
            project(&mut cand);
            let moved: f64 = cand.iter().zip(&theta).map(|(c, t)| (c - t) * (c - t)).sum::<f64>();
            if moved < 1e-18 {
                return Some((theta, value));
            }
            let predicted: f64 = cand.iter().zip(&theta).zip(&grad).map(|((c, t), g)| (c - t) * g).sum();
            if let Some((v, g)) = eval(&cand) {
                if v >= value + 1e-4 * predicted {
                    let gain = v - value;
                    theta = cand;
                    value = v;
                    grad = g;
                    step *= 2.0;
                    accepted = true;
                    if gain.abs() < 1e-10 * value.abs().max(1.0) {
                        return Some((theta, value));
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((theta, value))
}

/// Maximum-likelihood hyperparameters from multi-start gradient ascent.
pub fn fit_mle<R: Rng + ?Sized>(data: &Dataset, cfg: &MleConfig, rng: &mut R) -> Result<MleFit> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument("maximum likelihood fit needs at least two observations".into()));
    }
    let dim = cfg.bounds.lengthscale.len();
    if data.inputs()[0].len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: data.inputs()[0].len() });
    }
    let bounds = cfg.bounds.log_box(cfg.fit_noise);
    let restarts = cfg.restarts.max(1);
    let mut starts = Vec::with_capacity(restarts);
    if let Some(init) = &cfg.initial {
        starts.push(params_to_log(init, cfg.fit_noise));
    }
    while starts.len() < restarts {
        starts.push(bounds.iter().map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect());
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        if let Some((theta, value)) = ascend(data, start, &bounds, cfg) {
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((theta, value));
            }
        }
    }
    let (theta, log_likelihood) =
        best.ok_or_else(|| Error::FitFailure("log marginal likelihood non-finite at every start".into()))?;
    Ok(MleFit { params: params_from_log(&theta, dim, cfg.fit_noise, cfg.fixed_noise_variance), log_likelihood })
}
