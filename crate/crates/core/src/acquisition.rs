//! Acquisition and active-learning criteria.
//!
//! Every criterion is a pure function of the posterior moments at the
//! candidate input, so each has a moment-level form (`*_at`) and a thin
//! wrapper taking the surrogate and the input.
//!
//! # Evaluating the information gain
//!
//! For ascending thresholds `b_1 < .. < b_k` the label of `x` is the interval
//! of `f(x)`. The information carried by `y_x` about that label is
//!
//! ```text
//! I = H(prior label) - E_{y ~ N(mu, s+^2)}[ H(label | y) ]
//! ```
//!
//! With `y = mu + s+ * eps` the posterior label depends on `eps` only through
//! the standardized cuts `a_j - c * eps`, where `c = s_x / s_n` and
//! `a_j = s+ (b_j - mu) / (s_x s_n)`. For small observation noise `c` is
//! large and the posterior entropy is a narrow ridge around `eps = a_j / c`,
//! which a plain Gauss–Hermite rule over `eps` resolves poorly. We split the
//! integrand with the partition of unity `B_j / sum_i B_i`,
//! `B_j(eps) = exp(-(a_j - c eps)^2 / 2)`, and integrate each piece with a
//! Gauss–Hermite rule matched to the Gaussian `phi(eps) B_j(eps)`. What is
//! left, `H / sum_i B_i`, grows at most polynomially, so the rule converges
//! quickly for every noise level.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, PosteriorMoments};
use crate::normal::{self, interval_entropy, log_cdf, log_interval_entropy, log_pdf, log_sum_exp};
use crate::quadrature::GaussHermite;
use crate::sampling::{ThresholdKind, ThresholdSet};

pub const DEFAULT_QUADRATURE_NODES: usize = 64;
/// Straddle heuristic width (the 95% two-sided normal quantile).
pub const STRADDLE_WIDTH: f64 = 1.96;
pub const DEFAULT_BETA: f64 = 2.0;

/// Binary class of `x` relative to a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// `f(x) < threshold` (label +1).
    Below,
    /// `f(x) >= threshold` (label -1, superlevel set).
    Above,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Below => 1.0,
            Label::Above => -1.0,
        }
    }
}

/// `h = (threshold - mu) / sigma_x`.
pub fn prior_gap(moments: &PosteriorMoments, threshold: f64) -> f64 {
    (threshold - moments.mean) / moments.std_dev()
}

/// `g = (s+^2 t - s_n^2 mu - s_x^2 y) / (s_x s_n s+)`.
pub fn posterior_gap(moments: &PosteriorMoments, threshold: f64, y: f64) -> f64 {
    let sx = moments.std_dev();
    let sn = moments.noise_variance.sqrt();
    let sp = moments.observation_variance.sqrt();
    (moments.observation_variance * threshold - moments.noise_variance * moments.mean - moments.variance * y)
        / (sx * sn * sp)
}

/// `p(label | y_D)`. With zero posterior variance the label is known and the
/// result is an exact 0/1 indicator.
pub fn class_prob(moments: &PosteriorMoments, threshold: f64, label: Label) -> f64 {
    if moments.variance <= 0.0 {
        let below = moments.mean < threshold;
        return match (label, below) {
            (Label::Below, true) | (Label::Above, false) => 1.0,
            _ => 0.0,
        };
    }
    normal::cdf(label.sign() * prior_gap(moments, threshold))
}

/// `p(label | y_D, y_x = y)`, the class probability after one more noisy
/// observation at `x`.
pub fn class_prob_given_y(moments: &PosteriorMoments, threshold: f64, y: f64, label: Label) -> Result<f64> {
    if moments.noise_variance <= 0.0 {
        return Err(Error::DegenerateNoise);
    }
    if moments.variance <= 0.0 {
        return Ok(class_prob(moments, threshold, label));
    }
    Ok(normal::cdf(label.sign() * posterior_gap(moments, threshold, y)))
}

fn check_ascending(b: &[f64]) -> Result<()> {
    if b.is_empty() {
        return Err(Error::InvalidArgument("threshold vector is empty".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("thresholds must be finite".into()));
    }
    if b.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("thresholds must be strictly ascending".into()));
    }
    Ok(())
}

/// Mutual information between `y_x` and the interval label induced by the
/// ascending thresholds `b`. Callers guarantee `b` is ascending and finite.
fn partition_information(moments: &PosteriorMoments, b: &[f64], nodes: usize) -> f64 {
    let sx = moments.std_dev();
    if !(sx > 0.0) {
        return 0.0;
    }
    let k = b.len();
    let mut prior_cuts = [0.0f64; 8];
    let mut prior_vec = Vec::new();
    let prior: &mut [f64] = if k <= prior_cuts.len() {
        &mut prior_cuts[..k]
    } else {
        prior_vec.resize(k, 0.0);
        &mut prior_vec
    };
    for (c, t) in prior.iter_mut().zip(b) {
        *c = (t - moments.mean) / sx;
    }
    let prior_entropy = interval_entropy(prior);
    if moments.noise_variance <= 0.0 || prior_entropy <= 0.0 {
        return prior_entropy;
    }
    let sn = moments.noise_variance.sqrt();
    let sp = moments.observation_variance.sqrt();
    let c = sx / sn;
    let tau = 1.0 + c * c;
    let spread = 1.0 / tau.sqrt();
    let a: Vec<f64> = prior.iter().map(|h| h * sp / sn).collect();
    let rule = GaussHermite::cached(nodes.max(1));

    let mut cuts = vec![0.0; k];
    let mut log_bumps = vec![0.0; k];
    let mut expected_posterior = 0.0;
    for &aj in &a {
        let weight = (-aj * aj / (2.0 * tau)).exp() * spread;
        if weight == 0.0 {
            continue;
        }
        let centre = aj * c / tau;
        let mut piece = 0.0;
        for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
            let eps = centre + z * spread;
            for ((cut, lb), ai) in cuts.iter_mut().zip(log_bumps.iter_mut()).zip(&a) {
                *cut = ai - c * eps;
                *lb = -0.5 * *cut * *cut;
            }
            let log_h = log_interval_entropy(&cuts);
            if log_h == f64::NEG_INFINITY {
                continue;
            }
            piece += w * (log_h - log_sum_exp(&log_bumps)).exp();
        }
        expected_posterior += weight * piece;
    }
    let cap = ((k + 1) as f64).ln();
    (prior_entropy - expected_posterior).clamp(0.0, cap)
}

/// Binary entropy search: `I(y_x; label | y_D, threshold)`. Reduces to the
/// prior label entropy (EM) when the noise variance is zero.
pub fn bes_at(moments: &PosteriorMoments, threshold: f64, nodes: usize) -> f64 {
    partition_information(moments, &[threshold], nodes)
}

pub fn bes(gp: &GpPosterior, x: &[f64], threshold: f64, nodes: usize) -> f64 {
    bes_at(&gp.posterior(x), threshold, nodes)
}

/// Information gain about the `(k+1)`-class interval label for strictly
/// ascending thresholds `b`.
pub fn bes_k_at(moments: &PosteriorMoments, b: &[f64], nodes: usize) -> Result<f64> {
    check_ascending(b)?;
    Ok(partition_information(moments, b, nodes))
}

pub fn bes_k(gp: &GpPosterior, x: &[f64], b: &[f64], nodes: usize) -> Result<f64> {
    bes_k_at(&gp.posterior(x), b, nodes)
}

/// Entropy maximization: the binary entropy of the current label.
pub fn em_at(moments: &PosteriorMoments, threshold: f64) -> f64 {
    if moments.variance <= 0.0 {
        return 0.0;
    }
    interval_entropy(&[prior_gap(moments, threshold)])
}

pub fn em(gp: &GpPosterior, x: &[f64], threshold: f64) -> f64 {
    em_at(&gp.posterior(x), threshold)
}

/// `1.96 sigma_x - |mu_x - threshold|`.
pub fn straddle_at(moments: &PosteriorMoments, threshold: f64) -> f64 {
    STRADDLE_WIDTH * moments.std_dev() - (moments.mean - threshold).abs()
}

pub fn straddle(gp: &GpPosterior, x: &[f64], threshold: f64) -> f64 {
    straddle_at(&gp.posterior(x), threshold)
}

fn scalar_set(set: &ThresholdSet, kind: ThresholdKind) -> Result<&[f64]> {
    if set.kind() != kind {
        return Err(Error::InvalidArgument(format!("expected a {kind} threshold set, got {}", set.kind())));
    }
    let values = set.scalars().expect("scalar kinds carry scalars");
    if values.is_empty() {
        return Err(Error::InvalidArgument("threshold set is empty".into()));
    }
    Ok(values)
}

fn mean_bes(moments: &PosteriorMoments, values: &[f64], nodes: usize) -> f64 {
    values.iter().map(|&t| bes_at(moments, t, nodes)).sum::<f64>() / values.len() as f64
}

/// BES averaged over sampled maximum values; equals `I(y_x; (label, f*))`.
pub fn bes_mp_at(moments: &PosteriorMoments, fstar: &ThresholdSet, nodes: usize) -> Result<f64> {
    Ok(mean_bes(moments, scalar_set(fstar, ThresholdKind::MaxValue)?, nodes))
}

pub fn bes_mp(gp: &GpPosterior, x: &[f64], fstar: &ThresholdSet, nodes: usize) -> Result<f64> {
    bes_mp_at(&gp.posterior(x), fstar, nodes)
}

/// BES averaged over the shifted thresholds `f* - alpha`.
pub fn bes_mp_implicit_at(moments: &PosteriorMoments, falpha: &ThresholdSet, nodes: usize) -> Result<f64> {
    Ok(mean_bes(moments, scalar_set(falpha, ThresholdKind::Shifted)?, nodes))
}

pub fn bes_mp_implicit(gp: &GpPosterior, x: &[f64], falpha: &ThresholdSet, nodes: usize) -> Result<f64> {
    bes_mp_implicit_at(&gp.posterior(x), falpha, nodes)
}

fn stacked_vectors(set: &ThresholdSet) -> Result<&[Vec<f64>]> {
    if set.kind() != ThresholdKind::Stacked {
        return Err(Error::InvalidArgument(format!("expected a stacked threshold set, got {}", set.kind())));
    }
    let vectors = set.vectors().expect("stacked sets carry vectors");
    if vectors.is_empty() {
        return Err(Error::InvalidArgument("threshold set is empty".into()));
    }
    Ok(vectors)
}

/// BES^k averaged over a stacked set of threshold vectors of any length.
pub fn bes_k_mean_at(moments: &PosteriorMoments, set: &ThresholdSet, nodes: usize) -> Result<f64> {
    let vectors = stacked_vectors(set)?;
    let mut total = 0.0;
    for b in vectors {
        total += bes_k_at(moments, b, nodes)?;
    }
    Ok(total / vectors.len() as f64)
}

/// BES^2-MP: BES^k with `b = (f* - alpha, f*)`, averaged over the set.
pub fn bes2_mp_at(moments: &PosteriorMoments, set: &ThresholdSet, nodes: usize) -> Result<f64> {
    let vectors = stacked_vectors(set)?;
    if vectors.iter().any(|b| b.len() != 2) {
        return Err(Error::InvalidArgument("BES^2-MP needs threshold vectors of length 2".into()));
    }
    bes_k_mean_at(moments, set, nodes)
}

pub fn bes2_mp(gp: &GpPosterior, x: &[f64], set: &ThresholdSet, nodes: usize) -> Result<f64> {
    bes2_mp_at(&gp.posterior(x), set, nodes)
}

pub fn ucb_at(moments: &PosteriorMoments, beta: f64) -> f64 {
    moments.mean + beta * moments.std_dev()
}

pub fn ucb(gp: &GpPosterior, x: &[f64], beta: f64) -> f64 {
    ucb_at(&gp.posterior(x), beta)
}

/// Expected improvement over `incumbent` (maximization).
pub fn ei_at(moments: &PosteriorMoments, incumbent: f64) -> f64 {
    let sigma = moments.std_dev();
    let gain = moments.mean - incumbent;
    if sigma <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    let value = if z > -5.0 {
        sigma * (z * normal::cdf(z) + normal::pdf(z))
    } else {
        // phi(z) (1 + z Psi(z) / phi(z)) with the Mills ratio in log space.
        let ratio = (log_cdf(z) - log_pdf(z)).exp();
        sigma * normal::pdf(z) * (1.0 + z * ratio)
    };
    value.max(0.0)
}

pub fn ei(gp: &GpPosterior, x: &[f64], incumbent: f64) -> f64 {
    ei_at(&gp.posterior(x), incumbent)
}

/// Max-value entropy search with the upper-tail truncated Gaussian model,
/// `mean_{f*} [ z phi(z) / (2 Psi(z)) - log Psi(z) ]`, `z = (f* - mu) / sigma_x`.
pub fn mes_at(moments: &PosteriorMoments, fstar: &ThresholdSet) -> Result<f64> {
    let values = scalar_set(fstar, ThresholdKind::MaxValue)?;
    let sigma = moments.std_dev();
    if sigma <= 0.0 {
        return Ok(0.0);
    }
    let total: f64 = values
        .iter()
        .map(|&f| {
            let z = (f - moments.mean) / sigma;
            let log_psi = log_cdf(z);
            let ratio = (log_pdf(z) - log_psi).exp();
            (0.5 * z * ratio - log_psi).max(0.0)
        })
        .sum();
    Ok(total / values.len() as f64)
}

pub fn mes(gp: &GpPosterior, x: &[f64], fstar: &ThresholdSet) -> Result<f64> {
    mes_at(&gp.posterior(x), fstar)
}

/// The quantity inside the expectation defining BES, at the reparameterized
/// observation `y = mu + s+ * eps`:
/// `sum_gamma Psi(gamma g) log(Psi(gamma g) / Psi(gamma h))`.
///
/// Averaging this over `eps ~ N(0, 1)` gives BES; it is exposed for
/// stochastic estimators.
pub fn bes_integrand(moments: &PosteriorMoments, threshold: f64, eps: f64) -> Result<f64> {
    bes_k_integrand(moments, &[threshold], eps)
}

/// Reparameterized integrand of BES^k (see [`bes_integrand`]).
pub fn bes_k_integrand(moments: &PosteriorMoments, b: &[f64], eps: f64) -> Result<f64> {
    check_ascending(b)?;
    if moments.noise_variance <= 0.0 {
        return Err(Error::DegenerateNoise);
    }
    if moments.variance <= 0.0 {
        return Ok(0.0);
    }
    let y = moments.mean + moments.observation_variance.sqrt() * eps;
    let prior: Vec<f64> = b.iter().map(|&t| prior_gap(moments, t)).collect();
    let post: Vec<f64> = b.iter().map(|&t| posterior_gap(moments, t, y)).collect();
    let mut total = 0.0;
    for class in 0..=b.len() {
        let lo = |cuts: &[f64]| if class == 0 { f64::NEG_INFINITY } else { cuts[class - 1] };
        let hi = |cuts: &[f64]| if class == b.len() { f64::INFINITY } else { cuts[class] };
        let log_post = normal::log_cdf_diff(lo(&post), hi(&post));
        if log_post == f64::NEG_INFINITY {
            continue;
        }
        let log_prior = normal::log_cdf_diff(lo(&prior), hi(&prior)).max(normal::PROB_FLOOR.ln());
        total += log_post.exp() * (log_post - log_prior);
    }
    Ok(total)
}

/// Criterion tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Bes,
    Em,
    Straddle,
    BesMp,
    BesMpImplicit,
    Bes2Mp,
    BesK,
    Ucb,
    Ei,
    Mes,
}

impl Criterion {
    pub const ALL: [Criterion; 10] = [
        Criterion::Bes,
        Criterion::Em,
        Criterion::Straddle,
        Criterion::BesMp,
        Criterion::BesMpImplicit,
        Criterion::Bes2Mp,
        Criterion::BesK,
        Criterion::Ucb,
        Criterion::Ei,
        Criterion::Mes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Bes => "bes",
            Criterion::Em => "em",
            Criterion::Straddle => "strdl",
            Criterion::BesMp => "bes_mp",
            Criterion::BesMpImplicit => "bes_mp_implicit",
            Criterion::Bes2Mp => "bes2_mp",
            Criterion::BesK => "besk",
            Criterion::Ucb => "ucb",
            Criterion::Ei => "ei",
            Criterion::Mes => "mes",
        }
    }

    /// Threshold set kind the criterion consumes, if any.
    pub fn threshold_kind(self) -> Option<ThresholdKind> {
        match self {
            Criterion::BesMp | Criterion::Mes => Some(ThresholdKind::MaxValue),
            Criterion::BesMpImplicit => Some(ThresholdKind::Shifted),
            Criterion::Bes2Mp | Criterion::BesK => Some(ThresholdKind::Stacked),
            _ => None,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .or(match key.as_str() {
                "straddle" => Some(Criterion::Straddle),
                "bes_k" => Some(Criterion::BesK),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown criterion `{s}`")))
    }
}

/// A criterion together with everything it needs to be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSpec {
    pub criterion: Criterion,
    /// Known scalar threshold (BES, EM, straddle).
    pub threshold: Option<f64>,
    /// Sampled threshold set (BES-MP, MES, implicit BES-MP, BES^2-MP, BES^k).
    pub thresholds: Option<ThresholdSet>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    /// Best observed value (EI).
    pub incumbent: Option<f64>,
    pub quadrature_nodes: usize,
}

impl AcquisitionSpec {
    pub fn new(criterion: Criterion) -> Self {
        AcquisitionSpec {
            criterion,
            threshold: None,
            thresholds: None,
            beta: None,
            alpha: None,
            incumbent: None,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        }
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn with_thresholds(mut self, set: ThresholdSet) -> Self {
        self.thresholds = Some(set);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_incumbent(mut self, incumbent: f64) -> Self {
        self.incumbent = Some(incumbent);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    /// Checks that the criterion-specific fields are present and well formed.
    pub fn validate(&self) -> Result<()> {
        let missing = |what: &str| Error::InvalidArgument(format!("{} requires {what}", self.criterion));
        if self.quadrature_nodes == 0 {
            return Err(Error::InvalidArgument("quadrature_nodes must be positive".into()));
        }
        match self.criterion {
            Criterion::Bes | Criterion::Em | Criterion::Straddle => {
                let t = self.threshold.ok_or_else(|| missing("a scalar threshold"))?;
                if !t.is_finite() {
                    return Err(Error::InvalidArgument("threshold must be finite".into()));
                }
            }
            Criterion::Ucb => {
                let beta = self.beta.unwrap_or(DEFAULT_BETA);
                if !(beta > 0.0) {
                    return Err(Error::InvalidArgument("beta must be positive".into()));
                }
            }
            Criterion::Ei => {
                self.incumbent.ok_or_else(|| missing("an incumbent value"))?;
            }
            c => {
                let set = self.thresholds.as_ref().ok_or_else(|| missing("a threshold set"))?;
                let kind = c.threshold_kind().expect("set-based criterion");
                if set.kind() != kind {
                    return Err(Error::InvalidArgument(format!("{c} requires a {kind} threshold set")));
                }
                if set.is_empty() {
                    return Err(Error::InvalidArgument("threshold set is empty".into()));
                }
                if c == Criterion::Bes2Mp && set.vectors().is_some_and(|v| v.iter().any(|b| b.len() != 2)) {
                    return Err(Error::InvalidArgument("BES^2-MP needs threshold vectors of length 2".into()));
                }
            }
        }
        Ok(())
    }

    /// Criterion value for the given posterior moments.
    pub fn evaluate(&self, m: &PosteriorMoments) -> Result<f64> {
        let nodes = self.quadrature_nodes;
        let set = || self.thresholds.as_ref().ok_or_else(|| Error::InvalidArgument("missing threshold set".into()));
        let threshold = || self.threshold.ok_or_else(|| Error::InvalidArgument("missing threshold".into()));
        match self.criterion {
            Criterion::Bes => Ok(bes_at(m, threshold()?, nodes)),
            Criterion::Em => Ok(em_at(m, threshold()?)),
            Criterion::Straddle => Ok(straddle_at(m, threshold()?)),
            Criterion::BesMp => bes_mp_at(m, set()?, nodes),
            Criterion::BesMpImplicit => bes_mp_implicit_at(m, set()?, nodes),
            Criterion::Bes2Mp => bes2_mp_at(m, set()?, nodes),
            Criterion::BesK => bes_k_mean_at(m, set()?, nodes),
            Criterion::Ucb => Ok(ucb_at(m, self.beta.unwrap_or(DEFAULT_BETA))),
            Criterion::Ei => Ok(ei_at(
                m,
                self.incumbent.ok_or_else(|| Error::InvalidArgument("missing incumbent".into()))?,
            )),
            Criterion::Mes => mes_at(m, set()?),
        }
    }

    pub fn score(&self, gp: &GpPosterior, x: &[f64]) -> Result<f64> {
        self.evaluate(&gp.posterior(x))
    }
}
