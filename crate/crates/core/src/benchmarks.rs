//! Synthetic objectives: closed-form test functions on their usual domains and
//! fixed-seed GP-sampled fields, normalized to zero mean and unit variance on
//! a probe lattice so a zero-mean GP prior is appropriate.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::gp::{GpPosterior, KernelParams};
use crate::optimize::{fd_gradient, projected_ascent};
use crate::sampling::draw_posterior_sample;

/// Features used to realize `gp_sample` fields.
pub const GP_SAMPLE_FEATURES: usize = 1024;
/// Michalewicz steepness.
pub const MICHALEWICZ_STEEPNESS: i32 = 10;
pub const PHOSPHORUS_LENGTHSCALE: f64 = 0.25;
pub const PHOSPHORUS_SEED: u64 = 2024;
pub const PHOSPHORUS_NOISE_VARIANCE: f64 = 0.025;
/// Lattice points per axis used to estimate the normalization constants.
const PROBE_PER_DIM: [usize; 3] = [10_000, 100, 30];

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Global maximum located by dense search plus local refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub value: f64,
    pub location: Vec<f64>,
}

/// A deterministic objective on a box.
#[derive(Clone)]
pub struct BenchmarkFn {
    name: String,
    bounds: Bounds,
    evaluator: Evaluator,
    note: String,
    noise_hint: Option<f64>,
    maximum: Arc<OnceLock<Maximum>>,
}

impl fmt::Debug for BenchmarkFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkFn").field("name", &self.name).field("bounds", &self.bounds).finish()
    }
}

impl BenchmarkFn {
    pub fn new(name: impl Into<String>, bounds: Bounds, evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        BenchmarkFn {
            name: name.into(),
            bounds,
            evaluator: Arc::new(evaluator),
            note: String::new(),
            noise_hint: None,
            maximum: Arc::new(OnceLock::new()),
        }
    }

    fn derived(&self, evaluator: Evaluator) -> Self {
        BenchmarkFn { evaluator, maximum: Arc::new(OnceLock::new()), ..self.clone() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Free-form description of fixed parameters.
    pub fn note(&self) -> &str {
        &self.note
    }

    /// Noise variance the benchmark is meant to be observed with, if any.
    pub fn noise_hint(&self) -> Option<f64> {
        self.noise_hint
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    /// `-f`, same domain.
    pub fn negated(&self) -> Self {
        let inner = self.evaluator.clone();
        self.derived(Arc::new(move |x| -inner(x)))
    }

    /// Global maximum, computed on first use and shared between clones.
    pub fn maximum(&self) -> &Maximum {
        self.maximum.get_or_init(|| locate_maximum(self))
    }

    pub fn known_max(&self) -> f64 {
        self.maximum().value
    }
}

/// Dense lattice size per axis for the ground-truth maximum search:
/// about `10^6` points for `d <= 2` and `10^5 d` beyond.
fn search_per_dim(d: usize) -> usize {
    let target = if d <= 2 { 1e6 } else { 1e5 * d as f64 };
    (target.powf(1.0 / d as f64).ceil() as usize).max(2)
}

/// Visits every point of a `per_dim^d` lattice without materializing it.
fn for_each_lattice_point(bounds: &Bounds, per_dim: usize, mut visit: impl FnMut(&[f64])) {
    let d = bounds.dim();
    let mut idx = vec![0usize; d];
    let mut x = bounds.lower().to_vec();
    let step: Vec<f64> = (0..d).map(|i| bounds.width(i) / (per_dim - 1) as f64).collect();
    loop {
        for i in 0..d {
            x[i] = if idx[i] == per_dim - 1 { bounds.upper()[i] } else { bounds.lower()[i] + idx[i] as f64 * step[i] };
        }
        visit(&x);
        let mut axis = 0;
        loop {
            if axis == d {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < per_dim {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

fn locate_maximum(fun: &BenchmarkFn) -> Maximum {
    const KEEP: usize = 10;
    let bounds = fun.bounds();
    let per_dim = search_per_dim(bounds.dim());
    let mut top: Vec<(f64, Vec<f64>)> = Vec::with_capacity(KEEP + 1);
    for_each_lattice_point(bounds, per_dim, |x| {
        let v = fun.eval(x);
        if top.len() < KEEP || v > top[top.len() - 1].0 {
            let at = top.partition_point(|(w, _)| *w >= v);
            top.insert(at, (v, x.to_vec()));
            top.truncate(KEEP);
        }
    });
    let f = |x: &[f64]| fun.eval(x);
    let mut best = Maximum { value: top[0].0, location: top[0].1.clone() };
    for (v, x) in top {
        let (x, v) = projected_ascent(x, v, bounds, 500, 1.0 / per_dim as f64, f, |p: &[f64]| fd_gradient(&f, p, bounds));
        if v > best.value {
            best = Maximum { value: v, location: x };
        }
    }
    best
}

/// Affine map `(f - mean) / sd` with mean and standard deviation taken over
/// `probe`.
pub fn normalize(fun: &BenchmarkFn, probe: &[Vec<f64>]) -> Result<BenchmarkFn> {
    if probe.is_empty() {
        return Err(Error::InvalidArgument("probe grid is empty".into()));
    }
    let values: Vec<f64> = probe.iter().map(|x| fun.eval(x)).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::ZeroVariance);
    }
    let inner = fun.evaluator.clone();
    Ok(fun.derived(Arc::new(move |x| (inner(x) - mean) / sd)))
}

/// Default normalization lattice for a box.
pub fn probe_grid(bounds: &Bounds) -> Vec<Vec<f64>> {
    let d = bounds.dim();
    let per_dim = PROBE_PER_DIM.get(d - 1).copied().unwrap_or(10);
    bounds.lattice(per_dim)
}

/// `f(x) + e` with `e ~ N(0, noise_variance)`; exact when the variance is 0.
pub fn observe<R: Rng + ?Sized>(fun: &BenchmarkFn, x: &[f64], noise_variance: f64, rng: &mut R) -> f64 {
    let f = fun.eval(x);
    if noise_variance <= 0.0 {
        return f;
    }
    let e: f64 = StandardNormal.sample(rng);
    f + noise_variance.sqrt() * e
}

pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

pub fn michalewicz(x: &[f64]) -> f64 {
    -x.iter()
        .enumerate()
        .map(|(i, &v)| v.sin() * ((i + 1) as f64 * v * v / PI).sin().powi(2 * MICHALEWICZ_STEEPNESS))
        .sum::<f64>()
}

pub fn hartmann3(x: &[f64]) -> f64 {
    const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
    const A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
    const P: [[f64; 3]; 4] = [
        [0.3689, 0.1170, 0.2673],
        [0.4699, 0.4387, 0.7470],
        [0.1091, 0.8732, 0.5547],
        [0.0381, 0.5743, 0.8828],
    ];
    -(0..4)
        .map(|i| {
            let r: f64 = (0..3).map(|j| A[i][j] * (x[j] - P[i][j]).powi(2)).sum();
            ALPHA[i] * (-r).exp()
        })
        .sum::<f64>()
}

pub fn forrester(x: &[f64]) -> f64 {
    let t = x[0];
    (6.0 * t - 2.0).powi(2) * (12.0 * t - 4.0).sin()
}

pub fn goldstein_price(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let a = 1.0
        + (x1 + x2 + 1.0).powi(2) * (19.0 - 14.0 * x1 + 3.0 * x1 * x1 - 14.0 * x2 + 6.0 * x1 * x2 + 3.0 * x2 * x2);
    let b = 30.0
        + (2.0 * x1 - 3.0 * x2).powi(2)
            * (18.0 - 32.0 * x1 + 12.0 * x1 * x1 + 48.0 * x2 - 36.0 * x1 * x2 + 27.0 * x2 * x2);
    a * b
}

/// Prior function draw from a unit-variance squared-exponential GP on the
/// unit square.
fn gp_field(lengthscale: f64, seed: u64) -> Result<BenchmarkFn> {
    let params = KernelParams::isotropic(2, lengthscale, 1.0, 0.0)?;
    let prior = GpPosterior::prior(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = draw_posterior_sample(&prior, GP_SAMPLE_FEATURES, &mut rng)?;
    let name = format!("gp_sample(l={lengthscale},seed={seed})");
    Ok(BenchmarkFn::new(name, Bounds::unit(2), move |x| sample.eval(x)))
}

fn parse_gp_sample(name: &str) -> Option<(f64, u64)> {
    let args = name.strip_prefix("gp_sample(")?.strip_suffix(')')?;
    let mut parts = args.split(',').map(str::trim);
    let l = parts.next()?;
    let seed = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    let l: f64 = l.strip_prefix("l=").unwrap_or(l).parse().ok()?;
    let seed: u64 = seed.strip_prefix("seed=").unwrap_or(seed).parse().ok()?;
    (l > 0.0 && l.is_finite()).then_some((l, seed))
}

/// The closed-form (or sampled) function on its native domain, before
/// normalization.
pub fn raw_benchmark(name: &str) -> Result<BenchmarkFn> {
    let key = name.trim().to_ascii_lowercase().replace(' ', "");
    let mut fun = match key.as_str() {
        "branin" => BenchmarkFn::new("branin", Bounds::new(vec![-5.0, 0.0], vec![10.0, 15.0])?, branin),
        "michalewicz2" | "michalewicz" => {
            let mut f = BenchmarkFn::new("michalewicz2", Bounds::new(vec![0.0; 2], vec![PI; 2])?, michalewicz);
            f.note = format!("d=2, steepness m={MICHALEWICZ_STEEPNESS}");
            f
        }
        "hartmann3" => BenchmarkFn::new("hartmann3", Bounds::unit(3), hartmann3),
        "forrester" => BenchmarkFn::new("forrester", Bounds::unit(1), forrester),
        "goldstein" | "goldstein_price" => {
            BenchmarkFn::new("goldstein", Bounds::new(vec![-2.0; 2], vec![2.0; 2])?, goldstein_price)
        }
        "phosphorus-proxy" | "phosphorus_proxy" => {
            let mut f = gp_field(PHOSPHORUS_LENGTHSCALE, PHOSPHORUS_SEED)?;
            f.name = "phosphorus-proxy".into();
            f.note = format!(
                "synthetic stand-in field: gp_sample(l={PHOSPHORUS_LENGTHSCALE},seed={PHOSPHORUS_SEED}), noise variance {PHOSPHORUS_NOISE_VARIANCE}"
            );
            f.noise_hint = Some(PHOSPHORUS_NOISE_VARIANCE);
            f
        }
        other => match parse_gp_sample(other) {
            Some((l, seed)) => gp_field(l, seed)?,
            None => return Err(Error::UnknownBenchmark(name.to_string())),
        },
    };
    if fun.note.is_empty() {
        fun.note = "standard domain".into();
    }
    Ok(fun)
}

fn build(name: &str, negate: bool) -> Result<BenchmarkFn> {
    let raw = raw_benchmark(name)?;
    let base = if negate { raw.negated() } else { raw };
    let mut fun = normalize(&base, &probe_grid(base.bounds()))?;
    if negate {
        fun.name = format!("-{}", fun.name);
    }
    Ok(fun)
}

/// Named benchmark, optionally negated, normalized on its probe lattice.
/// Instances are cached per process, so the ground-truth maximum is located
/// at most once per benchmark.
pub fn make_benchmark(name: &str, negate: bool) -> Result<BenchmarkFn> {
    static CACHE: OnceLock<Mutex<HashMap<(String, bool), BenchmarkFn>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (name.trim().to_ascii_lowercase().replace(' ', ""), negate);
    if let Some(hit) = cache.lock().expect("benchmark cache poisoned").get(&key) {
        return Ok(hit.clone());
    }
    let fun = build(name, negate)?;
    Ok(cache.lock().expect("benchmark cache poisoned").entry(key).or_insert(fun).clone())
}

/// Registry entry for listing.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkInfo {
    pub name: &'static str,
    pub dim: usize,
    pub domain: &'static str,
    pub note: &'static str,
}

pub fn registry() -> Vec<BenchmarkInfo> {
    vec![
        BenchmarkInfo { name: "branin", dim: 2, domain: "[-5,10] x [0,15]", note: "minimum 0.397887" },
        BenchmarkInfo {
            name: "michalewicz2",
            dim: 2,
            domain: "[0,pi]^2",
            note: "steepness m=10, minimum -1.8013",
        },
        BenchmarkInfo { name: "hartmann3", dim: 3, domain: "[0,1]^3", note: "minimum -3.86278" },
        BenchmarkInfo { name: "forrester", dim: 1, domain: "[0,1]", note: "minimum -6.02074" },
        BenchmarkInfo { name: "goldstein", dim: 2, domain: "[-2,2]^2", note: "Goldstein-Price, minimum 3" },
        BenchmarkInfo {
            name: "gp_sample(l=<lengthscale>,seed=<seed>)",
            dim: 2,
            domain: "[0,1]^2",
            note: "unit-variance squared-exponential GP draw, 1024 random Fourier features",
        },
        BenchmarkInfo {
            name: "phosphorus-proxy",
            dim: 2,
            domain: "[0,1]^2",
            note: "fixed GP draw (l=0.25, seed=2024) used as a field-survey stand-in; noise variance 0.025",
        },
    ]
}
