//! Experiment orchestration: configuration, the sequential query loop,
//! seeding, persistence and summaries.
//!
//! A repetition draws its prior observations, fits the surrogate and then, on
//! every iteration, maximizes the criterion under the current surrogate and
//! threshold samples, observes the benchmark, refits, redraws the threshold
//! samples and records the problem's metric.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{AcquisitionSpec, Criterion, DEFAULT_BETA, DEFAULT_QUADRATURE_NODES};
use crate::benchmarks::{make_benchmark, observe, BenchmarkFn};
use crate::error::{Error, Result};
use crate::gp::{fit_mle, Dataset, GpPosterior, HyperBounds, KernelParams, MleConfig};
use crate::metrics::{implicit_log_loss, lse_log_loss, simple_regret, EvalGrid, DEFAULT_GRID_SIZE};
use crate::optimize::{maximize_acquisition, OptimizerConfig};
use crate::sampling::{
    sample_max_values, shift_thresholds, stack_thresholds, InnerOptConfig, ThresholdSet, DEFAULT_FEATURES,
    DEFAULT_MAX_VALUE_SAMPLES,
};

/// Environment variable naming the output directory.
pub const RESULTS_DIR_ENV: &str = "BES_RESULTS_DIR";
pub const DEFAULT_RESULTS_DIR: &str = "./results";
pub const DEFAULT_ALPHA: f64 = 0.2;
/// Initial lengthscale, as a fraction of each domain width, used before the
/// first fit.
const DEFAULT_LENGTHSCALE_FRACTION: f64 = 0.2;

/// What the experiment estimates, which decides the metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Problem {
    /// Superlevel set at a known threshold; metric is the log loss.
    Lse { threshold: f64 },
    /// Maximization; metric is simple regret.
    Bo,
    /// Superlevel set at `max f - alpha`; metric is the marginalized log loss.
    ImplicitLse { alpha: f64 },
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Lse { .. } => "lse",
            Problem::Bo => "bo",
            Problem::ImplicitLse { .. } => "implicit_lse",
        }
    }

    pub fn supports(&self, criterion: Criterion) -> bool {
        use Criterion::*;
        match self {
            Problem::Lse { .. } => matches!(criterion, Bes | Em | Straddle),
            Problem::Bo => matches!(criterion, BesMp | Ucb | Ei | Mes),
            Problem::ImplicitLse { .. } => matches!(criterion, BesMpImplicit | Bes2Mp | BesMp),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that determines an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub benchmark: String,
    pub negate: bool,
    pub noise_variance: f64,
    pub criterion: Criterion,
    pub beta: f64,
    pub quadrature_nodes: usize,
    pub iterations: usize,
    pub prior_observations: usize,
    pub repetitions: usize,
    pub refit_every: usize,
    pub master_seed: u64,
    pub max_value_samples: usize,
    pub rff_features: usize,
    pub inner: InnerOptConfig,
    pub optimizer: OptimizerConfig,
    pub mle_restarts: usize,
    pub mle_iters: usize,
    pub fit_noise: bool,
    pub grid_size: usize,
}

impl ExperimentConfig {
    pub fn new(problem: Problem, benchmark: impl Into<String>, criterion: Criterion) -> Self {
        ExperimentConfig {
            problem,
            benchmark: benchmark.into(),
            negate: false,
            noise_variance: 0.0001,
            criterion,
            beta: DEFAULT_BETA,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            iterations: 30,
            prior_observations: 2,
            repetitions: 1,
            refit_every: 1,
            master_seed: 0,
            max_value_samples: DEFAULT_MAX_VALUE_SAMPLES,
            rff_features: DEFAULT_FEATURES,
            inner: InnerOptConfig::default(),
            optimizer: OptimizerConfig::default(),
            mle_restarts: 10,
            mle_iters: 200,
            fit_noise: false,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.refit_every == 0 {
            return bad("refit_every must be at least 1");
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return bad("noise_variance must be finite and non-negative");
        }
        if self.criterion == Criterion::BesK {
            return bad("besk takes an explicit threshold vector and is not available in the runner");
        }
        if !self.problem.supports(self.criterion) {
            return Err(Error::Config(format!(
                "criterion {} is not valid for problem {}",
                self.criterion, self.problem
            )));
        }
        match self.problem {
            Problem::Lse { threshold } if !threshold.is_finite() => return bad("threshold must be finite"),
            Problem::ImplicitLse { alpha } if !(alpha > 0.0) || !alpha.is_finite() => {
                return bad("alpha must be finite and positive")
            }
            _ => {}
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if self.quadrature_nodes == 0 || self.max_value_samples == 0 || self.rff_features == 0 {
            return bad("quadrature_nodes, max_value_samples and rff_features must be at least 1");
        }
        if self.inner.n_starts == 0 || self.inner.ascent_steps == 0 || self.mle_restarts == 0 || self.grid_size == 0 {
            return bad("inner_starts, inner_steps, mle_restarts and grid_size must be at least 1");
        }
        self.optimizer.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Canonical key-value form; parsing it yields the same config.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("problem", self.problem.name().into());
        match self.problem {
            Problem::Lse { threshold } => put("threshold", threshold.to_string()),
            Problem::ImplicitLse { alpha } => put("alpha", alpha.to_string()),
            Problem::Bo => {}
        }
        put("benchmark", self.benchmark.clone());
        put("negate", self.negate.to_string());
        put("noise_variance", self.noise_variance.to_string());
        put("criterion", self.criterion.name().into());
        put("beta", self.beta.to_string());
        put("quadrature_nodes", self.quadrature_nodes.to_string());
        put("iterations", self.iterations.to_string());
        put("prior_observations", self.prior_observations.to_string());
        put("repetitions", self.repetitions.to_string());
        put("refit_every", self.refit_every.to_string());
        put("master_seed", self.master_seed.to_string());
        put("max_value_samples", self.max_value_samples.to_string());
        put("rff_features", self.rff_features.to_string());
        put("inner_starts", self.inner.n_starts.to_string());
        put("inner_steps", self.inner.ascent_steps.to_string());
        put("candidates", self.optimizer.n_random_candidates.to_string());
        put("ascent_starts", self.optimizer.n_ascent_starts.to_string());
        put("ascent_steps", self.optimizer.ascent_steps.to_string());
        put("step_size", self.optimizer.step_size.to_string());
        put("mle_restarts", self.mle_restarts.to_string());
        put("mle_iters", self.mle_iters.to_string());
        put("fit_noise", self.fit_noise.to_string());
        put("grid_size", self.grid_size.to_string());
        out
    }

    /// Parses the flat `key = value` format. Blank lines and `#` comments are
    /// ignored; unknown or repeated keys are errors. `problem`, `benchmark`
    /// and `criterion` are required; everything else has a default.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let mut take = |k: &str| entries.remove(k);
        let required = |v: Option<String>, k: &str| v.ok_or_else(|| Error::Config(format!("missing key `{k}`")));

        let problem_name = required(take("problem"), "problem")?;
        let threshold = take("threshold").map(|v| parse_value::<f64>("threshold", &v)).transpose()?;
        let alpha = take("alpha").map(|v| parse_value::<f64>("alpha", &v)).transpose()?;
        let problem = match problem_name.as_str() {
            "lse" => {
                if alpha.is_some() {
                    return Err(Error::Config("`alpha` does not apply to problem lse".into()));
                }
                Problem::Lse { threshold: threshold.unwrap_or(0.0) }
            }
            "bo" => {
                if threshold.is_some() || alpha.is_some() {
                    return Err(Error::Config("`threshold` and `alpha` do not apply to problem bo".into()));
                }
                Problem::Bo
            }
            "implicit_lse" => {
                if threshold.is_some() {
                    return Err(Error::Config("`threshold` does not apply to problem implicit_lse".into()));
                }
                Problem::ImplicitLse { alpha: alpha.unwrap_or(DEFAULT_ALPHA) }
            }
            other => return Err(Error::Config(format!("unknown problem `{other}`"))),
        };
        let benchmark = required(take("benchmark"), "benchmark")?;
        let criterion: Criterion =
            required(take("criterion"), "criterion")?.parse().map_err(|e: Error| Error::Config(e.to_string()))?;

        let mut cfg = ExperimentConfig::new(problem, benchmark, criterion);
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = take($key) {
                    $field = parse_value($key, &v)?;
                }
            };
        }
        set!("negate", cfg.negate);
        set!("noise_variance", cfg.noise_variance);
        set!("beta", cfg.beta);
        set!("quadrature_nodes", cfg.quadrature_nodes);
        set!("iterations", cfg.iterations);
        set!("prior_observations", cfg.prior_observations);
        set!("repetitions", cfg.repetitions);
        set!("refit_every", cfg.refit_every);
        set!("master_seed", cfg.master_seed);
        set!("max_value_samples", cfg.max_value_samples);
        set!("rff_features", cfg.rff_features);
        set!("inner_starts", cfg.inner.n_starts);
        set!("inner_steps", cfg.inner.ascent_steps);
        set!("candidates", cfg.optimizer.n_random_candidates);
        set!("ascent_starts", cfg.optimizer.n_ascent_starts);
        set!("ascent_steps", cfg.optimizer.ascent_steps);
        set!("step_size", cfg.optimizer.step_size);
        set!("mle_restarts", cfg.mle_restarts);
        set!("mle_iters", cfg.mle_iters);
        set!("fit_noise", cfg.fit_noise);
        set!("grid_size", cfg.grid_size);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_kv().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

const KNOWN_KEYS: &[&str] = &[
    "problem",
    "threshold",
    "alpha",
    "benchmark",
    "negate",
    "noise_variance",
    "criterion",
    "beta",
    "quadrature_nodes",
    "iterations",
    "prior_observations",
    "repetitions",
    "refit_every",
    "master_seed",
    "max_value_samples",
    "rff_features",
    "inner_starts",
    "inner_steps",
    "candidates",
    "ascent_starts",
    "ascent_steps",
    "step_size",
    "mle_restarts",
    "mle_iters",
    "fit_noise",
    "grid_size",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub repetition: usize,
    /// 1-based.
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub acquisition_value: f64,
    /// Log loss or simple regret, depending on the problem.
    pub metric: f64,
    pub elapsed_s: f64,
}

/// Independent random streams of one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    Design = 0,
    Noise = 1,
    Grid = 2,
    Optimizer = 3,
    Thresholds = 4,
    Mle = 5,
}

fn stream(master_seed: u64, repetition: usize, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(repetition as u64 * 8 + purpose as u64);
    rng
}

/// State of one repetition between iterations.
pub struct Session<'a> {
    cfg: &'a ExperimentConfig,
    benchmark: BenchmarkFn,
    repetition: usize,
    iteration: usize,
    data: Dataset,
    gp: GpPosterior,
    fstar: Option<ThresholdSet>,
    grid: Option<EvalGrid>,
    noise_rng: ChaCha8Rng,
    optimizer_rng: ChaCha8Rng,
    threshold_rng: ChaCha8Rng,
    mle_rng: ChaCha8Rng,
}

impl<'a> Session<'a> {
    /// Draws the prior observations, fits the surrogate and, if needed, the
    /// first threshold samples.
    pub fn start(cfg: &'a ExperimentConfig, benchmark: BenchmarkFn, repetition: usize) -> Result<Self> {
        let seed = cfg.master_seed;
        let mut design_rng = stream(seed, repetition, Stream::Design);
        let mut noise_rng = stream(seed, repetition, Stream::Noise);
        let mut data = Dataset::empty();
        for _ in 0..cfg.prior_observations {
            let x = benchmark.bounds().sample(&mut design_rng);
            let y = observe(&benchmark, &x, cfg.noise_variance, &mut noise_rng);
            data.push(x, y);
        }
        let grid = match cfg.problem {
            Problem::Bo => None,
            _ => Some(EvalGrid::uniform(&benchmark, cfg.grid_size, stream(seed, repetition, Stream::Grid).next_u64())),
        };
        let widths: Vec<f64> = (0..benchmark.dim()).map(|i| benchmark.bounds().width(i)).collect();
        let initial = KernelParams::new(
            widths.iter().map(|w| DEFAULT_LENGTHSCALE_FRACTION * w).collect(),
            1.0,
            cfg.noise_variance,
        )?;
        let gp = GpPosterior::new(initial, data.clone())?;
        let mut session = Session {
            cfg,
            benchmark,
            repetition,
            iteration: 0,
            data,
            gp,
            fstar: None,
            grid,
            noise_rng,
            optimizer_rng: stream(seed, repetition, Stream::Optimizer),
            threshold_rng: stream(seed, repetition, Stream::Thresholds),
            mle_rng: stream(seed, repetition, Stream::Mle),
        };
        session.refit(true)?;
        session.refresh_thresholds()?;
        Ok(session)
    }

    pub fn gp(&self) -> &GpPosterior {
        &self.gp
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn benchmark(&self) -> &BenchmarkFn {
        &self.benchmark
    }

    pub fn max_value_samples(&self) -> Option<&ThresholdSet> {
        self.fstar.as_ref()
    }

    fn needs_thresholds(&self) -> bool {
        self.cfg.criterion.threshold_kind().is_some() || matches!(self.cfg.problem, Problem::ImplicitLse { .. })
    }

    fn refit(&mut self, fit: bool) -> Result<()> {
        if !fit || self.data.len() < 2 {
            self.gp = GpPosterior::new(self.gp.params().clone(), self.data.clone())?;
            return Ok(());
        }
        let widths: Vec<f64> = (0..self.benchmark.dim()).map(|i| self.benchmark.bounds().width(i)).collect();
        let mut mle = MleConfig::new(HyperBounds::for_domain(&widths), self.cfg.noise_variance);
        mle.restarts = self.cfg.mle_restarts;
        mle.max_iters = self.cfg.mle_iters;
        mle.fit_noise = self.cfg.fit_noise;
        mle.initial = Some(self.gp.params().clone());
        if !mle.fit_noise {
            if let Some(p) = mle.initial.as_mut() {
                p.noise_variance = self.cfg.noise_variance;
            }
        }
        let fit = fit_mle(&self.data, &mle, &mut self.mle_rng)?;
        self.gp = GpPosterior::new(fit.params, self.data.clone())?;
        Ok(())
    }

    fn refresh_thresholds(&mut self) -> Result<()> {
        if self.needs_thresholds() {
            self.fstar = Some(sample_max_values(
                &self.gp,
                self.benchmark.bounds(),
                self.cfg.max_value_samples,
                self.cfg.rff_features,
                &mut self.threshold_rng,
                &self.cfg.inner,
            )?);
        }
        Ok(())
    }

    /// Criterion for the current surrogate and threshold samples.
    pub fn acquisition(&self) -> Result<AcquisitionSpec> {
        let cfg = self.cfg;
        let mut spec = AcquisitionSpec::new(cfg.criterion);
        spec.quadrature_nodes = cfg.quadrature_nodes;
        let fstar = || self.fstar.clone().ok_or_else(|| Error::InvalidArgument("threshold samples missing".into()));
        let alpha = match cfg.problem {
            Problem::ImplicitLse { alpha } => alpha,
            _ => DEFAULT_ALPHA,
        };
        match cfg.criterion {
            Criterion::Bes | Criterion::Em | Criterion::Straddle => {
                if let Problem::Lse { threshold } = cfg.problem {
                    spec = spec.with_threshold(threshold);
                }
            }
            Criterion::BesMp | Criterion::Mes => spec = spec.with_thresholds(fstar()?),
            Criterion::BesMpImplicit => spec = spec.with_thresholds(shift_thresholds(&fstar()?, alpha)?).with_alpha(alpha),
            Criterion::Bes2Mp => spec = spec.with_thresholds(stack_thresholds(&fstar()?, alpha)?).with_alpha(alpha),
            Criterion::Ucb => spec = spec.with_beta(cfg.beta),
            Criterion::Ei => {
                let best = self.data.observations().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                spec = spec.with_incumbent(if best.is_finite() { best } else { 0.0 });
            }
            Criterion::BesK => {
                return Err(Error::Config("besk is not available in the runner".into()));
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    fn metric(&self) -> Result<f64> {
        match self.cfg.problem {
            Problem::Lse { threshold } => {
                Ok(lse_log_loss(&self.gp, self.grid.as_ref().expect("lse runs carry a grid"), threshold))
            }
            Problem::Bo => Ok(simple_regret(&self.benchmark, &self.data).unwrap_or(f64::NAN)),
            Problem::ImplicitLse { alpha } => implicit_log_loss(
                &self.gp,
                self.grid.as_ref().expect("implicit runs carry a grid"),
                self.fstar.as_ref().expect("implicit runs carry threshold samples"),
                alpha,
                self.benchmark.known_max(),
            ),
        }
    }

    /// Runs one query-observe-update iteration.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let started = Instant::now();
        let spec = self.acquisition()?;
        let gp = &self.gp;
        let criterion = |x: &[f64]| spec.evaluate(&gp.posterior(x)).unwrap_or(f64::NAN);
        let optimizer = OptimizerConfig { seed: self.optimizer_rng.next_u64(), ..self.cfg.optimizer.clone() };
        let (x, acquisition_value) = maximize_acquisition(criterion, self.benchmark.bounds(), &optimizer)?;
        let y = observe(&self.benchmark, &x, self.cfg.noise_variance, &mut self.noise_rng);
        self.data.push(x.clone(), y);
        self.iteration += 1;
        self.refit(self.iteration.is_multiple_of(self.cfg.refit_every))?;
        self.refresh_thresholds()?;
        let metric = self.metric()?;
        Ok(IterationRecord {
            repetition: self.repetition,
            iteration: self.iteration,
            x,
            y,
            acquisition_value,
            metric,
            elapsed_s: started.elapsed().as_secs_f64(),
        })
    }
}

/// Benchmark instance named by the config.
pub fn load_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkFn> {
    make_benchmark(&cfg.benchmark, cfg.negate)
}

/// All iterations of one repetition.
pub fn run_repetition(cfg: &ExperimentConfig, benchmark: &BenchmarkFn, repetition: usize) -> Result<Vec<IterationRecord>> {
    let mut session = Session::start(cfg, benchmark.clone(), repetition)?;
    (0..cfg.iterations).map(|_| session.step()).collect()
}

/// Runs every repetition (in parallel) and returns records ordered by
/// repetition then iteration. A repetition that fails is logged and left out.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<IterationRecord>> {
    cfg.validate()?;
    let benchmark = load_benchmark(cfg)?;
    if !matches!(cfg.problem, Problem::Lse { .. }) {
        // Located once up front instead of racing inside the workers.
        benchmark.maximum();
    }
    let runs: Vec<Result<Vec<IterationRecord>>> =
        (0..cfg.repetitions).into_par_iter().map(|rep| run_repetition(cfg, &benchmark, rep)).collect();
    let mut records = Vec::with_capacity(cfg.repetitions * cfg.iterations);
    for (rep, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => records.extend(r),
            Err(e) => log::warn!("repetition {rep} aborted: {e}"),
        }
    }
    Ok(records)
}

/// Per-iteration statistics across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub iteration: usize,
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repetition.
    pub sd: f64,
    /// `log10(mean)`.
    pub log10_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub iterations: Vec<SummaryRow>,
}

impl Summary {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Mean, sample SD and `log10` of the mean of the metric at every iteration.
/// Non-finite metric values are left out.
pub fn summarize(records: &[IterationRecord]) -> Summary {
    let mut by_iteration: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        let slot = by_iteration.entry(r.iteration).or_default();
        if r.metric.is_finite() {
            slot.push(r.metric);
        }
    }
    let iterations = by_iteration
        .into_iter()
        .map(|(iteration, values)| {
            let count = values.len();
            let mean = if count == 0 { f64::NAN } else { values.iter().sum::<f64>() / count as f64 };
            let sd = if count < 2 {
                0.0
            } else {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            };
            SummaryRow { iteration, count, mean, sd, log10_mean: mean.log10() }
        })
        .collect();
    Summary { iterations }
}

/// Output directory from `BES_RESULTS_DIR`, else `./results`.
pub fn results_dir() -> PathBuf {
    std::env::var_os(RESULTS_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_RESULTS_DIR))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes records with the header
/// `repetition,iteration,x0..x{d-1},y,acquisition_value,metric,elapsed_s`.
pub fn write_records_csv(path: &Path, records: &[IterationRecord], dim: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header = vec!["repetition".to_string(), "iteration".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend(["y", "acquisition_value", "metric", "elapsed_s"].map(String::from));
    w.write_record(&header).map_err(csv_error)?;
    for r in records {
        if r.x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: r.x.len() });
        }
        let mut row = vec![r.repetition.to_string(), r.iteration.to_string()];
        row.extend(r.x.iter().map(f64::to_string));
        row.extend([r.y, r.acquisition_value, r.metric, r.elapsed_s].map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let header = reader.headers().map_err(csv_error)?.clone();
    let expected_tail = ["y", "acquisition_value", "metric", "elapsed_s"];
    let n = header.len();
    if n < 6
        || &header[0] != "repetition"
        || &header[1] != "iteration"
        || header.iter().skip(n - 4).ne(expected_tail.iter().copied())
    {
        return Err(Error::Io(format!("{}: unexpected record header", path.display())));
    }
    let dim = n - 6;
    let field = |row: &csv::StringRecord, i: usize| -> Result<f64> {
        row[i].trim().parse::<f64>().map_err(|_| Error::Io(format!("bad number `{}`", &row[i])))
    };
    let index = |row: &csv::StringRecord, i: usize| -> Result<usize> {
        row[i].trim().parse::<usize>().map_err(|_| Error::Io(format!("bad index `{}`", &row[i])))
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        out.push(IterationRecord {
            repetition: index(&row, 0)?,
            iteration: index(&row, 1)?,
            x: (0..dim).map(|i| field(&row, 2 + i)).collect::<Result<_>>()?,
            y: field(&row, 2 + dim)?,
            acquisition_value: field(&row, 3 + dim)?,
            metric: field(&row, 4 + dim)?,
            elapsed_s: field(&row, 5 + dim)?,
        });
    }
    Ok(out)
}

pub fn write_summary_json(path: &Path, summary: &Summary) -> Result<()> {
    fs::write(path, summary.to_json()?)?;
    Ok(())
}

/// Paths of a persisted experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub config: PathBuf,
    pub records: PathBuf,
    pub summary: PathBuf,
}

/// Writes `<hash>.cfg`, `<hash>.csv` and `<hash>.summary.json` under `dir`.
pub fn persist(cfg: &ExperimentConfig, records: &[IterationRecord], dim: usize, dir: &Path) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let hash = cfg.hash();
    let files = OutputFiles {
        config: dir.join(format!("{hash}.cfg")),
        records: dir.join(format!("{hash}.csv")),
        summary: dir.join(format!("{hash}.summary.json")),
    };
    fs::write(&files.config, cfg.to_kv())?;
    write_records_csv(&files.records, records, dim)?;
    write_summary_json(&files.summary, &summarize(records))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(rep: usize, it: usize, metric: f64) -> IterationRecord {
        IterationRecord {
            repetition: rep,
            iteration: it,
            x: vec![0.5, 0.25],
            y: 1.0,
            acquisition_value: 0.3,
            metric,
            elapsed_s: 0.01,
        }
    }

    #[test]
    fn parse_round_trip() {
        let text = "problem = lse\nthreshold = 0.5 # comment\nbenchmark = branin\ncriterion = bes\n\niterations = 5\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.problem, Problem::Lse { threshold: 0.5 });
        assert_eq!(cfg.iterations, 5);
        assert_eq!(ExperimentConfig::parse(&cfg.to_kv()).unwrap(), cfg);
        assert_eq!(ExperimentConfig::parse(&cfg.to_kv()).unwrap().hash(), cfg.hash());
    }

    #[test]
    fn parse_rejects_bad_input() {
        let base = "problem = bo\nbenchmark = branin\ncriterion = ei\n";
        assert!(ExperimentConfig::parse(base).is_ok());
        assert!(ExperimentConfig::parse(&format!("{base}colour = red\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{base}iterations = 3\niterations = 4\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{base}iterations = 0\n")).is_err());
        assert!(ExperimentConfig::parse(&format!("{base}threshold = 1\n")).is_err());
        assert!(ExperimentConfig::parse("problem = bo\nbenchmark = branin\ncriterion = bes\n").is_err());
        assert!(ExperimentConfig::parse("problem = implicit_lse\nbenchmark = branin\ncriterion = besk\n").is_err());
        assert!(ExperimentConfig::parse("benchmark = branin\ncriterion = ei\n").is_err());
        assert!(ExperimentConfig::parse("problem = bo\nbenchmark branin\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::new(Problem::Bo, "branin", Criterion::Ei);
        let mut b = a.clone();
        b.master_seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn summary_statistics() {
        let one = summarize(&[record(0, 1, 0.01), record(0, 2, 0.02)]);
        assert_eq!(one.iterations[0].sd, 0.0);
        assert!((one.iterations[0].log10_mean + 2.0).abs() < 1e-12);
        let two = summarize(&[record(0, 1, 1.0), record(1, 1, 3.0)]);
        assert_eq!(two.iterations[0].mean, 2.0);
        assert!((two.iterations[0].sd - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records = vec![record(0, 1, 0.125), record(0, 2, f64::NAN), record(1, 1, 1e-300)];
        write_records_csv(&path, &records, 2).unwrap();
        let back = read_records_csv(&path).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0], records[0]);
        assert!(back[1].metric.is_nan());
        assert_eq!(back[2].metric, 1e-300);
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("repetition,iteration,x0,x1,y,acquisition_value,metric,elapsed_s\n"));
    }
}
