//! Information-theoretic active learning over Gaussian-process surrogates.
//!
//! The crate covers level set estimation with a known threshold (BES),
//! Bayesian optimization through sampled maximum values (BES-MP), and
//! implicit level set estimation relative to the unknown maximum (BES^2-MP),
//! together with the usual baselines (EM, straddle, UCB, EI, MES), the
//! evaluation metrics and a seeded experiment runner.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod benchmarks;
pub mod domain;
pub mod error;
pub mod gp;
pub mod metrics;
pub mod normal;
pub mod optimize;
pub mod quadrature;
pub mod runner;
pub mod sampling;

pub use acquisition::{AcquisitionSpec, Criterion, Label};
pub use benchmarks::{make_benchmark, BenchmarkFn};
pub use domain::Bounds;
pub use error::{Error, Result};
pub use gp::{fit_mle, Dataset, GpPosterior, HyperBounds, KernelParams, MleConfig, PosteriorMoments};
pub use metrics::EvalGrid;
pub use optimize::{maximize_acquisition, OptimizerConfig};
pub use runner::{run_experiment, summarize, ExperimentConfig, IterationRecord, Problem};
pub use sampling::{RffSample, ThresholdKind, ThresholdSet};
