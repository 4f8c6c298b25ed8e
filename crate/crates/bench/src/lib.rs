//! Deterministic fixtures shared by the benchmarks.

use bes_core::{Dataset, GpPosterior, KernelParams};

/// Golden-ratio (Kronecker) point `i` in the unit cube.
pub fn kronecker_point(i: usize, dim: usize) -> Vec<f64> {
    const ALPHAS: [f64; 3] = [0.618_033_988_749_894_9, 0.754_877_666_246_692_7, 0.569_840_290_998_053_3];
    (0..dim).map(|k| ((i + 1) as f64 * ALPHAS[k % ALPHAS.len()]).fract()).collect()
}

/// Surrogate conditioned on `n` well-spread observations of a smooth
/// function.
pub fn fixture_gp(dim: usize, n: usize) -> GpPosterior {
    let inputs: Vec<Vec<f64>> = (0..n).map(|i| kronecker_point(i, dim)).collect();
    let observations = inputs.iter().map(|x| x.iter().map(|v| (4.0 * v).sin()).sum()).collect();
    let params = KernelParams::isotropic(dim, 0.25, 1.0, 1e-3).expect("fixed parameters are valid");
    GpPosterior::new(params, Dataset::new(inputs, observations).expect("consistent data")).expect("fixture fits")
}
