//! Independent reference implementations shared by the integration tests.
//!
//! None of these go through the library's Cholesky path or its
//! quadrature scheme; they rely only on the standard normal CDF.

#![allow(dead_code)]

use bes_core::gp::{kernel, Dataset, GpPosterior, KernelParams};
use bes_core::normal::cdf;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Posterior mean and variance by a dense LU solve of
/// `(K + (noise + jitter) I) a = b`.
pub fn naive_posterior(params: &KernelParams, data: &Dataset, x: &[f64], jitter: f64) -> (f64, f64) {
    let n = data.len();
    let prior = kernel(x, x, params).unwrap();
    if n == 0 {
        return (0.0, prior);
    }
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel(&data.inputs()[i], &data.inputs()[j], params).unwrap() + if i == j { params.noise_variance + jitter } else { 0.0 }
    });
    let kx = DVector::from_fn(n, |i, _| kernel(x, &data.inputs()[i], params).unwrap());
    let y = DVector::from_column_slice(data.observations());
    let lu = k.lu();
    let alpha = lu.solve(&y).unwrap();
    let v = lu.solve(&kx).unwrap();
    (kx.dot(&alpha), prior - kx.dot(&v))
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on [a, b].
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (z, w) in nodes.iter().zip(&weights) {
            out.push((lo + 0.5 * h * (z + 1.0), 0.5 * h * w));
        }
    }
    out
}

fn gaussian(v: f64, mean: f64, sd: f64) -> f64 {
    let z = (v - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Brute-force mutual information between `y = f + e` and the discrete
/// variable `(class, s)`, where `s` is uniform over `sets` and `class` is the
/// interval of `f` among the ascending thresholds `sets[s]`.
///
/// Both the observation and the latent value are integrated numerically on a
/// 2-D Gauss–Legendre product rule; no closed-form posterior is used.
pub fn joint_mi_oracle(mean: f64, var: f64, noise: f64, sets: &[Vec<f64>]) -> f64 {
    let sx = var.sqrt();
    let sn = noise.sqrt();
    let sp = (var + noise).sqrt();
    let post_sd = (var * noise / (var + noise)).sqrt();
    let y_rule = composite_rule(mean - 12.0 * sp, mean + 12.0 * sp, 600, 8);
    let weight_s = 1.0 / sets.len() as f64;
    let classes: usize = sets.iter().map(|b| b.len() + 1).sum();
    let mut joint = vec![vec![0.0; classes]; y_rule.len()];
    for (row, &(y, _)) in joint.iter_mut().zip(&y_rule) {
        // Integration window around where f | y lives; the integrand itself
        // is the unconditioned product p(f) p(y | f).
        let centre = (var * y + noise * mean) / (var + noise);
        let lo = centre - 14.0 * post_sd;
        let hi = centre + 14.0 * post_sd;
        let mut col = 0;
        for b in sets {
            let mut edges = vec![lo];
            edges.extend(b.iter().copied().filter(|t| *t > lo && *t < hi));
            edges.push(hi);
            // Class index of each sub-interval.
            for w in edges.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let class = b.iter().filter(|t| **t <= mid).count();
                let mass: f64 = composite_rule(w[0], w[1], 20, 10)
                    .iter()
                    .map(|&(f, wf)| wf * gaussian(f, mean, sx) * gaussian(y, f, sn))
                    .sum();
                row[col + class] += weight_s * mass;
            }
            col += b.len() + 1;
        }
    }
    let mut marginal_z = vec![0.0; classes];
    for (row, &(_, wy)) in joint.iter().zip(&y_rule) {
        for (m, p) in marginal_z.iter_mut().zip(row) {
            *m += wy * p;
        }
    }
    let mut mi = 0.0;
    for (row, &(_, wy)) in joint.iter().zip(&y_rule) {
        let py: f64 = row.iter().sum();
        for (p, pz) in row.iter().zip(&marginal_z) {
            if *p > 0.0 && *pz > 0.0 && py > 0.0 {
                mi += wy * p * (p / (py * pz)).ln();
            }
        }
    }
    mi
}

/// Interval probabilities of N(mean, sd^2) cut at ascending `b`.
pub fn interval_probs(mean: f64, sd: f64, b: &[f64]) -> Vec<f64> {
    let mut cdfs: Vec<f64> = vec![0.0];
    cdfs.extend(b.iter().map(|t| cdf((t - mean) / sd)));
    cdfs.push(1.0);
    cdfs.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect()
}

/// Plain Monte-Carlo estimate of `E_y[KL(p(class | y) || p(class))]` with
/// its standard error.
pub fn mc_information<R: Rng>(mean: f64, var: f64, noise: f64, b: &[f64], draws: usize, rng: &mut R) -> (f64, f64) {
    let prior = interval_probs(mean, var.sqrt(), b);
    let sp = (var + noise).sqrt();
    let post_sd = (var * noise / (var + noise)).sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let e: f64 = StandardNormal.sample(rng);
        let y = mean + sp * e;
        let post_mean = (var * y + noise * mean) / (var + noise);
        let post = interval_probs(post_mean, post_sd, b);
        let term: f64 = post
            .iter()
            .zip(&prior)
            .filter(|(p, q)| **p > 0.0 && **q > 0.0)
            .map(|(p, q)| p * (p / q).ln())
            .sum();
        sum += term;
        sum_sq += term * term;
    }
    let n = draws as f64;
    let m = sum / n;
    let var_hat = (sum_sq / n - m * m).max(0.0) * n / (n - 1.0);
    (m, (var_hat / n).sqrt())
}

/// A GP on the unit box conditioned on `n` random observations of a smooth
/// function.
pub fn random_gp<R: Rng>(dim: usize, n: usize, noise: f64, rng: &mut R) -> GpPosterior {
    let lengthscales: Vec<f64> = (0..dim).map(|_| rng.random_range(0.15..0.6)).collect();
    let signal = rng.random_range(0.5..2.0);
    let params = KernelParams::new(lengthscales, signal, noise).unwrap();
    let mut data = Dataset::empty();
    for _ in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
        let y = x.iter().enumerate().map(|(i, v)| ((i + 2) as f64 * v).sin()).sum::<f64>() + 0.1 * rng.random_range(-1.0..1.0);
        data.push(x, y);
    }
    GpPosterior::new(params, data).unwrap()
}
