//! Property tests for invariants that must hold on every input.

use bes_core::acquisition::{
    bes_at, bes_k_at, bes_mp_at, bes2_mp_at, class_prob, class_prob_given_y, em_at, ei_at, mes_at, straddle_at,
};
use bes_core::gp::{gram_matrix, incremental_conditional};
use bes_core::metrics::lse_log_loss;
use bes_core::normal::pdf;
use bes_core::sampling::{draw_posterior_sample, shift_thresholds, stack_thresholds};
use bes_core::{
    maximize_acquisition, Bounds, Dataset, EvalGrid, ExperimentConfig, GpPosterior, KernelParams, Label,
    OptimizerConfig, PosteriorMoments, ThresholdSet,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::LN_2;

fn moments() -> impl Strategy<Value = PosteriorMoments> {
    (-3.0..3.0f64, 0.01..4.0f64, -6.0..0.5f64).prop_map(|(mean, var, log_noise)| {
        PosteriorMoments::new(mean, var, 10f64.powf(log_noise))
    })
}

fn points(dim: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, dim), n)
}

fn gp_2d() -> impl Strategy<Value = GpPosterior> {
    (points(2, 1..15), 0.1..0.8f64, 0.3..3.0f64, -4.0..-0.5f64, any::<u64>()).prop_map(
        |(xs, l, s2, log_noise, seed)| {
            let ys = xs.iter().enumerate().map(|(i, x)| (5.0 * x[0]).sin() + x[1] + 0.01 * ((seed >> (i % 32)) & 7) as f64).collect();
            let params = KernelParams::isotropic(2, l, s2, 10f64.powf(log_noise)).unwrap();
            GpPosterior::new(params, Dataset::new(xs, ys).unwrap()).unwrap()
        },
    )
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn criteria_stay_in_range(m in moments(), t in -4.0..4.0f64, b in prop::collection::vec(-4.0..4.0f64, 1..4)) {
        let v = bes_at(&m, t, 64);
        prop_assert!((0.0..=LN_2).contains(&v));
        prop_assert!(v <= em_at(&m, t) + 1e-12);
        let b = sorted(b);
        let vk = bes_k_at(&m, &b, 64).unwrap();
        prop_assert!(vk >= 0.0 && vk <= ((b.len() + 1) as f64).ln());
        prop_assert!(ei_at(&m, t) >= 0.0);
    }

    #[test]
    fn variance_never_grows_with_more_data(gp in gp_2d(), x in prop::collection::vec(0.0..1.0f64, 2), extra in prop::collection::vec(0.0..1.0f64, 2), y in -2.0..2.0f64) {
        let before = gp.posterior(&x).variance;
        let after = gp.with_observation(extra, y).unwrap().posterior(&x).variance;
        prop_assert!(after <= before + 1e-8);
        prop_assert!(after >= 0.0);
    }

    #[test]
    fn incremental_update_matches_rebuild(gp in gp_2d(), x in prop::collection::vec(0.0..1.0f64, 2), y in -2.0..2.0f64) {
        let fast = incremental_conditional(&gp.posterior(&x), y).unwrap();
        let slow = gp.with_observation(x.clone(), y).unwrap().posterior(&x);
        prop_assert!((fast.mean - slow.mean).abs() < 1e-6);
        prop_assert!((fast.variance - slow.variance).abs() < 1e-6);
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite(xs in points(3, 1..20), l in 0.05..2.0f64, s2 in 0.1..5.0f64) {
        let params = KernelParams::isotropic(3, l, s2, 0.0).unwrap();
        let k = gram_matrix(&xs, &params);
        prop_assert_eq!(k.clone(), k.transpose());
        prop_assert!(k.symmetric_eigenvalues().min() >= -1e-8);
    }

    #[test]
    fn noiseless_posterior_interpolates(n in 1usize..8, ys in prop::collection::vec(-3.0..3.0f64, 8)) {
        let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / 7.0]).collect();
        let params = KernelParams::new(vec![0.1], 1.0, 0.0).unwrap();
        let gp = GpPosterior::new(params, Dataset::new(xs.clone(), ys[..n].to_vec()).unwrap()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let m = gp.posterior(x);
            prop_assert!((m.mean - y).abs() < 1e-6);
            prop_assert!(m.variance < 1e-6);
        }
    }

    #[test]
    fn shifting_moments_and_thresholds_changes_nothing(m in moments(), t in -3.0..3.0f64, c in -10.0..10.0f64, gap in 0.05..2.0f64) {
        let shifted = PosteriorMoments::new(m.mean + c, m.variance, m.noise_variance);
        prop_assert!((bes_at(&m, t, 64) - bes_at(&shifted, t + c, 64)).abs() < 1e-8);
        prop_assert!((em_at(&m, t) - em_at(&shifted, t + c)).abs() < 1e-8);
        prop_assert!((straddle_at(&m, t) - straddle_at(&shifted, t + c)).abs() < 1e-8);
        prop_assert!((ei_at(&m, t) - ei_at(&shifted, t + c)).abs() < 1e-8);
        let b = [t, t + gap];
        let bc = [t + c, t + gap + c];
        prop_assert!((bes_k_at(&m, &b, 64).unwrap() - bes_k_at(&shifted, &bc, 64).unwrap()).abs() < 1e-8);
        let f = ThresholdSet::max_values(vec![t, t + gap]).unwrap();
        let fc = ThresholdSet::max_values(vec![t + c, t + gap + c]).unwrap();
        prop_assert!((mes_at(&m, &f).unwrap() - mes_at(&shifted, &fc).unwrap()).abs() < 1e-8);
        prop_assert!((bes_mp_at(&m, &f, 64).unwrap() - bes_mp_at(&shifted, &fc, 64).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn vanishing_noise_approaches_entropy(mean in -2.0..2.0f64, var in 0.05..3.0f64, t in -3.0..3.0f64) {
        let m = PosteriorMoments::new(mean, var, 1e-10);
        prop_assert!((bes_at(&m, t, 64) - em_at(&m, t)).abs() < 1e-3);
    }

    #[test]
    fn doubling_nodes_is_stable(m in moments(), t in -3.0..3.0f64, gap in 0.01..2.0f64) {
        prop_assert!((bes_at(&m, t, 64) - bes_at(&m, t, 128)).abs() < 1e-6);
        let b = [t, t + gap];
        prop_assert!((bes_k_at(&m, &b, 64).unwrap() - bes_k_at(&m, &b, 128).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn label_mixture_reconstructs_the_marginal(m in moments(), t in -3.0..3.0f64, f in -6.0..6.0f64) {
        let sd = m.std_dev();
        let density = pdf((f - m.mean) / sd) / sd;
        let (below, above) = (class_prob(&m, t, Label::Below), class_prob(&m, t, Label::Above));
        let conditional = |p: f64, inside: bool| if inside && p > 0.0 { density / p } else { 0.0 };
        let mixture = below * conditional(below, f < t) + above * conditional(above, f >= t);
        prop_assert!((mixture - density).abs() < 1e-8);
    }

    #[test]
    fn entropy_ordering_follows_standardized_gap(m1 in moments(), m2 in moments(), t in -3.0..3.0f64) {
        let gap = |m: &PosteriorMoments| ((t - m.mean) / m.std_dev()).abs();
        if gap(&m1) < gap(&m2) {
            prop_assert!(em_at(&m1, t) >= em_at(&m2, t));
        }
    }

    #[test]
    fn label_probabilities_sum_to_one(m in moments(), t in -3.0..3.0f64, y in -5.0..5.0f64) {
        prop_assert!((class_prob(&m, t, Label::Below) + class_prob(&m, t, Label::Above) - 1.0).abs() < 1e-12);
        let given = class_prob_given_y(&m, t, y, Label::Below).unwrap() + class_prob_given_y(&m, t, y, Label::Above).unwrap();
        prop_assert!((given - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_thresholds_collapse(m in moments(), t in -3.0..3.0f64, gap in 0.05..1.0f64, copies in 1usize..5) {
        let same = ThresholdSet::max_values(vec![t; copies]).unwrap();
        prop_assert!((bes_mp_at(&m, &same, 64).unwrap() - bes_at(&m, t, 64)).abs() < 1e-12);
        let stacked = ThresholdSet::stacked(vec![vec![t, t + gap]; copies]).unwrap();
        prop_assert!((bes2_mp_at(&m, &stacked, 64).unwrap() - bes_k_at(&m, &[t, t + gap], 64).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn threshold_transforms(values in prop::collection::vec(-3.0..3.0f64, 1..6), alpha in 0.01..1.0f64) {
        let f = ThresholdSet::max_values(values.clone()).unwrap();
        let unshifted = shift_thresholds(&f, 0.0).unwrap();
        prop_assert_eq!(unshifted.scalars().unwrap(), &values[..]);
        prop_assert!(stack_thresholds(&f, 0.0).is_err());
        let stacked = stack_thresholds(&f, alpha).unwrap();
        for (v, b) in values.iter().zip(stacked.vectors().unwrap()) {
            prop_assert_eq!(b.clone(), vec![v - alpha, *v]);
        }
    }

    #[test]
    fn log_loss_ignores_grid_order(gp in gp_2d(), xs in points(2, 5..40), t in -1.0..1.5f64, seed in any::<u64>()) {
        let truth: Vec<f64> = xs.iter().map(|x| (4.0 * x[0]).cos() + x[1]).collect();
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by_key(|i| (*i as u64).wrapping_mul(seed | 1).rotate_left(17));
        let grid = EvalGrid::from_parts(xs.clone(), truth.clone()).unwrap();
        let permuted = EvalGrid::from_parts(order.iter().map(|&i| xs[i].clone()).collect(), order.iter().map(|&i| truth[i]).collect()).unwrap();
        prop_assert!((lse_log_loss(&gp, &grid, t) - lse_log_loss(&gp, &permuted, t)).abs() < 1e-12);
    }

    #[test]
    fn feature_sample_gradient_matches_differences(gp in gp_2d(), x in prop::collection::vec(0.1..0.9f64, 2), seed in any::<u64>()) {
        let s = draw_posterior_sample(&gp, 200, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let g = s.gradient(&x);
        let scale = s.eval(&x).abs().max(1.0);
        for i in 0..2 {
            let h = 1e-6;
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (s.eval(&up) - s.eval(&dn)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-4 * scale.max(fd.abs()));
        }
    }

    #[test]
    fn optimizer_is_deterministic_and_stays_in_box(cx in -1.0..3.0f64, cy in 0.0..1.0f64, seed in any::<u64>()) {
        let bounds = Bounds::new(vec![-1.0, 0.0], vec![3.0, 1.0]).unwrap();
        let cfg = OptimizerConfig { seed, ..OptimizerConfig::default() };
        let f = |x: &[f64]| -((x[0] - cx).powi(2) + (x[1] - cy).powi(2));
        let a = maximize_acquisition(f, &bounds, &cfg).unwrap();
        let b = maximize_acquisition(f, &bounds, &cfg).unwrap();
        prop_assert!(bounds.contains(&a.0));
        prop_assert_eq!(a.clone(), b);
        prop_assert!((a.0[0] - cx).abs() < 1e-3 && (a.0[1] - cy).abs() < 1e-3);
    }

    #[test]
    fn config_round_trips_through_text(iterations in 1usize..100, seed in any::<u64>(), noise in 1e-6..1.0f64, reps in 1usize..50) {
        let mut cfg = ExperimentConfig::new(bes_core::Problem::Lse { threshold: 0.25 }, "branin", bes_core::Criterion::Bes);
        cfg.iterations = iterations;
        cfg.master_seed = seed;
        cfg.noise_variance = noise;
        cfg.repetitions = reps;
        let back = ExperimentConfig::parse(&cfg.to_kv()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }
}
