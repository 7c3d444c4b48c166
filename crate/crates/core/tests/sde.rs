use std::collections::BTreeMap;

use proptest::prelude::*;
use vixlab_core::math::mean_and_se;
use vixlab_core::models::{builtin, ModelSpec, StateFn, VectorModelSpec};
use vixlab_core::sde::*;
use vixlab_core::Error;

/// Splits paths over scoped threads in interleaved order.
struct Threads(usize);

impl PathMap for Threads {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let k = self.0;
        let mut parts: Vec<Vec<(usize, T)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..k)
                .map(|w| {
                    let f = &f;
                    s.spawn(move || (w..n).step_by(k).map(|p| (p, f(p))).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut all: Vec<(usize, T)> = parts.iter_mut().flat_map(std::mem::take).collect();
        all.sort_by_key(|(p, _)| *p);
        all.into_iter().map(|(_, t)| t).collect()
    }
}

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn gbm(sigma: f64, mu: f64) -> ModelSpec {
    ModelSpec::Vector(VectorModelSpec {
        x0: vec![100.0],
        drift: vec![StateFn::Constant { value: mu }],
        vol: vec![vec![StateFn::Constant { value: sigma }]],
        correlation: None,
    })
}

fn corr2(rho: f64) -> NoiseSpec {
    NoiseSpec { dim: 2, correlation: vec![1.0, rho, rho, 1.0], seed: 7 }
}

#[test]
fn time_grid_validation() {
    assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    assert!(TimeGrid::new(1.0, 1.0, 5).is_err());
    let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
    assert_eq!(g.time(3), 1.0);
    assert!((g.dt() - 1.0 / 3.0).abs() < 1e-16);
}

#[test]
fn independent_factors_are_uncorrelated() {
    let grid = TimeGrid::new(0.0, 0.01, 1).unwrap();
    let n = 100_000;
    let inc = generate_increments(&corr2(0.0), &grid, n).unwrap();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for p in 0..n {
        let (x, y) = (inc[2 * p], inc[2 * p + 1]);
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    assert!((sxy / (sxx * syy).sqrt()).abs() < 0.01);
    assert!((sxx / n as f64 / 0.01 - 1.0).abs() < 0.02);
}

#[test]
fn correlated_factors_match_target() {
    let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
    let n = 100_000;
    let inc = generate_increments(&corr2(-0.7), &grid, n).unwrap();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for p in 0..n {
        let (x, y) = (inc[2 * p], inc[2 * p + 1]);
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    assert!((sxy / (sxx * syy).sqrt() + 0.7).abs() < 0.01);
}

#[test]
fn same_seed_and_path_give_identical_increments() {
    let grid = TimeGrid::new(0.0, 1.0, 20).unwrap();
    let a = generate_increments(&corr2(0.3), &grid, 5).unwrap();
    let b = generate_increments(&corr2(0.3), &grid, 9).unwrap();
    assert_eq!(a[..], b[..a.len()]);
    let other = NoiseSpec { seed: 8, ..corr2(0.3) };
    assert_ne!(a, generate_increments(&other, &grid, 5).unwrap());
}

#[test]
fn perfect_correlation_duplicates_factor() {
    let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
    let inc = generate_increments(&corr2(1.0), &grid, 3).unwrap();
    assert!(inc.chunks(2).all(|c| c[0] == c[1]));
}

#[test]
fn non_psd_correlation_is_rejected() {
    let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
    let bad = NoiseSpec {
        dim: 3,
        correlation: vec![1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0],
        seed: 1,
    };
    assert_eq!(generate_increments(&bad, &grid, 1), Err(Error::NotPsd));
    assert_eq!(generate_increments(&corr2(1.5), &grid, 1), Err(Error::NotPsd));
}

#[test]
fn deterministic_drift_only_matches_exponential() {
    let model = gbm(0.0, 0.5);
    let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
    let b = simulate(&model, &NoiseSpec::for_model(&model, 1), &grid, 1, Scheme::Euler, &Serial).unwrap();
    let exact = 100.0 * 0.5f64.exp();
    let last = b.state(0, 1000)[0];
    assert!((last - exact).abs() < 100.0 * 0.5 * 0.5 * 1e-3 * 0.5f64.exp() * 1.1);
}

#[test]
fn gbm_terminal_mean_is_initial_value() {
    let model = gbm(0.2, 0.0);
    let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
    let b = simulate(&model, &NoiseSpec::for_model(&model, 3), &grid, 100_000, Scheme::Euler, &Serial).unwrap();
    let terminal: Vec<f64> = (0..b.n_paths).map(|p| b.state(p, 4)[0]).collect();
    let (mean, se) = mean_and_se(&terminal);
    assert!((mean - 100.0).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn full_truncation_keeps_restricted_cir_non_negative() {
    let model = builtin("cir_restricted", &params(&[("alpha", 0.5), ("gamma", 0.3), ("x0", 0.04)])).unwrap();
    assert_eq!(model.default_scheme(), Scheme::FullTruncationEuler);
    let grid = TimeGrid::new(0.0, 1.0, 250).unwrap();
    let b = simulate(&model, &NoiseSpec::for_model(&model, 5), &grid, 2000, Scheme::FullTruncationEuler, &Serial).unwrap();
    assert!(b.states.iter().all(|v| v.is_finite()));
    assert!((0..b.n_paths).all(|p| (0..=250).all(|n| b.state(p, n)[1] >= 0.0)));
}

#[test]
fn plain_euler_can_go_negative_on_square_root_state() {
    let model = builtin("cir_restricted", &params(&[("alpha", 1.5), ("gamma", 2.0), ("x0", 0.01)])).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
    let b = simulate(&model, &NoiseSpec::for_model(&model, 5), &grid, 500, Scheme::Euler, &Serial).unwrap();
    assert!((0..b.n_paths).any(|p| (0..=50).any(|n| b.state(p, n)[1] < 0.0)));
}

#[test]
fn bundles_do_not_depend_on_worker_count() {
    let model = builtin("heston", &params(&[("kappa", 2.0), ("theta", 0.04), ("eta", 0.3), ("v0", 0.04), ("rho", -0.7)])).unwrap();
    let grid = TimeGrid::new(0.0, 0.5, 40).unwrap();
    let noise = NoiseSpec::for_model(&model, 42);
    let serial = simulate(&model, &noise, &grid, 300, Scheme::FullTruncationEuler, &Serial).unwrap();
    for k in [2, 3, 8] {
        let threaded = simulate(&model, &noise, &grid, 300, Scheme::FullTruncationEuler, &Threads(k)).unwrap();
        assert_eq!(serial, threaded);
    }
}

#[test]
fn reintegration_reproduces_states_bit_exactly() {
    let model = builtin("heston", &params(&[("kappa", 2.0), ("theta", 0.04), ("eta", 0.3), ("v0", 0.04), ("rho", -0.7)])).unwrap();
    let grid = TimeGrid::new(0.0, 0.5, 40).unwrap();
    for scheme in [Scheme::Euler, Scheme::FullTruncationEuler, Scheme::Milstein] {
        let b = simulate(&model, &NoiseSpec::for_model(&model, 9), &grid, 100, scheme, &Serial).unwrap();
        assert_eq!(reintegrate(&model, &b).unwrap(), b.states);
    }
}

#[test]
fn increments_have_expected_variance() {
    let model = gbm(0.2, 0.0);
    let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
    let b = simulate(&model, &NoiseSpec::for_model(&model, 2), &grid, 4000, Scheme::Euler, &Serial).unwrap();
    let (mean, _) = mean_and_se(&b.increments);
    let var = b.increments.iter().map(|x| x * x).sum::<f64>() / b.increments.len() as f64;
    assert!(mean.abs() < 4.0 * (0.02f64 / 200_000.0).sqrt());
    assert!((var / 0.02 - 1.0).abs() < 0.02);
}

#[test]
fn weak_error_shrinks_when_step_is_quartered() {
    // E[F_T] = F_0 e^{μT}; the coarse run reuses the fine increments summed in blocks of 4.
    let (mu, sigma) = (1.0, 0.2);
    let model = gbm(sigma, mu);
    let fine = TimeGrid::new(0.0, 1.0, 16).unwrap();
    let coarse = TimeGrid::new(0.0, 1.0, 4).unwrap();
    let b = simulate(&model, &NoiseSpec::for_model(&model, 4), &fine, 20_000, Scheme::Euler, &Serial).unwrap();
    let x0 = model.initial_state();
    let mut coarse_sum = 0.0;
    let mut st = vec![0.0; 5];
    for p in 0..b.n_paths {
        let inc: Vec<f64> = b.path_increments(p).chunks(4).map(|c| c.iter().sum()).collect();
        integrate_path(&model, Scheme::Euler, &coarse, &x0, &inc, p, &mut st).unwrap();
        coarse_sum += st[4];
    }
    let fine_mean = (0..b.n_paths).map(|p| b.state(p, 16)[0]).sum::<f64>() / b.n_paths as f64;
    let coarse_mean = coarse_sum / b.n_paths as f64;
    let exact = 100.0 * mu.exp();
    assert!((fine_mean - exact).abs() < (coarse_mean - exact).abs() / 2.0);
}

#[test]
fn non_finite_state_names_path_and_step() {
    let model = gbm(0.2, 1e308);
    let grid = TimeGrid::new(0.0, 1.0, 3).unwrap();
    let r = simulate(&model, &NoiseSpec::for_model(&model, 1), &grid, 2, Scheme::Euler, &Serial);
    assert!(matches!(r, Err(Error::NonFinite { path: 0, step: 1 })), "{r:?}");
}

#[test]
fn explosion_guard_trips() {
    let model = gbm(0.0, 1e3);
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let r = simulate(&model, &NoiseSpec::for_model(&model, 1), &grid, 1, Scheme::Euler, &Serial);
    assert!(matches!(r, Err(Error::Explosion { path: 0, .. })), "{r:?}");
}

#[test]
fn dimension_mismatch_and_empty_runs() {
    let model = gbm(0.2, 0.0);
    let grid = TimeGrid::new(0.0, 1.0, 3).unwrap();
    assert!(matches!(simulate(&model, &corr2(0.0), &grid, 1, Scheme::Euler, &Serial), Err(Error::Dimension(_))));
    let noise = NoiseSpec::for_model(&model, 1);
    assert_eq!(simulate(&model, &noise, &grid, 0, Scheme::Euler, &Serial), Err(Error::EmptySimulation));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn path_streams_are_prefix_stable(seed in any::<u64>(), n in 1usize..20) {
        let grid = TimeGrid::new(0.0, 1.0, 5).unwrap();
        let noise = NoiseSpec { seed, ..corr2(0.5) };
        let all = generate_increments(&noise, &grid, n).unwrap();
        let one = generate_increments(&noise, &grid, 1).unwrap();
        prop_assert_eq!(&all[..10], &one[..]);
    }

    #[test]
    fn full_truncation_never_emits_negative_variance(seed in any::<u64>(), alpha in 0.1f64..2.0, gamma in 0.1f64..3.0) {
        let model = builtin("cir_restricted", &params(&[("alpha", alpha), ("gamma", gamma), ("x0", 0.02)])).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let b = simulate(&model, &NoiseSpec::for_model(&model, seed), &grid, 20, Scheme::FullTruncationEuler, &Serial).unwrap();
        prop_assert!(b.states.chunks(2).all(|s| s[1] >= 0.0 && s[0].is_finite()));
    }
}
