use std::collections::BTreeMap;

use proptest::prelude::*;
use vixlab_core::consistency::*;
use vixlab_core::models::*;
use vixlab_core::scalar::ScalarFn;
use vixlab_core::sde::{simulate, NoiseSpec, PathBundle, Serial, TimeGrid};
use vixlab_core::vixcore::{h_by_fk, matched_curve, Axis, FkOptions, Provenance, VarianceFunction};
use vixlab_core::Error;

const TAU: f64 = 30.0 / 365.0;

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn stoch_vol(m: &ModelSpec) -> &StochVolSpec {
    match m {
        ModelSpec::StochVol(s) => s,
        _ => panic!("not a stochastic-volatility model"),
    }
}

fn bundle(model: &ModelSpec, n_steps: usize, n_paths: usize, seed: u64) -> PathBundle {
    let grid = TimeGrid::new(0.0, TAU, n_steps).unwrap();
    simulate(model, &NoiseSpec::for_model(model, seed), &grid, n_paths, model.default_scheme(), &Serial).unwrap()
}

fn beta_const(curve: Curve, gamma: f64) -> TermStructureSpec {
    proportional_termstructure(curve, TermFn::Constant { value: gamma }, 2, 1, TAU).unwrap()
}

struct Setup {
    model: ModelSpec,
    ts: TermStructureSpec,
    hf: VarianceFunction,
}

/// Linear vol-of-vol with the restricted drift, matched curve and `β ≡ γ`.
fn linear_setup(gamma: f64) -> Setup {
    let model = builtin("gbm_restricted", &params(&[("gamma", gamma), ("x0", 0.04)])).unwrap();
    let s = stoch_vol(&model);
    let hf = h_by_fk(s, &VixConvention::default(), &FkOptions::default()).unwrap();
    let curve = matched_curve(s, &hf, TAU, 200).unwrap();
    Setup { ts: beta_const(curve, gamma), model, hf }
}

fn constant_h(level_per_x: f64) -> VarianceFunction {
    let nodes = vec![0.02, 0.04, 0.06];
    let values = nodes.iter().map(|x| level_per_x * x).collect();
    VarianceFunction::from_grid(
        Provenance::ClosedForm,
        VixConvention::default(),
        vec![100.0, 0.04],
        vec![Axis { component: 1, nodes }],
        values,
    )
    .unwrap()
}

fn frozen_model() -> ModelSpec {
    ModelSpec::StochVol(StochVolSpec {
        mu: ScalarFn::constant(0.0),
        sigma: ScalarFn::constant(0.0),
        rho: 0.0,
        x0: 0.04,
        f0: 100.0,
    })
}

fn index_model(mu: f64, sigma: f64) -> ModelSpec {
    ModelSpec::Vector(VectorModelSpec {
        x0: vec![100.0],
        drift: vec![StateFn::Constant { value: mu }],
        vol: vec![vec![StateFn::Constant { value: sigma }]],
        correlation: None,
    })
}

#[test]
fn no_noise_no_drift_reads_initial_curve() {
    let model = frozen_model();
    let b = bundle(&model, 30, 5, 1);
    let ts = proportional_termstructure(Curve::Exponential { level: 20.0, rate: 0.5 }, TermFn::Zero, 2, 1, TAU).unwrap();
    let ivp = xi_path(&ts, &b, &MarketPriceOfRisk::zero(2), &Serial).unwrap();
    for p in 0..5 {
        for n in 0..=30 {
            let t = b.grid.time(n);
            assert!((ivp.vix_at(p, n) - 20.0 * (0.5 * t).exp()).abs() < 1e-12);
            assert!((ivp.xi_at(p, n).unwrap() - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn lognormal_family_diagonal_is_stochastic_exponential() {
    // Curve V₀e^{−γ²T/2}, β ≡ γ: Ṽ_t = V₀exp(γZ_t − γ²t).
    let gamma = 0.3;
    let model = frozen_model();
    let b = bundle(&model, 40, 200, 3);
    let ts = beta_const(Curve::Exponential { level: 20.0, rate: -0.5 * gamma * gamma }, gamma);
    let ivp = implied_vix_path(&ts, &b, &Serial).unwrap();
    assert!(ivp.xi.is_none());
    for p in 0..b.n_paths {
        let mut z = 0.0;
        for n in 0..=40 {
            let expected = 20.0 * (gamma * z - gamma * gamma * b.grid.time(n)).exp();
            assert!((ivp.vix_at(p, n) / expected - 1.0).abs() < 1e-12);
            if n < 40 {
                z += b.increment(p, n)[1];
            }
        }
    }
}

#[test]
fn flat_curve_family_diagonal() {
    let gamma = 0.4;
    let b = bundle(&frozen_model(), 20, 50, 4);
    let ts = beta_const(Curve::Flat { level: 25.0 }, gamma);
    let ivp = implied_vix_path(&ts, &b, &Serial).unwrap();
    for p in 0..b.n_paths {
        let z: f64 = (0..20).map(|n| b.increment(p, n)[1]).sum();
        let expected = 25.0 * (gamma * z - 0.5 * gamma * gamma * TAU).exp();
        assert!((ivp.vix_at(p, 20) / expected - 1.0).abs() < 1e-12);
    }
}

#[test]
fn xi_of_lognormal_family_is_minus_half_gamma_squared() {
    let gamma = 0.3;
    let b = bundle(&frozen_model(), 60, 500, 5);
    let ts = beta_const(Curve::Exponential { level: 20.0, rate: -0.5 * gamma * gamma }, gamma);
    let ivp = xi_path(&ts, &b, &MarketPriceOfRisk::zero(2), &Serial).unwrap();
    let mean = ivp.mean_xi().unwrap();
    assert!((mean / (-0.045) - 1.0).abs() < 0.01, "{mean}");
    let worst = (0..b.n_paths)
        .flat_map(|p| (0..60).map(move |n| (p, n)))
        .map(|(p, n)| (ivp.xi_at(p, n).unwrap() + 0.045).abs())
        .fold(0.0f64, f64::max);
    assert!(worst < 0.01, "{worst}");
}

#[test]
fn xi_terms_split_as_documented() {
    let gamma = 0.3;
    let b = bundle(&frozen_model(), 20, 3, 6);
    let ts = beta_const(Curve::Exponential { level: 20.0, rate: -0.5 * gamma * gamma }, gamma);
    let lam = MarketPriceOfRisk::Constant { values: vec![0.0, 0.5] };
    let ivp = xi_path(&ts, &b, &lam, &Serial).unwrap();
    let terms = ivp.xi.as_ref().unwrap();
    assert!(terms.risk_adjustment.iter().all(|&r| (r - 0.15).abs() < 1e-15));
    assert!(terms.drift.iter().all(|&d| d == 0.0));
    let k = 7;
    let sum = terms.slope[k] + terms.drift[k] + terms.stochastic[k] + terms.risk_adjustment[k];
    assert_eq!(ivp.xi_at(0, k), Some(sum));
}

#[test]
fn xi_with_decaying_loading_matches_regressed_drift() {
    let ts = proportional_termstructure(
        Curve::Exponential { level: 20.0, rate: 0.5 },
        TermFn::ExpDecay { scale: 0.3, kappa: 4.0 },
        2,
        1,
        TAU,
    )
    .unwrap();
    let b = bundle(&frozen_model(), 30, 10_000, 8);
    let ivp = xi_path(&ts, &b, &MarketPriceOfRisk::zero(2), &Serial).unwrap();
    let dt = b.grid.dt();
    let (mut ret, mut xi, mut sq) = (0.0, 0.0, 0.0);
    let count = (b.n_paths * 30) as f64;
    for p in 0..b.n_paths {
        for n in 0..30 {
            let r = (ivp.vix_at(p, n + 1) / ivp.vix_at(p, n) - 1.0) / dt;
            ret += r;
            sq += r * r;
            xi += ivp.xi_at(p, n).unwrap();
        }
    }
    let (ret, xi) = (ret / count, xi / count);
    let se = ((sq / count - ret * ret) / count).sqrt();
    assert!((ret - xi).abs() < 3.0 * se, "regression {ret} ± {se}, xi {xi}");
}

#[test]
fn non_positive_implied_vix_is_an_error() {
    let b = bundle(&frozen_model(), 20, 3, 6);
    let ts = TermStructureSpec {
        initial_curve: Curve::Flat { level: 20.0 },
        mu_v: TermFn::Constant { value: -1e6 },
        nu: vec![TermFn::Zero, TermFn::Zero],
        t_star: TAU,
    };
    assert!(matches!(implied_vix_path(&ts, &b, &Serial), Err(Error::NonPositiveImpliedVix { .. })));
}

#[test]
fn coarse_maturity_mesh_is_rejected() {
    let b = bundle(&frozen_model(), 20, 2, 6);
    let ts = proportional_termstructure(Curve::Flat { level: 20.0 }, TermFn::Zero, 2, 1, TAU / 2.0).unwrap();
    assert!(matches!(implied_vix_path(&ts, &b, &Serial), Err(Error::Mesh(_))));
}

#[test]
fn cc1_cases() {
    let zero = index_model(0.0, 0.2);
    let b = bundle(&zero, 10, 20, 1);
    let r = check_cc1(&zero, &MarketPriceOfRisk::zero(1), &b, 1e-6, &Serial).unwrap();
    assert_eq!((r.max, r.passed), (0.0, true));
    let drifted = index_model(0.03, 0.2);
    let b = bundle(&drifted, 10, 20, 1);
    let solved = check_cc1(&drifted, &MarketPriceOfRisk::Constant { values: vec![-0.15] }, &b, 1e-6, &Serial).unwrap();
    assert!(solved.max < 1e-15 && solved.passed);
    let violated = check_cc1(&drifted, &MarketPriceOfRisk::zero(1), &b, 1e-6, &Serial).unwrap();
    assert!((violated.max - 0.03).abs() < 1e-15 && !violated.passed);
    assert!(check_cc1(&drifted, &MarketPriceOfRisk::zero(2), &b, 1e-6, &Serial).is_err());
}

#[test]
fn cc2_cases() {
    let b = bundle(&frozen_model(), 10, 4, 1);
    let mut ts = beta_const(Curve::Flat { level: 20.0 }, 0.5);
    let r = check_cc2(&ts, &MarketPriceOfRisk::zero(2), &b, 1e-6, &Serial).unwrap();
    assert_eq!((r.max, r.passed), (0.0, true));
    ts.mu_v = TermFn::Constant { value: 0.01 };
    let solved = check_cc2(&ts, &MarketPriceOfRisk::Constant { values: vec![0.0, -0.02] }, &b, 1e-6, &Serial).unwrap();
    assert!(solved.max < 1e-15 && solved.passed);
    let violated = check_cc2(&ts, &MarketPriceOfRisk::zero(2), &b, 1e-6, &Serial).unwrap();
    assert!((violated.max - 0.01).abs() < 1e-15 && !violated.passed);
}

#[test]
fn cc3_vanishes_without_diffusion() {
    let model = frozen_model();
    let b = bundle(&model, 10, 4, 1);
    let ts = proportional_termstructure(Curve::Flat { level: 20.0 }, TermFn::Zero, 2, 1, TAU).unwrap();
    let r = check_cc3(&ts, &model, &constant_h(1e4), &b, 1e-2, &Serial).unwrap();
    assert_eq!(r.max, 0.0);
    assert!(r.passed);
}

#[test]
fn cc3_holds_for_linear_vol_restricted_model() {
    let s = linear_setup(0.3);
    let b = bundle(&s.model, 30, 200, 2);
    let r = check_cc3(&s.ts, &s.model, &s.hf, &b, 1e-2, &Serial).unwrap();
    assert!(r.passed, "{}", r.max);
    assert!(r.evaluated > 0);
}

#[test]
fn cc3_fails_for_heston_with_constant_loading() {
    let model = builtin("heston", &params(&[("kappa", 2.0), ("theta", 0.04), ("eta", 0.3), ("v0", 0.04), ("rho", -0.7)])).unwrap();
    let hf = h_by_fk(stoch_vol(&model), &VixConvention::default(), &FkOptions::default()).unwrap();
    let b = bundle(&model, 30, 200, 2);
    let ts = beta_const(Curve::Flat { level: 20.0 }, 0.3);
    let r = check_cc3(&ts, &model, &hf, &b, 1e-2, &Serial).unwrap();
    assert!(!r.passed && r.max > 0.1, "{}", r.max);
    let g = check_genpde(&hf, &model, &ts, 11, 1e-2).unwrap();
    assert!(!g.passed && g.max > 0.1);
}

#[test]
fn genpde_holds_for_linear_vol_restricted_model() {
    let s = linear_setup(0.3);
    let r = check_genpde(&s.hf, &s.model, &s.ts, 11, 1e-2).unwrap();
    assert!(r.passed && r.max < 1e-6, "{}", r.max);
    assert!(r.skipped > 0);
}

#[test]
fn genpde_vanishes_without_diffusion() {
    let ts = proportional_termstructure(Curve::Flat { level: 20.0 }, TermFn::Zero, 2, 1, TAU).unwrap();
    let r = check_genpde(&constant_h(1e4), &frozen_model(), &ts, 3, 1e-2).unwrap();
    assert_eq!(r.max, 0.0);
}

#[test]
fn genpde_is_cc3_times_two_h() {
    let model = builtin("heston", &params(&[("kappa", 2.0), ("theta", 0.04), ("eta", 0.3), ("v0", 0.04), ("rho", -0.7)])).unwrap();
    let hf = h_by_fk(stoch_vol(&model), &VixConvention::default(), &FkOptions::default()).unwrap();
    let ts = beta_const(Curve::Flat { level: 20.0 }, 0.3);
    for x in hf.node_states() {
        let h = hf.value(&x);
        let g = genpde_residual_form(&hf, &model, &ts, 0.01, &x);
        let c = cc3_residual_form(&hf, &model, &ts, 0.01, &x).unwrap();
        for j in 0..2 {
            assert!((g[j] + 2.0 * h * c[j]).abs() <= 1e-12 * (2.0 * h * 0.3).max(1.0));
        }
    }
}

#[test]
fn cc3_is_invariant_under_girsanov_tilt() {
    let s = linear_setup(0.3);
    let b = bundle(&s.model, 20, 100, 9);
    let before = check_cc3(&s.ts, &s.model, &s.hf, &b, 1e-2, &Serial).unwrap();
    for lam in [
        MarketPriceOfRisk::Constant { values: vec![0.3, -1.2] },
        MarketPriceOfRisk::State { fns: vec![StateFn::Constant { value: 0.1 }, StateFn::Component { index: 1, f: ScalarFn::SqrtScaled { alpha: 2.0 } }] },
    ] {
        let tilted = tilt_bundle(&b, &lam).unwrap();
        assert_ne!(tilted.increments, b.increments);
        let after = check_cc3(&s.ts, &s.model, &s.hf, &tilted, 1e-2, &Serial).unwrap();
        assert_eq!(before, after);
    }
}

#[test]
fn tilt_shifts_increments_by_lambda_dt() {
    let b = bundle(&frozen_model(), 10, 3, 1);
    let t = tilt_bundle(&b, &MarketPriceOfRisk::Constant { values: vec![1.0, -2.0] }).unwrap();
    let dt = b.grid.dt();
    for (k, (a, c)) in b.increments.iter().zip(&t.increments).enumerate() {
        let lam = if k % 2 == 0 { 1.0 } else { -2.0 };
        assert!((a - c - lam * dt).abs() < 1e-15);
    }
    assert_eq!(t.states, b.states);
}

#[test]
fn cc4_holds_for_linear_vol_restricted_model() {
    let s = linear_setup(0.3);
    let b = bundle(&s.model, 60, 300, 10);
    let lam = MarketPriceOfRisk::zero(2);
    let ivp = xi_path(&s.ts, &b, &lam, &Serial).unwrap();
    let (inst, integ) = check_cc4(&s.model, &s.hf, &b, &ivp, &lam, None, 1e-2, &Serial).unwrap();
    assert!(inst.max < 0.05, "{}", inst.max);
    assert!(integ.passed, "{}", integ.max);
    assert!((ivp.mean_xi().unwrap() / (-0.045) - 1.0).abs() < 0.02);
}

#[test]
fn ito_drift_xi_and_closed_form_agree() {
    let s = linear_setup(0.3);
    let b = bundle(&s.model, 60, 300, 12);
    let ivp = xi_path(&s.ts, &b, &MarketPriceOfRisk::zero(2), &Serial).unwrap();
    let target = -0.045;
    let mut ito = 0.0;
    let mut count = 0usize;
    for p in 0..b.n_paths {
        for n in 0..60 {
            let x = b.state(p, n);
            if s.hf.in_interior(x) {
                ito += vixlab_core::vixcore::ito_drift_of_sqrt_h(&s.hf, &s.model, x).unwrap().0;
                count += 1;
            }
        }
    }
    let ito = ito / count as f64;
    let xi = ivp.mean_xi().unwrap();
    assert!((ito / target - 1.0).abs() < 1e-2, "{ito}");
    assert!((xi / target - 1.0).abs() < 2e-2, "{xi}");
    assert!((ito / xi - 1.0).abs() < 3e-2);
}

#[test]
fn cc4_vanishes_for_all_zero_model() {
    let model = frozen_model();
    let b = bundle(&model, 10, 5, 1);
    let ts = proportional_termstructure(Curve::Flat { level: 20.0 }, TermFn::Zero, 2, 1, TAU).unwrap();
    let lam = MarketPriceOfRisk::zero(2);
    let ivp = xi_path(&ts, &b, &lam, &Serial).unwrap();
    let (inst, integ) = check_cc4(&model, &constant_h(1e4), &b, &ivp, &lam, None, 1e-2, &Serial).unwrap();
    assert_eq!((inst.max, integ.max), (0.0, 0.0));
}

#[test]
fn cc4_detects_wrong_variance_drift() {
    let gamma = 0.3;
    let model = builtin("heston", &params(&[("kappa", 2.0), ("theta", 0.04), ("eta", 0.5), ("v0", 0.04)])).unwrap();
    let hf = h_by_fk(stoch_vol(&model), &VixConvention::default(), &FkOptions::default()).unwrap();
    let curve = matched_curve(stoch_vol(&model), &hf, TAU, 200).unwrap();
    let ts = beta_const(curve, gamma);
    let b = bundle(&model, 30, 200, 3);
    let lam = MarketPriceOfRisk::zero(2);
    let ivp = xi_path(&ts, &b, &lam, &Serial).unwrap();
    let (inst, _) = check_cc4(&model, &hf, &b, &ivp, &lam, None, 1e-2, &Serial).unwrap();
    assert!(!inst.passed && inst.max > 0.1, "{}", inst.max);
}

#[test]
fn cc4_requires_xi() {
    let s = linear_setup(0.3);
    let b = bundle(&s.model, 10, 5, 1);
    let lam = MarketPriceOfRisk::zero(2);
    let ivp = implied_vix_path(&s.ts, &b, &Serial).unwrap();
    assert!(matches!(check_cc4(&s.model, &s.hf, &b, &ivp, &lam, None, 1e-2, &Serial), Err(Error::Missing(_))));
}

#[test]
fn c1_holds_for_linear_vol_restricted_model() {
    let s = linear_setup(0.3);
    let b = bundle(&s.model, 200, 200, 4);
    let ivp = implied_vix_path(&s.ts, &b, &Serial).unwrap();
    let r = check_c1_pathwise(&s.hf, &ivp, &b, 1e-2, &Serial).unwrap();
    assert!(r.passed, "{}", r.max);
}

#[test]
fn c1_error_shrinks_like_root_dt() {
    let s = linear_setup(0.3);
    let dev = |steps| {
        let b = bundle(&s.model, steps, 300, 4);
        let ivp = implied_vix_path(&s.ts, &b, &Serial).unwrap();
        check_c1_pathwise(&s.hf, &ivp, &b, 1e-2, &Serial).unwrap().max
    };
    let ratio = dev(206) / dev(822);
    assert!((1.6..=2.6).contains(&ratio), "{ratio}");
}

#[test]
fn c1_is_exact_for_frozen_model() {
    let model = frozen_model();
    let b = bundle(&model, 10, 5, 1);
    let ts = proportional_termstructure(Curve::Flat { level: 20.0 }, TermFn::Zero, 2, 1, TAU).unwrap();
    let ivp = implied_vix_path(&ts, &b, &Serial).unwrap();
    let r = check_c1_pathwise(&constant_h(1e4), &ivp, &b, 1e-2, &Serial).unwrap();
    assert!(r.max < 1e-15);
}

#[test]
fn c1_detects_mismatched_loading() {
    let s = linear_setup(0.3);
    let ts = TermStructureSpec { nu: vec![TermFn::Zero, TermFn::Constant { value: 0.6 }], ..s.ts.clone() };
    let b = bundle(&s.model, 60, 300, 4);
    let ivp = implied_vix_path(&ts, &b, &Serial).unwrap();
    let r = check_c1_pathwise(&s.hf, &ivp, &b, 1e-2, &Serial).unwrap();
    assert!(!r.passed);
    let early = r.field.rows[5][1];
    let late = r.field.rows[60][1];
    assert!(late > early, "{early} {late}");
}

#[test]
fn martingale_diagnostic_cases() {
    let gamma = 0.3;
    let model = frozen_model();
    let b = bundle(&model, 30, 10_000, 11);
    let lam = MarketPriceOfRisk::zero(2);
    let mut ts = beta_const(Curve::Flat { level: 20.0 }, gamma);
    let diag = martingale_diagnostic(&ts, &b, &lam, &Serial).unwrap();
    assert!(diag.maturities.iter().all(|m| m.contains_zero));
    assert!(check_martingale(&diag, 1.0).passed);
    assert_eq!(diag.density.min, 1.0);
    ts.mu_v = TermFn::Constant { value: 0.05 };
    let diag = martingale_diagnostic(&ts, &b, &lam, &Serial).unwrap();
    assert!(diag.maturities.iter().any(|m| !m.contains_zero));
    let last = diag.maturities.last().unwrap();
    assert!((last.drift - 0.05).abs() < 5e-3, "{}", last.drift);
    assert!(!check_martingale(&diag, 1.0).passed);
    let quiet = proportional_termstructure(Curve::Flat { level: 20.0 }, TermFn::Zero, 2, 1, TAU).unwrap();
    let diag = martingale_diagnostic(&quiet, &b, &lam, &Serial).unwrap();
    assert!(diag.maturities.iter().all(|m| m.drift == 0.0));
    assert_eq!(diag.statistic, 0.0);
}

#[test]
fn martingale_density_has_unit_mean_under_tilt() {
    let b = bundle(&frozen_model(), 30, 10_000, 12);
    let ts = beta_const(Curve::Flat { level: 20.0 }, 0.3);
    let lam = MarketPriceOfRisk::Constant { values: vec![0.0, 0.5] };
    let diag = martingale_diagnostic(&ts, &b, &lam, &Serial).unwrap();
    assert!(diag.density.all_positive);
    assert!((diag.density.mean - 1.0).abs() < 3.0 * diag.density.std_error);
}

#[test]
fn stationarity_check_on_fk_solution() {
    let s = linear_setup(0.3);
    let r = check_stationarity(&s.model, &s.hf, 1e-2).unwrap();
    assert!(r.passed, "{}", r.max);
    assert!(check_stationarity(&s.model, &constant_h(1e4), 1e-2).is_err());
}

#[test]
fn run_checks_aggregates_and_scales_tolerances() {
    let s = linear_setup(0.3);
    let b = bundle(&s.model, 30, 100, 13);
    let lam = MarketPriceOfRisk::zero(2);
    let inputs = CheckInputs { model: &s.model, ts: &s.ts, hf: &s.hf, bundle: &b, lambda: &lam, surface: None };
    let reqs: Vec<CheckRequest> = [CheckName::Cc1, CheckName::Cc2, CheckName::Cc3, CheckName::Genpde, CheckName::Cc4Integrated]
        .into_iter()
        .map(|name| CheckRequest { name, tolerance: None })
        .collect();
    let report = run_checks(&inputs, &reqs, 1.0, "abc".into(), &Serial).unwrap();
    assert_eq!(report.results.len(), 5);
    assert!(report.passed, "{}", report.table());
    assert!(report.table().contains("cc3"));
    let tight = run_checks(&inputs, &reqs, 1e-12, "abc".into(), &Serial).unwrap();
    assert_eq!(tight.get(CheckName::Cc3).unwrap().tolerance, 1e-14);
    assert!(matches!(run_checks(&inputs, &[], 1.0, "abc".into(), &Serial), Err(Error::Missing(_))));
}

#[test]
fn residuals_are_non_negative() {
    let s = linear_setup(0.3);
    let b = bundle(&s.model, 20, 50, 14);
    let lam = MarketPriceOfRisk::zero(2);
    let inputs = CheckInputs { model: &s.model, ts: &s.ts, hf: &s.hf, bundle: &b, lambda: &lam, surface: None };
    let reqs: Vec<CheckRequest> = CheckName::ALL.into_iter().map(|name| CheckRequest { name, tolerance: None }).collect();
    let report = run_checks(&inputs, &reqs, 1.0, String::new(), &Serial).unwrap();
    assert!(report.results.iter().all(|r| r.max >= 0.0 && r.mean_abs >= 0.0));
    assert!(report.martingale.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn genpde_and_cc3_forms_agree(gamma in 0.05f64..1.0, beta in 0.0f64..1.0, x in 0.005f64..0.2, t in 0.0f64..TAU) {
        let model = builtin("gbm_restricted", &params(&[("gamma", gamma), ("x0", 0.04)])).unwrap();
        let hf = constant_h(1e4);
        let ts = beta_const(Curve::Flat { level: 20.0 }, beta);
        let state = [100.0, x];
        let h = hf.value(&state);
        let g = genpde_residual_form(&hf, &model, &ts, t, &state);
        let c = cc3_residual_form(&hf, &model, &ts, t, &state).unwrap();
        for j in 0..2 {
            prop_assert!((g[j] + 2.0 * h * c[j]).abs() <= 1e-12 * (2.0 * h).max(1.0));
        }
    }

    #[test]
    fn constant_tilts_never_change_cc3(l0 in -3.0f64..3.0, l1 in -3.0f64..3.0) {
        let model = builtin("gbm_restricted", &params(&[("gamma", 0.3), ("x0", 0.04)])).unwrap();
        let hf = constant_h(1e4);
        let ts = beta_const(Curve::Flat { level: 20.0 }, 0.3);
        let b = bundle(&model, 10, 20, 15);
        let tilted = tilt_bundle(&b, &MarketPriceOfRisk::Constant { values: vec![l0, l1] }).unwrap();
        let a = check_cc3(&ts, &model, &hf, &b, 1e-2, &Serial).unwrap();
        let c = check_cc3(&ts, &model, &hf, &tilted, 1e-2, &Serial).unwrap();
        prop_assert_eq!(a, c);
    }
}
