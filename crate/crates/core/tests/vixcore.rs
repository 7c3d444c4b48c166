use std::collections::BTreeMap;

use vixlab_core::models::{builtin, ModelSpec, StochVolSpec, VixConvention};
use vixlab_core::scalar::ScalarFn;
use vixlab_core::sde::{Scheme, Serial};
use vixlab_core::vixcore::*;
use vixlab_core::Error;

const KAPPA: f64 = 2.0;
const THETA: f64 = 0.04;

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn heston(v0: f64) -> ModelSpec {
    builtin("heston", &params(&[("kappa", KAPPA), ("theta", THETA), ("eta", 0.3), ("v0", v0), ("rho", -0.7)])).unwrap()
}

fn stoch_vol(m: &ModelSpec) -> &StochVolSpec {
    match m {
        ModelSpec::StochVol(s) => s,
        _ => panic!("not a stochastic-volatility model"),
    }
}

/// `h(v) = a + b·v` for Heston under the default convention.
fn heston_ab() -> (f64, f64) {
    let tau = 30.0 / 365.0;
    let phi = (1.0 - (-KAPPA * tau).exp()) / (KAPPA * tau);
    (1e4 * THETA * (1.0 - phi), 1e4 * phi)
}

fn mc(n_paths: usize, n_steps: usize) -> McOptions {
    McOptions { n_paths, n_steps, seed: 2024, scheme: None, start_time: 0.0 }
}

fn v_axis(nodes: &[f64]) -> Vec<Axis> {
    vec![Axis { component: 1, nodes: nodes.to_vec() }]
}

#[test]
fn constant_variance_gives_scaled_level() {
    let m = ModelSpec::StochVol(StochVolSpec {
        mu: ScalarFn::constant(0.0),
        sigma: ScalarFn::constant(0.0),
        rho: 0.0,
        x0: 0.04,
        f0: 100.0,
    });
    let hf = h_by_mc(&m, &VixConvention::default(), &v_axis(&[0.02, 0.04, 0.09]), &mc(10, 30), &Serial).unwrap();
    for (h, v) in hf.values.iter().zip([0.02, 0.04, 0.09]) {
        assert!((h - 1e4 * v).abs() < 1e-9 * h);
    }
    assert_eq!(hf.provenance, Provenance::Mc);
    assert!(hf.std_errors.as_ref().unwrap().iter().all(|&s| s < 1e-9));
}

#[test]
fn heston_mc_matches_first_moment_at_long_run_level() {
    let hf = h_by_mc(&heston(0.04), &VixConvention::default(), &[], &mc(20_000, 60), &Serial).unwrap();
    let se = hf.std_errors.as_ref().unwrap()[0];
    assert!((hf.values[0] - 400.0).abs() < 3.0 * se, "{} ± {se}", hf.values[0]);
}

#[test]
fn heston_mc_matches_first_moment_off_equilibrium() {
    let (a, b) = heston_ab();
    let hf = h_by_mc(&heston(0.09), &VixConvention::default(), &[], &mc(20_000, 60), &Serial).unwrap();
    let se = hf.std_errors.as_ref().unwrap()[0];
    assert!((hf.values[0] - (a + 0.09 * b)).abs() < 3.0 * se, "{} ± {se}", hf.values[0]);
}

#[test]
fn log_contract_form_for_one_factor_index() {
    let m = builtin("gbm_index", &params(&[("sigma0", 0.2)])).unwrap();
    let hf = h_by_mc(&m, &VixConvention::default(), &[], &mc(4000, 60), &Serial).unwrap();
    let se = hf.std_errors.as_ref().unwrap()[0];
    assert!((hf.values[0] - 400.0).abs() < 3.0 * se + 0.5, "{} ± {se}", hf.values[0]);
}

#[test]
fn strongly_drifting_index_gives_negative_h_error() {
    let m = ModelSpec::Vector(vixlab_core::models::VectorModelSpec {
        x0: vec![100.0],
        drift: vec![vixlab_core::models::StateFn::Constant { value: 5.0 }],
        vol: vec![vec![vixlab_core::models::StateFn::Constant { value: 0.1 }]],
        correlation: None,
    });
    let r = h_by_mc(&m, &VixConvention::default(), &[], &mc(500, 30), &Serial);
    assert!(matches!(r, Err(Error::NegativeH { .. })), "{r:?}");
}

#[test]
fn mc_is_time_homogeneous() {
    let conv = VixConvention::default();
    let a = h_by_mc(&heston(0.05), &conv, &[], &mc(2000, 40), &Serial).unwrap();
    let b = h_by_mc(&heston(0.05), &conv, &[], &McOptions { start_time: 0.75, ..mc(2000, 40) }, &Serial).unwrap();
    assert!((a.values[0] - b.values[0]).abs() < 1e-9 * a.values[0]);
}

#[test]
fn fk_without_dynamics_integrates_source() {
    let spec = StochVolSpec { mu: ScalarFn::constant(0.0), sigma: ScalarFn::constant(0.0), rho: 0.0, x0: 0.04, f0: 100.0 };
    let conv = VixConvention::default();
    let nodes: Vec<f64> = (1..=20).map(|i| 0.01 * i as f64).collect();
    let opts = FkOptions { nodes: Some(nodes.clone()), time_steps: 50, ..FkOptions::default() };
    let hf = h_by_fk(&spec, &conv, &opts).unwrap();
    for (h, x) in hf.values.iter().zip(&nodes) {
        assert!((h - 1e4 * x).abs() < 1e-9 * h);
    }
    let slices = hf.time_slices.as_ref().unwrap();
    let c = conv.source_scale();
    for (j, t) in slices.times.iter().enumerate() {
        for (i, x) in nodes.iter().enumerate() {
            let expected = c * x * (conv.tau_star - t);
            assert!((slices.values[j * nodes.len() + i] - expected).abs() < 1e-9 * (c * x * conv.tau_star));
        }
    }
}

#[test]
fn fk_heston_matches_closed_form_on_interior() {
    let (a, b) = heston_ab();
    for v0 in [0.01, 0.04, 0.09] {
        let m = heston(v0);
        let hf = h_by_fk(stoch_vol(&m), &VixConvention::default(), &FkOptions::default()).unwrap();
        let (lo, hi) = hf.interior[0];
        for (h, &x) in hf.values.iter().zip(&hf.axes[0].nodes) {
            if x >= lo && x <= hi {
                assert!((h / (a + b * x) - 1.0).abs() < 1e-3, "{x}");
            }
        }
        assert!((hf.value(&[100.0, v0]) / (a + b * v0) - 1.0).abs() < 1e-5);
    }
}

#[test]
fn fk_heston_is_stationary() {
    let m = heston(0.04);
    let hf = h_by_fk(stoch_vol(&m), &VixConvention::default(), &FkOptions::default()).unwrap();
    let r = stationarity_residual(stoch_vol(&m), &hf).unwrap();
    let (lo, hi) = hf.interior[0];
    let worst = r
        .iter()
        .zip(&hf.axes[0].nodes)
        .filter(|(_, &x)| x >= lo && x <= hi)
        .fold(0.0f64, |a, (r, _)| a.max(*r));
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn fk_and_mc_agree_for_restricted_cir() {
    let m = builtin("cir_restricted", &params(&[("alpha", 0.5), ("gamma", 0.3), ("x0", 0.04)])).unwrap();
    let conv = VixConvention::default();
    let fk = h_by_fk(stoch_vol(&m), &conv, &FkOptions::default()).unwrap();
    let nodes = [0.01, 0.04, 0.1];
    let mc = h_by_mc(&m, &conv, &v_axis(&nodes), &mc(20_000, 200), &Serial).unwrap();
    let se = mc.std_errors.as_ref().unwrap();
    for (k, &x) in nodes.iter().enumerate() {
        let f = fk.value(&[100.0, x]);
        assert!((f - mc.values[k]).abs() < 3.0 * se[k], "{x}: fk {f} mc {} ± {}", mc.values[k], se[k]);
    }
}

#[test]
fn gradient_of_affine_h_is_constant() {
    let (_, b) = heston_ab();
    let m = heston(0.04);
    let hf = h_by_fk(stoch_vol(&m), &VixConvention::default(), &FkOptions::default()).unwrap();
    for v in [0.02, 0.04, 0.06] {
        let g = gradient_h(&hf, &[100.0, v]);
        assert!(!g.at_boundary);
        assert_eq!(g.values[0], 0.0);
        assert!((g.values[1] / b - 1.0).abs() < 1e-4, "{v}: {}", g.values[1]);
    }
}

#[test]
fn constant_h_has_zero_gradient_and_w() {
    let axes = v_axis(&[0.01, 0.02, 0.03, 0.04]);
    let hf = VarianceFunction::from_grid(Provenance::ClosedForm, VixConvention::default(), vec![100.0, 0.02], axes, vec![400.0; 4]).unwrap();
    assert_eq!(gradient_h(&hf, &[100.0, 0.025]).values, vec![0.0, 0.0]);
    assert_eq!(w_from_h(&hf, &[100.0, 0.025]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn gradient_flags_boundary_cells() {
    let nodes = [0.01, 0.02, 0.03, 0.04, 0.05];
    let values: Vec<f64> = nodes.iter().map(|x| 1e4 * x * x).collect();
    let hf = VarianceFunction::from_grid(Provenance::ClosedForm, VixConvention::default(), vec![100.0, 0.03], v_axis(&nodes), values).unwrap();
    assert!(gradient_h(&hf, &[100.0, 0.012]).at_boundary);
    assert!(!gradient_h(&hf, &[100.0, 0.03]).at_boundary);
}

#[test]
fn w_errors_on_non_positive_h() {
    let hf = VarianceFunction::from_grid(Provenance::ClosedForm, VixConvention::default(), vec![100.0], vec![], vec![0.0]).unwrap();
    assert_eq!(w_from_h(&hf, &[100.0]), Err(Error::NonPositiveH(0.0)));
}

#[test]
fn heston_w_matches_closed_form() {
    let (a, b) = heston_ab();
    let m = heston(0.04);
    let hf = h_by_fk(stoch_vol(&m), &VixConvention::default(), &FkOptions::default()).unwrap();
    for v in [0.02, 0.04, 0.07] {
        let w = w_from_h(&hf, &[100.0, v]).unwrap();
        let expected = b / (2.0 * (a + b * v));
        assert!((w[1] / expected - 1.0).abs() < 1e-4);
    }
}

#[test]
fn linear_vol_restricted_model_has_w_sigma_equal_gamma() {
    let gamma = 0.6;
    let m = builtin("gbm_restricted", &params(&[("gamma", gamma), ("x0", 0.04)])).unwrap();
    let s = stoch_vol(&m);
    let hf = h_by_fk(s, &VixConvention::default(), &FkOptions::default()).unwrap();
    let (lo, hi) = hf.interior[0];
    for &x in hf.axes[0].nodes.iter().filter(|&&x| x >= lo && x <= hi) {
        let w = w_from_h(&hf, &[100.0, x]).unwrap();
        assert!((w[1] * s.sigma.value(x) / gamma - 1.0).abs() < 1e-2, "{x}");
    }
}

#[test]
fn matched_curve_for_linear_vol_model() {
    // √h(X_T) = 100√X_T with X lognormal: E√X_T = √x0·e^{−(2γ)²T/8}.
    let gamma = 0.6;
    let m = builtin("gbm_restricted", &params(&[("gamma", gamma), ("x0", 0.04)])).unwrap();
    let s = stoch_vol(&m);
    let hf = h_by_fk(s, &VixConvention::default(), &FkOptions::default()).unwrap();
    let curve = matched_curve(s, &hf, 0.5, 100).unwrap();
    for t in [0.0, 0.1, 0.25, 0.5] {
        let expected = 100.0 * 0.2 * (-(2.0 * gamma).powi(2) * t / 8.0).exp();
        assert!((curve.value(t) / expected - 1.0).abs() < 1e-3, "{t}: {}", curve.value(t));
    }
}

#[test]
fn zero_partials_give_zero_w() {
    let strikes: Vec<f64> = (50..=150).map(f64::from).collect();
    let first = vec![vec![0.0; strikes.len()]; 2];
    let out = w_from_option_grid(&first, &strikes, 400.0, &VixConvention::default()).unwrap();
    assert_eq!(out.w, vec![0.0, 0.0]);
    assert!(!out.truncation_warning);
    assert!(w_from_option_grid(&first, &strikes, 0.0, &VixConvention::default()).is_err());
}

fn strikes(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

#[test]
fn black_surface_w_in_forward_is_negligible() {
    let tau = 30.0 / 365.0;
    let ks = strikes(20.0, 400.0, 0.1);
    let p = bump_partials(&BlackSurface { sigma: 0.2 }, &[100.0], tau, &ks, 1e-4, 1e-3);
    let out = w_from_option_grid(&p.first, &ks, 400.0, &VixConvention::default()).unwrap();
    assert!(out.w[0].abs() < 1e-4, "{}", out.w[0]);
    assert!(!out.truncation_warning);
}

#[test]
fn narrow_strike_grid_raises_truncation_warning() {
    let tau = 30.0 / 365.0;
    let ks = strikes(95.0, 105.0, 0.5);
    let surface = HestonSurface { kappa: KAPPA, theta: THETA, eta: 0.3, rho: -0.7 };
    let p = bump_partials(&surface, &[100.0, 0.04], tau, &ks, 1e-4, 1e-3);
    let out = w_from_option_grid(&p.first, &ks, 400.0, &VixConvention::default()).unwrap();
    assert!(out.truncation_warning && out.truncation_ratio > 1e-6);
}

#[test]
fn heston_prices_converge_to_parity_and_black_limit() {
    // Vanishing vol-of-vol approaches Black with the integrated variance.
    let tau = 30.0 / 365.0;
    let surface = HestonSurface { kappa: KAPPA, theta: THETA, eta: 1e-4, rho: 0.0 };
    let ks = [80.0, 100.0, 120.0];
    let mut out = [0.0; 3];
    heston_otm_prices(&surface, 100.0, 0.04, tau, 100.0, &ks, &mut out);
    for (k, p) in ks.iter().zip(out) {
        let (c, put) = vixlab_core::black::black_call_put(100.0, *k, 0.2, tau);
        let expected = if *k < 100.0 { put } else if *k > 100.0 { c } else { 0.5 * (c + put) };
        assert!((p - expected).abs() < 1e-5, "{k}: {p} vs {expected}");
    }
}

#[test]
fn heston_surface_w_matches_gradient_representation() {
    let tau = 30.0 / 365.0;
    let m = heston(0.04);
    let hf = h_by_fk(stoch_vol(&m), &VixConvention::default(), &FkOptions::default()).unwrap();
    let surface = HestonSurface { kappa: KAPPA, theta: THETA, eta: 0.3, rho: -0.7 };
    let ks = strikes(30.0, 330.0, 0.1);
    let x = [100.0, 0.04];
    let p = bump_partials(&surface, &x, tau, &ks, 1e-4, 1e-3);
    let h = hf.value(&x);
    let from_grid = w_from_option_grid(&p.first, &ks, h, &VixConvention::default()).unwrap();
    let from_h = w_from_h(&hf, &x).unwrap();
    assert!((from_grid.w[1] / from_h[1] - 1.0).abs() < 1e-2);
    assert!(from_grid.w[0].abs() < 1e-4);
}

#[test]
fn u2_with_unit_scale_matches_direct_substitution() {
    let tau = 30.0 / 365.0;
    let conv = VixConvention { scale: 1.0, ..VixConvention::default() };
    let hf = VarianceFunction::from_grid(Provenance::ClosedForm, conv, vec![100.0], vec![], vec![400.0]).unwrap();
    let m = builtin("gbm_index", &params(&[("sigma0", 0.2)])).unwrap();
    let c = vix_coefficients(&hf, &m, 0.0, &[100.0], None).unwrap();
    let expected = -1.0 / (4.0 * tau * 400.0 * 1e4);
    assert!((c.u2 / expected - 1.0).abs() < 1e-14);
    assert_eq!(c.v, 20.0);
    assert!(c.u1.is_none());
}

#[test]
fn u2_carries_the_strike_measure_scale() {
    let tau = 30.0 / 365.0;
    let hf = VarianceFunction::from_grid(Provenance::ClosedForm, VixConvention::default(), vec![100.0], vec![], vec![400.0]).unwrap();
    let m = builtin("gbm_index", &params(&[("sigma0", 0.2)])).unwrap();
    let c = vix_coefficients(&hf, &m, 0.0, &[100.0], None).unwrap();
    assert!((c.u2 / (-2e4 / (4.0 * tau * 400.0 * 1e4)) - 1.0).abs() < 1e-14);
}

#[test]
fn coefficient_w_is_w_from_h() {
    let m = heston(0.04);
    let hf = h_by_fk(stoch_vol(&m), &VixConvention::default(), &FkOptions::default()).unwrap();
    let x = [100.0, 0.05];
    let c = vix_coefficients(&hf, &m, 0.0, &x, None).unwrap();
    assert_eq!(c.w, w_from_h(&hf, &x).unwrap());
    assert!(vix_coefficients(&hf, &m, 0.0, &[100.0], None).is_err());
}

#[test]
fn heston_surface_coefficients_are_symmetric_and_match_h_route() {
    let m = heston(0.04);
    let hf = h_by_fk(stoch_vol(&m), &VixConvention::default(), &FkOptions::default()).unwrap();
    let surface = HestonSurface { kappa: KAPPA, theta: THETA, eta: 0.3, rho: -0.7 };
    let input = SurfaceInput::new(&surface, strikes(30.0, 330.0, 0.1));
    let x = [100.0, 0.04];
    let s = vix_coefficients(&hf, &m, 0.0, &x, Some(&input)).unwrap();
    let h = vix_coefficients(&hf, &m, 0.0, &x, None).unwrap();
    assert_eq!(s.uij[1], s.uij[2]);
    assert!((s.uij[3] / h.uij[3] - 1.0).abs() < 1e-3);
    assert!((s.uij[0] / h.uij[0] - 1.0).abs() < 1e-3);
    assert!(s.uij[1].abs() < 1e-4);
    assert!((s.w[1] / h.w[1] - 1.0).abs() < 1e-3);
    assert_eq!(s.u1, Some(0.0));
}

#[test]
fn ito_drift_of_vix_for_heston_equals_generator() {
    // V = √(a + b·v): drift/V = bκ(θ−v)/(2h) − b²η²v/(8h²), vol/V = bη√v/(2h) on the Z factor.
    let (a, b) = heston_ab();
    let m = heston(0.04);
    let hf = h_by_fk(stoch_vol(&m), &VixConvention::default(), &FkOptions::default()).unwrap();
    let v = 0.06;
    let h = a + b * v;
    let (drift, vol) = ito_drift_of_sqrt_h(&hf, &m, &[100.0, v]).unwrap();
    let expected = b * KAPPA * (THETA - v) / (2.0 * h) - b * b * 0.09 * v / (8.0 * h * h);
    assert!((drift - expected).abs() < 1e-4 * expected.abs() + 1e-6, "{drift} vs {expected}");
    assert!(vol[0].abs() < 1e-12);
    assert!((vol[1] / (b * 0.3 * v.sqrt() / (2.0 * h)) - 1.0).abs() < 1e-4);
}

#[test]
fn mc_scheme_override_is_respected() {
    let conv = VixConvention::default();
    let m = heston(0.04);
    let a = h_by_mc(&m, &conv, &[], &McOptions { scheme: Some(Scheme::Milstein), ..mc(500, 20) }, &Serial).unwrap();
    let b = h_by_mc(&m, &conv, &[], &mc(500, 20), &Serial).unwrap();
    assert_ne!(a.values[0], b.values[0]);
    assert!(h_by_mc(&m, &conv, &[], &mc(1, 20), &Serial).is_err());
}

#[test]
fn variance_function_round_trips_nodes() {
    let hf = VarianceFunction::from_grid(
        Provenance::ClosedForm,
        VixConvention::default(),
        vec![100.0, 0.04],
        vec![Axis { component: 0, nodes: vec![90.0, 100.0, 110.0] }, Axis { component: 1, nodes: vec![0.02, 0.04, 0.06] }],
        (0..9).map(|i| 300.0 + i as f64).collect(),
    )
    .unwrap();
    let states = hf.node_states();
    assert_eq!(states[5], vec![100.0, 0.06]);
    for (s, v) in states.iter().zip(&hf.values) {
        assert!((hf.value(s) - v).abs() < 1e-12);
    }
    assert!(VarianceFunction::from_grid(Provenance::Fk, VixConvention::default(), vec![100.0], vec![], vec![1.0, 2.0]).is_err());
}
