use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;

use super::family::FamilyMesh;
use super::report::{describe_skips, reduce_paths, Acc, CheckName, CheckResult, Location, ResidualField, SKIP};
use super::{ImpliedVixPath, MarketPriceOfRisk};
use crate::models::{ModelSpec, TermStructureSpec};
use crate::sde::{PathBundle, PathMap};
use crate::vixcore::{
    ito_drift_of_sqrt_h, stationarity_residual, vix_coefficients, w_from_h, SurfaceInput, VarianceFunction,
};
use crate::{Error, Result};

const EPS: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_model(model: &ModelSpec, bundle: &PathBundle) -> Result<()> {
    if model.state_dim() != bundle.dim || model.n_factors() != bundle.n_factors {
        return Err(Error::Dimension(format!(
            "model has {} components and {} factors, bundle {} and {}",
            model.state_dim(),
            model.n_factors(),
            bundle.dim,
            bundle.n_factors
        )));
    }
    Ok(())
}

/// Per-step result from an accumulator with one column per grid time.
fn per_step_result(name: CheckName, acc: &Acc, bundle: &PathBundle, cols: core::ops::Range<usize>, tol: f64) -> CheckResult {
    let offset = cols.start;
    let (max, col, path, mean, count) = acc.summary(cols.clone());
    let mut r = CheckResult::new(name, max, mean, tol);
    let step = col - offset;
    r.location = Location {
        path: Some(path),
        step: Some(step),
        time: Some(bundle.grid.time(step)),
        state: Some(bundle.state(path, step).to_vec()),
        ..Location::default()
    };
    r.evaluated = count;
    r.skipped = acc.skipped;
    r.field = ResidualField::new(&["t", "max", "mean"]);
    for c in cols {
        if acc.count[c] > 0 {
            r.field.rows.push(vec![bundle.grid.time(c - offset), acc.max[c], acc.mean(c)]);
        }
    }
    r
}

/// `|μ⁰ + λ·σ⁰|` along every path.
pub fn check_cc1<E: PathMap>(
    model: &ModelSpec,
    lambda: &MarketPriceOfRisk,
    bundle: &PathBundle,
    tol: f64,
    exec: &E,
) -> Result<CheckResult> {
    check_model(model, bundle)?;
    lambda.check_dim(bundle.n_factors, bundle.dim)?;
    let d = bundle.n_factors;
    let cols = bundle.grid.n_steps + 1;
    let acc = reduce_paths(exec, bundle.n_paths, cols, |p, out| {
        let mut sig = vec![0.0; d];
        let mut lam = vec![0.0; d];
        for (n, o) in out.iter_mut().enumerate() {
            let x = bundle.state(p, n);
            let mu = model.index_relative(x, &mut sig);
            lambda.eval(bundle.grid.time(n), x, &mut lam);
            *o = (mu + dot(&lam, &sig)).abs();
        }
        Ok(())
    })?;
    Ok(per_step_result(CheckName::Cc1, &acc, bundle, 0..cols, tol))
}

/// `|μ^V(t, T) + λ_t·ν(t, T)|` over the maturity mesh.
pub fn check_cc2<E: PathMap>(
    ts: &TermStructureSpec,
    lambda: &MarketPriceOfRisk,
    bundle: &PathBundle,
    tol: f64,
    exec: &E,
) -> Result<CheckResult> {
    lambda.check_dim(bundle.n_factors, bundle.dim)?;
    let mesh = FamilyMesh::new(ts, bundle)?;
    let d = bundle.n_factors;
    let steps = bundle.grid.n_steps;
    let last = mesh.last;
    let paths = if lambda.state_dependent() { bundle.n_paths } else { 1 };
    let cols = (steps + 1) * (last + 1);
    let acc = reduce_paths(exec, paths, cols, |p, out| {
        let mut lam = vec![0.0; d];
        for n in 0..=steps {
            lambda.eval(bundle.grid.time(n), bundle.state(p, n), &mut lam);
            for m in 0..=last {
                out[n * (last + 1) + m] = if m < n {
                    SKIP
                } else {
                    (mesh.mu[mesh.at(n, m)] + dot(&lam, mesh.nu_at(n, m))).abs()
                };
            }
        }
        Ok(())
    })?;
    let (max, col, path, mean, count) = acc.summary(0..cols);
    let mut r = CheckResult::new(CheckName::Cc2, max, mean, tol);
    let (n, m) = (col / (last + 1), col % (last + 1));
    r.location = Location {
        path: lambda.state_dependent().then_some(path),
        step: Some(n),
        time: Some(bundle.grid.time(n)),
        maturity: Some(mesh.maturities[m]),
        ..Location::default()
    };
    r.evaluated = count;
    r.field = ResidualField::new(&["t", "max", "argmax_maturity"]);
    for n in 0..=steps {
        let row = n * (last + 1)..(n + 1) * (last + 1);
        let (best, bc, _, _, _) = acc.summary(row);
        r.field.rows.push(vec![bundle.grid.time(n), best, mesh.maturities[bc - n * (last + 1)]]);
    }
    Ok(r)
}

/// `ν^j(t, t)` for every factor.
pub fn nu_diagonal(ts: &TermStructureSpec, t: f64) -> Vec<f64> {
    ts.nu.iter().map(|f| f.eval(t, t)).collect()
}

/// Signed diffusion mismatch `ν^j(t, t) − Σ_i w^(i) b^{ij}(x)` per factor.
pub fn cc3_residual_form(
    hf: &VarianceFunction,
    model: &ModelSpec,
    ts: &TermStructureSpec,
    t: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let (d, m) = (model.state_dim(), model.n_factors());
    let w = w_from_h(hf, x)?;
    let mut b = vec![0.0; d * m];
    model.diffusion(x, &mut b);
    let nu = nu_diagonal(ts, t);
    Ok((0..m).map(|j| nu[j] - (0..d).map(|i| w[i] * b[i * m + j]).sum::<f64>()).collect())
}

/// Signed genPDE residual `Σ_i b^{ij}(x)∂_i h − 2h ν^j(t, t)` per factor.
pub fn genpde_residual_form(
    hf: &VarianceFunction,
    model: &ModelSpec,
    ts: &TermStructureSpec,
    t: f64,
    x: &[f64],
) -> Vec<f64> {
    let (d, m) = (model.state_dim(), model.n_factors());
    let h = hf.value(x);
    let g = hf.gradient(x).values;
    let mut b = vec![0.0; d * m];
    model.diffusion(x, &mut b);
    let nu = nu_diagonal(ts, t);
    (0..m).map(|j| (0..d).map(|i| g[i] * b[i * m + j]).sum::<f64>() - 2.0 * h * nu[j]).collect()
}

/// Relative diffusion mismatch `|ν^j − Σ_i w^(i) b^{ij}| / (|ν^j| + ε)` along every path.
pub fn check_cc3<E: PathMap>(
    ts: &TermStructureSpec,
    model: &ModelSpec,
    hf: &VarianceFunction,
    bundle: &PathBundle,
    tol: f64,
    exec: &E,
) -> Result<CheckResult> {
    check_model(model, bundle)?;
    ts.validate(bundle.n_factors)?;
    let m = bundle.n_factors;
    let times = bundle.grid.n_steps + 1;
    let acc = reduce_paths(exec, bundle.n_paths, times * m, |p, out| {
        for n in 0..times {
            let x = bundle.state(p, n);
            let t = bundle.grid.time(n);
            let row = &mut out[n * m..(n + 1) * m];
            if !hf.in_interior(x) {
                row.fill(SKIP);
                continue;
            }
            let res = cc3_residual_form(hf, model, ts, t, x)?;
            let nu = nu_diagonal(ts, t);
            for j in 0..m {
                row[j] = res[j].abs() / (nu[j].abs() + EPS);
            }
        }
        Ok(())
    })?;
    let (max, col, path, mean, count) = acc.summary(0..times * m);
    let mut r = CheckResult::new(CheckName::Cc3, max, mean, tol);
    let (n, j) = (col / m, col % m);
    r.location = Location {
        path: Some(path),
        step: Some(n),
        time: Some(bundle.grid.time(n)),
        state: Some(bundle.state(path, n).to_vec()),
        factor: Some(j),
        ..Location::default()
    };
    r.evaluated = count;
    r.skipped = acc.skipped;
    r.note = describe_skips(acc.skipped);
    r.field = ResidualField::new(&["t", "factor", "max", "mean"]);
    for c in 0..times * m {
        if acc.count[c] > 0 {
            r.field.rows.push(vec![bundle.grid.time(c / m), (c % m) as f64, acc.max[c], acc.mean(c)]);
        }
    }
    Ok(r)
}

/// Relative genPDE residual `|Σ b∂h − 2hν| / (2h|ν| + ε)` on the interior nodes of `hf` at
/// `n_times` times spread over `[0, T*]`.
pub fn check_genpde(
    hf: &VarianceFunction,
    model: &ModelSpec,
    ts: &TermStructureSpec,
    n_times: usize,
    tol: f64,
) -> Result<CheckResult> {
    if hf.state_dim != model.state_dim() {
        return Err(Error::Dimension("variance function and model disagree".into()));
    }
    ts.validate(model.n_factors())?;
    let m = model.n_factors();
    let times: Vec<f64> = if n_times <= 1 {
        vec![0.0]
    } else {
        (0..n_times).map(|k| ts.t_star * k as f64 / (n_times - 1) as f64).collect()
    };
    let mut cols: Vec<&str> = vec!["t"];
    let names: Vec<String> = hf.axes.iter().map(|a| format!("x{}", a.component)).collect();
    cols.extend(names.iter().map(String::as_str));
    cols.extend(["factor", "residual"]);
    let mut field = ResidualField::new(&cols);
    let (mut best, mut sum, mut count, mut skipped) = (f64::NEG_INFINITY, 0.0, 0usize, 0usize);
    let mut loc = Location::default();
    for x in hf.node_states() {
        if !hf.in_interior(&x) {
            skipped += 1;
            continue;
        }
        let h = hf.value(&x);
        for &t in &times {
            let res = genpde_residual_form(hf, model, ts, t, &x);
            let nu = nu_diagonal(ts, t);
            for j in 0..m {
                let v = res[j].abs() / (2.0 * h.abs() * nu[j].abs() + EPS);
                let v = if h > 0.0 && v.is_finite() { v } else { f64::INFINITY };
                if v > best {
                    best = v;
                    loc = Location { time: Some(t), state: Some(x.clone()), factor: Some(j), ..Location::default() };
                }
                sum += v;
                count += 1;
                let mut row = vec![t];
                row.extend(hf.axes.iter().map(|a| x[a.component]));
                row.extend([j as f64, v]);
                field.rows.push(row);
            }
        }
    }
    if count == 0 {
        return Err(Error::Missing("interior nodes of the variance function".into()));
    }
    let mut r = CheckResult::new(CheckName::Genpde, best, sum / count as f64, tol);
    r.location = loc;
    r.evaluated = count;
    r.skipped = skipped;
    r.field = field;
    Ok(r)
}

/// Relative drift of `V = √h(X)` under the pricing measure, `(a_V + s_V·λ)`, together with
/// the loadings.
fn vix_drift(
    hf: &VarianceFunction,
    model: &ModelSpec,
    t: f64,
    x: &[f64],
    lam: &[f64],
    surface: Option<&SurfaceInput<'_>>,
) -> Result<f64> {
    let (a, s) = ito_drift_of_sqrt_h(hf, model, x)?;
    let a = match surface {
        None => a,
        Some(surf) => {
            let c = vix_coefficients(hf, model, t, x, Some(surf))?;
            let u1 = c.u1.ok_or_else(|| Error::Missing("calendar derivative of the option surface".into()))?;
            let (d, m) = (model.state_dim(), model.n_factors());
            let mut mu = vec![0.0; d];
            let mut b = vec![0.0; d * m];
            model.drift(x, &mut mu);
            model.diffusion(x, &mut b);
            let rho = model.correlation();
            let mut total = u1 + dot(&mu, &c.w);
            for i in 0..d {
                for j in 0..d {
                    let cij: f64 =
                        (0..m).flat_map(|k| (0..m).map(move |l| (k, l))).map(|(k, l)| b[i * m + k] * rho[k * m + l] * b[j * m + l]).sum();
                    total += cij * c.uij[i * d + j];
                    if i == 0 && j == 0 {
                        total += cij * c.u2;
                    }
                }
            }
            total
        }
    };
    Ok(a + dot(&s, lam))
}

/// Drift matching between `V = √h(X)` and the implied VIX: instantaneous
/// `|a_V − ξ| / (|ξ| + ε)` and integrated `|∫(a_V − ξ)dt| / (∫|ξ|dt + ε)`, both under the
/// measure selected by `λ`.
#[allow(clippy::too_many_arguments)]
pub fn check_cc4<E: PathMap>(
    model: &ModelSpec,
    hf: &VarianceFunction,
    bundle: &PathBundle,
    ivp: &ImpliedVixPath,
    lambda: &MarketPriceOfRisk,
    surface: Option<&SurfaceInput<'_>>,
    tol: f64,
    exec: &E,
) -> Result<(CheckResult, CheckResult)> {
    check_model(model, bundle)?;
    lambda.check_dim(bundle.n_factors, bundle.dim)?;
    if ivp.xi.is_none() {
        return Err(Error::Missing("xi of the implied VIX".into()));
    }
    if ivp.n_paths != bundle.n_paths || ivp.n_times() != bundle.grid.n_steps + 1 {
        return Err(Error::Dimension("implied VIX paths do not match the bundle".into()));
    }
    let steps = bundle.grid.n_steps;
    let dt = bundle.grid.dt();
    let d = bundle.n_factors;
    let acc = reduce_paths(exec, bundle.n_paths, 2 * steps, |p, out| {
        let mut lam = vec![0.0; d];
        let (mut gap, mut scale) = (0.0, 0.0);
        for n in 0..steps {
            let x = bundle.state(p, n);
            let t = bundle.grid.time(n);
            let xi = ivp.xi_at(p, n).unwrap_or(f64::NAN);
            if hf.in_interior(x) {
                lambda.eval(t, x, &mut lam);
                let a = vix_drift(hf, model, t, x, &lam, surface)?;
                out[n] = (a - xi).abs() / (xi.abs() + EPS);
                gap += (a - xi) * dt;
                scale += xi.abs() * dt;
            } else {
                out[n] = SKIP;
            }
            out[steps + n] = if scale > 0.0 || gap != 0.0 { gap.abs() / (scale + EPS) } else { 0.0 };
        }
        Ok(())
    })?;
    let mut inst = per_step_result(CheckName::Cc4, &acc, bundle, 0..steps, tol);
    inst.note = describe_skips(acc.skipped);
    let mut integ = per_step_result(CheckName::Cc4Integrated, &acc, bundle, steps..2 * steps, tol);
    // Integrated residual at column n covers [0, t_{n+1}].
    for row in integ.field.rows.iter_mut() {
        row[0] += dt;
    }
    integ.location.step = integ.location.step.map(|s| s + 1);
    integ.location.time = integ.location.step.map(|s| bundle.grid.time(s));
    integ.location.state = None;
    integ.skipped = 0;
    Ok((inst, integ))
}

/// `|√h(X_t) − Ṽ_t| / Ṽ_t` along every path.
pub fn check_c1_pathwise<E: PathMap>(
    hf: &VarianceFunction,
    ivp: &ImpliedVixPath,
    bundle: &PathBundle,
    tol: f64,
    exec: &E,
) -> Result<CheckResult> {
    if ivp.n_paths != bundle.n_paths || ivp.n_times() != bundle.grid.n_steps + 1 {
        return Err(Error::Dimension("implied VIX paths do not match the bundle".into()));
    }
    let cols = bundle.grid.n_steps + 1;
    let acc = reduce_paths(exec, bundle.n_paths, cols, |p, out| {
        for (n, o) in out.iter_mut().enumerate() {
            let v = hf.value(bundle.state(p, n)).max(0.0).sqrt();
            let vt = ivp.vix_at(p, n);
            *o = (v - vt).abs() / vt;
        }
        Ok(())
    })?;
    Ok(per_step_result(CheckName::C1Pathwise, &acc, bundle, 0..cols, tol))
}

/// Residual of the stationary equation for `h` on the interior nodes of a Feynman–Kac solution.
pub fn check_stationarity(model: &ModelSpec, hf: &VarianceFunction, tol: f64) -> Result<CheckResult> {
    let spec = match model {
        ModelSpec::StochVol(s) => s,
        ModelSpec::Vector(_) => return Err(Error::Missing("one-factor variance dynamics".into())),
    };
    let res = stationarity_residual(spec, hf)?;
    let nodes = &hf.axes[0].nodes;
    let mut field = ResidualField::new(&["x", "residual"]);
    let (mut best, mut sum, mut count, mut loc) = (f64::NEG_INFINITY, 0.0, 0usize, Location::default());
    for (i, &x) in nodes.iter().enumerate() {
        let mut state = hf.base_state.clone();
        state[hf.axes[0].component] = x;
        if !hf.in_interior(&state) {
            continue;
        }
        let v = if res[i].is_nan() { f64::INFINITY } else { res[i] };
        if v > best {
            best = v;
            loc = Location { state: Some(state), ..Location::default() };
        }
        sum += v;
        count += 1;
        field.rows.push(vec![x, v]);
    }
    let mut r = CheckResult::new(CheckName::Stationarity, best, sum / count.max(1) as f64, tol);
    r.location = loc;
    r.evaluated = count;
    r.skipped = nodes.len() - count;
    r.field = field;
    Ok(r)
}
