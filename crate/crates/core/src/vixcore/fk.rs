use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{Axis, Provenance, TimeSlices, VarianceFunction};
use crate::math::{self, solve_tridiagonal};
use crate::models::{Curve, StochVolSpec, VixConvention};
use crate::scalar::ScalarFn;
use crate::{Error, Result};

/// Grid settings for the Feynman–Kac solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkOptions {
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
    #[serde(default = "default_steps")]
    pub time_steps: usize,
    /// Grid spans `x0·e^{±half_width·s}` with `s` the a-priori log-vol scale.
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Explicit state nodes, overriding the log-spaced default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
}

fn default_nodes() -> usize {
    400
}

fn default_steps() -> usize {
    200
}

fn default_half_width() -> f64 {
    6.0
}

impl Default for FkOptions {
    fn default() -> Self {
        Self { n_nodes: default_nodes(), time_steps: default_steps(), half_width: default_half_width(), nodes: None }
    }
}

fn log_scale(spec: &StochVolSpec, tau: f64) -> f64 {
    let s = spec.sigma.value(spec.x0).abs() / spec.x0 * tau.sqrt();
    s.clamp(0.1, 1.5)
}

/// Backward Kolmogorov solve in time-to-go `s`:
/// `G_s = μG_x + ½σ²G_x x + source(x)`, `G(0, ·) = terminal`.
///
/// Crank–Nicolson in time, central differences in space with upwinding where the cell
/// Péclet number exceeds 2, and `G_xx = 0` at both ends. Returns `steps + 1` slices,
/// slice `k` at time-to-go `k·horizon/steps`.
pub fn fk_backward(
    mu: &ScalarFn,
    sigma: &ScalarFn,
    nodes: &[f64],
    horizon: f64,
    steps: usize,
    source: &[f64],
    terminal: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = nodes.len();
    if n < 3 || steps == 0 || source.len() != n || terminal.len() != n {
        return Err(Error::InvalidParameter("solver needs at least three nodes and one time step".into()));
    }
    let dt = horizon / steps as f64;
    // Spatial operator rows: (lower, diag, upper).
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    for i in 0..n {
        let x = nodes[i];
        let m = mu.value(x);
        if i == 0 {
            let h = nodes[1] - nodes[0];
            di[0] = -m / h;
            up[0] = m / h;
            continue;
        }
        if i == n - 1 {
            let h = nodes[n - 1] - nodes[n - 2];
            lo[i] = -m / h;
            di[i] = m / h;
            continue;
        }
        let hl = x - nodes[i - 1];
        let hr = nodes[i + 1] - x;
        let diff = 0.5 * sigma.value(x).powi(2);
        let a2 = 2.0 * diff / (hl + hr);
        lo[i] = a2 / hl;
        up[i] = a2 / hr;
        di[i] = -a2 / hl - a2 / hr;
        let peclet = if diff > 0.0 { m.abs() * hl.max(hr) / diff } else { f64::INFINITY };
        if peclet > 2.0 {
            if m > 0.0 {
                di[i] -= m / hr;
                up[i] += m / hr;
            } else {
                lo[i] -= m / hl;
                di[i] += m / hl;
            }
        } else {
            lo[i] += -m * hr / (hl * (hl + hr));
            di[i] += m * (hr - hl) / (hl * hr);
            up[i] += m * hl / (hr * (hl + hr));
        }
    }
    let mut slices = Vec::with_capacity(steps + 1);
    slices.push(terminal.to_vec());
    let mut g = terminal.to_vec();
    let (ll, dd, uu): (Vec<f64>, Vec<f64>, Vec<f64>) = (
        lo.iter().map(|v| -0.5 * dt * v).collect(),
        di.iter().map(|v| 1.0 - 0.5 * dt * v).collect(),
        up.iter().map(|v| -0.5 * dt * v).collect(),
    );
    let scale = terminal.iter().chain(source).fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for _ in 0..steps {
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut r = g[i] + 0.5 * dt * di[i] * g[i] + dt * source[i];
                if i > 0 {
                    r += 0.5 * dt * lo[i] * g[i - 1];
                }
                if i + 1 < n {
                    r += 0.5 * dt * up[i] * g[i + 1];
                }
                r
            })
            .collect();
        if !solve_tridiagonal(&ll, &dd, &uu, &mut rhs) || rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable { suggested_steps: 4 * steps });
        }
        g = rhs;
        slices.push(g.clone());
    }
    let floor = -1e-9 * scale * horizon.max(1.0);
    let nonnegative = terminal.iter().chain(source).all(|&v| v >= 0.0);
    if nonnegative && slices.iter().flatten().any(|&v| v < floor) {
        return Err(Error::Unstable { suggested_steps: 4 * steps });
    }
    Ok(slices)
}

/// Log-spaced state nodes used for `spec`.
pub fn fk_nodes(spec: &StochVolSpec, convention: &VixConvention, opts: &FkOptions) -> (Vec<f64>, f64) {
    let s = log_scale(spec, convention.tau_star);
    let nodes = match &opts.nodes {
        Some(n) => n.clone(),
        None => {
            let n = opts.n_nodes.max(3);
            let w = opts.half_width * s;
            (0..n).map(|i| spec.x0 * (-w + 2.0 * w * i as f64 / (n - 1) as f64).exp()).collect()
        }
    };
    (nodes, s)
}

/// Solves `H_t + μH_x + ½σ²H_xx + (N/(2τ*))x = 0`, `H(τ*, x) = 0`, and returns `h = H(0, ·)`
/// with all time slices attached.
pub fn h_by_fk(spec: &StochVolSpec, convention: &VixConvention, opts: &FkOptions) -> Result<VarianceFunction> {
    convention.validate()?;
    let (nodes, s) = fk_nodes(spec, convention, opts);
    let c = convention.source_scale();
    let source: Vec<f64> = nodes.iter().map(|&x| c * x).collect();
    let terminal = vec![0.0; nodes.len()];
    let slices = fk_backward(&spec.mu, &spec.sigma, &nodes, convention.tau_star, opts.time_steps, &source, &terminal)?;
    let steps = opts.time_steps;
    let dt = convention.tau_star / steps as f64;
    // Slice k is at time-to-go k·dt, i.e. calendar time τ* − k·dt.
    let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
    let values: Vec<f64> = (0..=steps).rev().flat_map(|k| slices[k].iter().copied()).collect();
    let h = slices[steps].clone();
    let mut hf = VarianceFunction::from_grid(
        Provenance::Fk,
        convention.clone(),
        alloc::vec![spec.f0, spec.x0],
        alloc::vec![Axis { component: 1, nodes: nodes.clone() }],
        h,
    )?;
    let inner = 0.5 * opts.half_width * s;
    if opts.nodes.is_none() {
        hf.interior = alloc::vec![(spec.x0 * (-inner).exp(), spec.x0 * inner.exp())];
    }
    hf.time_slices = Some(TimeSlices { times, values });
    Ok(hf)
}

/// Relative residual of `∂_tH(0,x) + μh' + ½σ²h'' + (N/(2τ*))x` at every node of an FK solution,
/// normalized by the source term.
pub fn stationarity_residual(spec: &StochVolSpec, hf: &VarianceFunction) -> Result<Vec<f64>> {
    let slices = hf.time_slices.as_ref().ok_or_else(|| Error::Missing("time slices of H".into()))?;
    if hf.axes.len() != 1 || slices.times.len() < 3 {
        return Err(Error::Missing("one-axis solution with at least two time steps".into()));
    }
    let nodes = &hf.axes[0].nodes;
    let n = nodes.len();
    let dt = slices.times[1] - slices.times[0];
    let c = hf.convention.source_scale();
    Ok((0..n)
        .map(|i| {
            let g0 = slices.values[i];
            let g1 = slices.values[n + i];
            let g2 = slices.values[2 * n + i];
            let dtg = (-3.0 * g0 + 4.0 * g1 - g2) / (2.0 * dt);
            let x = nodes[i];
            let r = dtg + spec.mu.value(x) * hf.gradients[0][i] + 0.5 * spec.sigma.value(x).powi(2) * hf.curvatures[0][i] + c * x;
            r.abs() / (c * x).abs().max(1e-300)
        })
        .collect())
}

/// Initial futures curve `T ↦ E[√h(X_T) | X_0 = x0]` on `[0, t_star]`, from the same
/// backward equation with zero source and terminal data `√h`.
pub fn matched_curve(spec: &StochVolSpec, hf: &VarianceFunction, t_star: f64, steps: usize) -> Result<Curve> {
    if hf.axes.len() != 1 || hf.axes[0].component != 1 {
        return Err(Error::Missing("variance function on the variance-state axis".into()));
    }
    let nodes = &hf.axes[0].nodes;
    let terminal: Vec<f64> = hf.values.iter().map(|&h| h.max(0.0).sqrt()).collect();
    let source = vec![0.0; nodes.len()];
    let slices = fk_backward(&spec.mu, &spec.sigma, nodes, t_star, steps, &source, &terminal)?;
    let maturities: Vec<f64> = (0..=steps).map(|k| t_star * k as f64 / steps as f64).collect();
    let values: Vec<f64> = slices.iter().map(|u| math::pchip_eval(nodes, u, spec.x0).0).collect();
    Ok(Curve::Tabulated { maturities, values })
}
