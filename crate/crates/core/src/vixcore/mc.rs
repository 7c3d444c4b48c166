use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Axis, Provenance, VarianceFunction};
use crate::math::mean_and_se;
use crate::models::{ModelSpec, Scheme, StochVolSpec, VixConvention};
use crate::sde::{integrate_path, path_increments, path_rng, Cholesky, PathMap, TimeGrid};
use crate::{Error, Result};

/// Monte Carlo settings for [`h_by_mc`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McOptions {
    pub n_paths: usize,
    /// Steps over `[t, t + τ*]`.
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    /// Start time `t`; dynamics are time-homogeneous, so this only shifts the grid.
    #[serde(default)]
    pub start_time: f64,
}

/// Estimates `h` at every node of `axes` (the same random streams are reused across nodes).
///
/// Stochastic-volatility models use `(N/(2τ*))·E∫X ds`; vector models use the log-contract
/// form `−(N/τ*)·E ln(F_{t+τ*}/F_t)` with `∫σ⁰·dW` as a zero-mean control variate.
pub fn h_by_mc<E: PathMap>(
    model: &ModelSpec,
    convention: &VixConvention,
    axes: &[Axis],
    opts: &McOptions,
    exec: &E,
) -> Result<VarianceFunction> {
    model.validate()?;
    convention.validate()?;
    if opts.n_paths < 2 {
        return Err(Error::EmptySimulation);
    }
    let grid = TimeGrid::new(opts.start_time, opts.start_time + convention.tau_star, opts.n_steps)?;
    let scheme = opts.scheme.unwrap_or_else(|| model.default_scheme());
    let base = model.initial_state();
    let size = axes.iter().map(|a| a.nodes.len()).product();
    let nodes = VarianceFunction::from_grid(Provenance::Mc, convention.clone(), base.clone(), axes.to_vec(), vec![0.0; size])?
        .node_states();
    let mut values = Vec::with_capacity(nodes.len());
    let mut errors = Vec::with_capacity(nodes.len());
    for (k, x0) in nodes.iter().enumerate() {
        let samples: Vec<Result<f64>> = match model {
            ModelSpec::StochVol(s) => {
                exec.map(opts.n_paths, |p| Ok(integrated_variance(s, scheme, &grid, x0[1], opts.seed, p) * convention.source_scale()))
            }
            ModelSpec::Vector(_) => {
                let chol = Cholesky::new(&model.correlation(), model.n_factors())?;
                exec.map(opts.n_paths, |p| log_contract_sample(model, &chol, scheme, &grid, x0, opts.seed, p, convention))
            }
        };
        let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
        let (mean, se) = mean_and_se(&samples);
        if mean < -3.0 * se || !mean.is_finite() {
            return Err(Error::NegativeH { node: k, value: mean, std_error: se });
        }
        values.push(mean);
        errors.push(se);
    }
    let mut hf = VarianceFunction::from_grid(Provenance::Mc, convention.clone(), base, axes.to_vec(), values)?;
    hf.std_errors = Some(errors);
    Ok(hf)
}

/// Trapezoid integral of the emitted variance path started at `x0` (one factor only).
fn integrated_variance(s: &StochVolSpec, scheme: Scheme, grid: &TimeGrid, x0: f64, seed: u64, path: usize) -> f64 {
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut rng = path_rng(seed, path);
    let mut x = x0;
    let out = |x: f64| if scheme == Scheme::FullTruncationEuler { x.max(0.0) } else { x };
    let mut prev = out(x);
    let mut integral = 0.0;
    for _ in 0..grid.n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        let dz = sqrt_dt * z;
        let e = if scheme == Scheme::Euler { x } else { x.max(0.0) };
        x += s.mu.value(e) * dt + s.sigma.value(e) * dz;
        if scheme == Scheme::Milstein {
            x += 0.5 * s.sigma.sigma_dsigma(e) * (dz * dz - dt);
        }
        let cur = out(x);
        integral += 0.5 * (prev + cur) * dt;
        prev = cur;
    }
    integral
}

#[allow(clippy::too_many_arguments)]
fn log_contract_sample(
    model: &ModelSpec,
    chol: &Cholesky,
    scheme: Scheme,
    grid: &TimeGrid,
    x0: &[f64],
    seed: u64,
    path: usize,
    convention: &VixConvention,
) -> Result<f64> {
    let d = model.n_factors();
    let dim = model.state_dim();
    let mut inc = vec![0.0; grid.n_steps * d];
    path_increments(chol, grid, seed, path, &mut inc);
    let mut states = vec![0.0; (grid.n_steps + 1) * dim];
    integrate_path(model, scheme, grid, x0, &inc, path, &mut states)?;
    let mut vol = vec![0.0; d];
    let mut control = 0.0;
    for n in 0..grid.n_steps {
        model.index_relative(&states[n * dim..(n + 1) * dim], &mut vol);
        control += vol.iter().zip(&inc[n * d..(n + 1) * d]).map(|(s, w)| s * w).sum::<f64>();
    }
    let f_end = states[grid.n_steps * dim];
    if !(f_end > 0.0) {
        return Err(Error::NonFinite { path, step: grid.n_steps });
    }
    let log_ret = (f_end / x0[0]).ln();
    Ok(-(convention.scale / convention.tau_star) * (log_ret - control))
}
