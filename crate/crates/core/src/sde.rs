//! Correlated Brownian increments and pathwise SDE integration.
//!
//! Each path draws from its own ChaCha20 stream selected by the path index, so a
//! bundle does not depend on how paths are distributed over workers.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use crate::models::Scheme;
use crate::models::ModelSpec;
use crate::{Error, Result};

const EXPLOSION_CAP: f64 = 1e12;

/// Runs a per-path closure over `0..n` and returns results in path order.
pub trait PathMap: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl PathMap for Serial {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Uniform grid on `[t0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > t0) || n_steps == 0 || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time grid needs t_end > t0 and n_steps >= 1 (t0 {t0}, t_end {t_end}, n_steps {n_steps})"
            )));
        }
        Ok(Self { t0, t_end, n_steps })
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_steps {
            self.t_end
        } else {
            self.t0 + (self.t_end - self.t0) * n as f64 / self.n_steps as f64
        }
    }
}

/// Brownian factors: correlation matrix (row-major) and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub dim: usize,
    pub correlation: Vec<f64>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn for_model(model: &ModelSpec, seed: u64) -> Self {
        Self { dim: model.n_factors(), correlation: model.correlation(), seed }
    }
}

/// Lower-triangular factor of a positive semidefinite correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-10;

impl Cholesky {
    pub fn new(corr: &[f64], dim: usize) -> Result<Self> {
        if corr.len() != dim * dim {
            return Err(Error::Dimension(format!("correlation needs {} entries, got {}", dim * dim, corr.len())));
        }
        for i in 0..dim {
            if (corr[i * dim + i] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                let (a, b) = (corr[i * dim + j], corr[j * dim + i]);
                if (a - b).abs() > 1e-12 || !(a.abs() <= 1.0) {
                    return Err(Error::NotPsd);
                }
            }
        }
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut pivot = corr[j * dim + j];
            for k in 0..j {
                pivot -= l[j * dim + k] * l[j * dim + k];
            }
            if pivot < -PIVOT_TOL {
                return Err(Error::NotPsd);
            }
            let ljj = pivot.max(0.0).sqrt();
            l[j * dim + j] = if pivot > PIVOT_TOL { ljj } else { 0.0 };
            for i in j + 1..dim {
                let mut s = corr[i * dim + j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                if l[j * dim + j] > 0.0 {
                    l[i * dim + j] = s / l[j * dim + j];
                } else if s.abs() > 1e-8 {
                    return Err(Error::NotPsd);
                }
            }
        }
        Ok(Self { dim, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = L·z`
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = (0..=i).map(|k| self.l[i * self.dim + k] * z[k]).sum();
        }
    }

    /// Least-norm solution of `L·θ = v` (zero pivots contribute nothing).
    pub fn solve_lower(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let lii = self.l[i * self.dim + i];
            if lii == 0.0 {
                out[i] = 0.0;
                continue;
            }
            let s: f64 = (0..i).map(|k| self.l[i * self.dim + k] * out[k]).sum();
            out[i] = (v[i] - s) / lii;
        }
    }
}

/// The random stream of path `path`.
pub fn path_rng(seed: u64, path: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Correlated increments of one path, laid out as `[step][factor]`.
pub fn path_increments(chol: &Cholesky, grid: &TimeGrid, seed: u64, path: usize, out: &mut [f64]) {
    let d = chol.dim();
    let sqrt_dt = grid.dt().sqrt();
    let mut rng = path_rng(seed, path);
    let mut z = vec![0.0; d];
    for n in 0..grid.n_steps {
        for zk in z.iter_mut() {
            *zk = StandardNormal.sample(&mut rng);
        }
        let dst = &mut out[n * d..(n + 1) * d];
        chol.apply(&z, dst);
        for v in dst.iter_mut() {
            *v *= sqrt_dt;
        }
    }
}

/// Increments for `n_paths` paths, laid out as `[path][step][factor]`.
pub fn generate_increments(noise: &NoiseSpec, grid: &TimeGrid, n_paths: usize) -> Result<Vec<f64>> {
    let chol = Cholesky::new(&noise.correlation, noise.dim)?;
    let stride = grid.n_steps * noise.dim;
    let mut out = vec![0.0; n_paths * stride];
    for p in 0..n_paths {
        path_increments(&chol, grid, noise.seed, p, &mut out[p * stride..(p + 1) * stride]);
    }
    Ok(out)
}

/// Integrates one path from `x0` with given increments; `states` receives `n_steps + 1` rows.
pub fn integrate_path(
    model: &ModelSpec,
    scheme: Scheme,
    grid: &TimeGrid,
    x0: &[f64],
    increments: &[f64],
    path: usize,
    states: &mut [f64],
) -> Result<()> {
    let dim = model.state_dim();
    let d = model.n_factors();
    let dt = grid.dt();
    let mut x = x0.to_vec();
    let mut eval = vec![0.0; dim];
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim * d];
    let mut corr = vec![0.0; dim];
    emit(model, scheme, &x, &mut states[..dim]);
    for n in 0..grid.n_steps {
        for i in 0..dim {
            eval[i] = if scheme != Scheme::Euler && model.truncated(i) { x[i].max(0.0) } else { x[i] };
        }
        let dw = &increments[n * d..(n + 1) * d];
        model.drift(&eval, &mut a);
        model.diffusion(&eval, &mut b);
        if scheme == Scheme::Milstein {
            model.milstein_correction(&eval, dw, dt, &mut corr);
        }
        for i in 0..dim {
            let noise: f64 = (0..d).map(|j| b[i * d + j] * dw[j]).sum();
            x[i] += a[i] * dt + noise;
            if scheme == Scheme::Milstein {
                x[i] += corr[i];
            }
            if !x[i].is_finite() {
                return Err(Error::NonFinite { path, step: n + 1 });
            }
            if x[i].abs() > EXPLOSION_CAP {
                return Err(Error::Explosion { path, step: n + 1 });
            }
        }
        emit(model, scheme, &x, &mut states[(n + 1) * dim..(n + 2) * dim]);
    }
    Ok(())
}

fn emit(model: &ModelSpec, scheme: Scheme, x: &[f64], out: &mut [f64]) {
    for (i, (o, &v)) in out.iter_mut().zip(x).enumerate() {
        *o = if scheme == Scheme::FullTruncationEuler && model.truncated(i) { v.max(0.0) } else { v };
    }
}

/// Simulated paths together with the increments that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub dim: usize,
    pub n_factors: usize,
    pub names: Vec<String>,
    pub scheme: Scheme,
    pub seed: u64,
    pub correlation: Vec<f64>,
    /// `[path][step][component]`, `n_steps + 1` steps.
    pub states: Vec<f64>,
    /// `[path][step][factor]`, `n_steps` steps.
    pub increments: Vec<f64>,
}

impl PathBundle {
    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let row = (path * (self.grid.n_steps + 1) + step) * self.dim;
        &self.states[row..row + self.dim]
    }

    pub fn increment(&self, path: usize, step: usize) -> &[f64] {
        let row = (path * self.grid.n_steps + step) * self.n_factors;
        &self.increments[row..row + self.n_factors]
    }

    pub fn path_increments(&self, path: usize) -> &[f64] {
        let stride = self.grid.n_steps * self.n_factors;
        &self.increments[path * stride..(path + 1) * stride]
    }

    pub fn path_states(&self, path: usize) -> &[f64] {
        let stride = (self.grid.n_steps + 1) * self.dim;
        &self.states[path * stride..(path + 1) * stride]
    }
}

fn check_noise(model: &ModelSpec, noise: &NoiseSpec) -> Result<Cholesky> {
    model.validate()?;
    if noise.dim != model.n_factors() {
        return Err(Error::Dimension(format!(
            "noise has {} factors, model needs {}",
            noise.dim,
            model.n_factors()
        )));
    }
    Cholesky::new(&noise.correlation, noise.dim)
}

/// Simulates `n_paths` paths of `model`.
pub fn simulate<E: PathMap>(
    model: &ModelSpec,
    noise: &NoiseSpec,
    grid: &TimeGrid,
    n_paths: usize,
    scheme: Scheme,
    exec: &E,
) -> Result<PathBundle> {
    if n_paths == 0 {
        return Err(Error::EmptySimulation);
    }
    let chol = check_noise(model, noise)?;
    let dim = model.state_dim();
    let d = model.n_factors();
    let x0 = model.initial_state();
    let results = exec.map(n_paths, |p| {
        let mut inc = vec![0.0; grid.n_steps * d];
        path_increments(&chol, grid, noise.seed, p, &mut inc);
        let mut st = vec![0.0; (grid.n_steps + 1) * dim];
        integrate_path(model, scheme, grid, &x0, &inc, p, &mut st).map(|()| (st, inc))
    });
    let mut states = Vec::with_capacity(n_paths * (grid.n_steps + 1) * dim);
    let mut increments = Vec::with_capacity(n_paths * grid.n_steps * d);
    for r in results {
        let (st, inc) = r?;
        states.extend_from_slice(&st);
        increments.extend_from_slice(&inc);
    }
    Ok(PathBundle {
        grid: *grid,
        n_paths,
        dim,
        n_factors: d,
        names: model.component_names(),
        scheme,
        seed: noise.seed,
        correlation: noise.correlation.clone(),
        states,
        increments,
    })
}

/// Re-runs the integrator on the bundle's stored increments.
pub fn reintegrate(model: &ModelSpec, bundle: &PathBundle) -> Result<Vec<f64>> {
    let dim = model.state_dim();
    if dim != bundle.dim || model.n_factors() != bundle.n_factors {
        return Err(Error::Dimension("model does not match bundle".into()));
    }
    let x0 = model.initial_state();
    let stride = (bundle.grid.n_steps + 1) * dim;
    let mut states = vec![0.0; bundle.n_paths * stride];
    for p in 0..bundle.n_paths {
        integrate_path(
            model,
            bundle.scheme,
            &bundle.grid,
            &x0,
            bundle.path_increments(p),
            p,
            &mut states[p * stride..(p + 1) * stride],
        )?;
    }
    Ok(states)
}
