use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::MarketPriceOfRisk;
use crate::models::TermStructureSpec;
use crate::sde::{PathBundle, PathMap};
use crate::{Error, Result};

/// Coefficients of the futures family on the triangular `(t_n, T_m)` mesh, `T_m = m·Δt`.
#[derive(Debug, Clone)]
pub(crate) struct FamilyMesh {
    pub n_steps: usize,
    /// Index of the last maturity.
    pub last: usize,
    pub dt: f64,
    pub factors: usize,
    pub maturities: Vec<f64>,
    pub ln_f0: Vec<f64>,
    /// Mesh finite difference of the initial curve.
    pub fd0: Vec<f64>,
    /// Analytic slope of the initial curve.
    pub slope0: Vec<f64>,
    /// Coefficients do not depend on `T`; arrays then have a single maturity column.
    pub flat: bool,
    /// `μ^V(t_n, T_m)`
    pub mu: Vec<f64>,
    /// `(μ^V − ½ν·ρν)Δt`
    pub log_drift: Vec<f64>,
    /// `ν^j(t_n, T_m)`
    pub nu: Vec<f64>,
    pub active: Vec<bool>,
}

impl FamilyMesh {
    pub fn new(ts: &TermStructureSpec, bundle: &PathBundle) -> Result<Self> {
        ts.validate(bundle.n_factors)?;
        let grid = &bundle.grid;
        if grid.t0 != 0.0 {
            return Err(Error::Mesh(format!("futures family starts at t = 0, bundle starts at {}", grid.t0)));
        }
        let dt = grid.dt();
        let last = (ts.t_star / dt + 1e-9).floor() as usize;
        if last < grid.n_steps || last < 2 {
            return Err(Error::Mesh(format!(
                "maturity mesh with spacing {dt} ends at {} before the simulation horizon {}",
                last as f64 * dt,
                grid.t_end
            )));
        }
        let d = bundle.n_factors;
        let maturities: Vec<f64> = (0..=last).map(|m| m as f64 * dt).collect();
        let curve: Vec<(f64, f64)> = maturities.iter().map(|&t| ts.initial_curve.eval(t)).collect();
        let f0: Vec<f64> = curve.iter().map(|c| c.0).collect();
        let fd0 = mesh_derivative(&f0, 0, dt);
        let flat = ts.maturity_independent();
        let cols = if flat { 1 } else { last + 1 };
        let rows = grid.n_steps + 1;
        let mut mu = vec![0.0; rows * cols];
        let mut log_drift = vec![0.0; rows * cols];
        let mut nu = vec![0.0; rows * cols * d];
        let mut active = vec![false; d];
        for n in 0..rows {
            let t = grid.time(n);
            for c in 0..cols {
                let big_t = if flat { t } else { maturities[c] };
                let k = n * cols + c;
                mu[k] = ts.mu_v.eval(t, big_t);
                let mut q = 0.0;
                for j in 0..d {
                    let v = ts.nu[j].eval(t, big_t);
                    nu[k * d + j] = v;
                    active[j] |= v != 0.0;
                    for l in 0..d {
                        q += v * bundle.correlation[j * d + l] * ts.nu[l].eval(t, big_t);
                    }
                }
                log_drift[k] = (mu[k] - 0.5 * q) * dt;
            }
        }
        Ok(Self {
            n_steps: grid.n_steps,
            last,
            dt,
            factors: d,
            maturities,
            ln_f0: f0.iter().map(|v| v.ln()).collect(),
            fd0,
            slope0: curve.iter().map(|c| c.1).collect(),
            flat,
            mu,
            log_drift,
            nu,
            active,
        })
    }

    #[inline]
    pub fn at(&self, n: usize, m: usize) -> usize {
        if self.flat {
            n
        } else {
            n * (self.last + 1) + m
        }
    }

    /// Log increment of `F(·, T_m)` over step `n`.
    #[inline]
    pub fn log_step(&self, n: usize, m: usize, dw: &[f64]) -> f64 {
        let k = self.at(n, m);
        let nu = &self.nu[k * self.factors..(k + 1) * self.factors];
        self.log_drift[k] + nu.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn nu_at(&self, n: usize, m: usize) -> &[f64] {
        let k = self.at(n, m);
        &self.nu[k * self.factors..(k + 1) * self.factors]
    }
}

/// Maturity derivative on the mesh for entries `from..`: central inside, backward at the end.
fn mesh_derivative(v: &[f64], from: usize, dt: f64) -> Vec<f64> {
    let last = v.len() - 1;
    let mut out = vec![0.0; v.len()];
    for m in from..=last {
        out[m] = if m == last {
            (v[m] - v[m - 1]) / dt
        } else if m == from {
            (v[m + 1] - v[m]) / dt
        } else {
            (v[m + 1] - v[m - 1]) / (2.0 * dt)
        };
    }
    out
}

/// Terms of the implied-VIX drift `ξ`, each laid out as `[path][step]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiTerms {
    /// `∂_T F(0, t)/Ṽ_t`
    pub slope: Vec<f64>,
    /// `μ^V(t, t) + (1/Ṽ_t)∫∂_T(μ^V F)(u, t)du`
    pub drift: Vec<f64>,
    /// `(1/Ṽ_t)∫∂_T(F ν)(u, t)·dW_u`
    pub stochastic: Vec<f64>,
    /// `λ_t·ν(t, t)`, zero under the real-world measure.
    pub risk_adjustment: Vec<f64>,
}

/// Implied VIX `Ṽ_t = F(t, t)` per path, optionally with its drift `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpliedVixPath {
    pub times: Vec<f64>,
    pub n_paths: usize,
    /// `[path][step]`
    pub vix: Vec<f64>,
    pub xi: Option<XiTerms>,
}

impl ImpliedVixPath {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn vix_at(&self, path: usize, step: usize) -> f64 {
        self.vix[path * self.times.len() + step]
    }

    /// `ξ` at a grid point, when computed.
    pub fn xi_at(&self, path: usize, step: usize) -> Option<f64> {
        let k = path * self.times.len() + step;
        self.xi.as_ref().map(|x| x.slope[k] + x.drift[k] + x.stochastic[k] + x.risk_adjustment[k])
    }

    /// Mean of `ξ` over paths and all grid times but the last.
    pub fn mean_xi(&self) -> Option<f64> {
        let n = self.times.len();
        self.xi.as_ref()?;
        let mut s = 0.0;
        for p in 0..self.n_paths {
            for k in 0..n - 1 {
                s += self.xi_at(p, k)?;
            }
        }
        Some(s / (self.n_paths * (n - 1)) as f64)
    }
}

struct PathOut {
    vix: Vec<f64>,
    xi: Option<[Vec<f64>; 4]>,
}

fn simulate_path(
    mesh: &FamilyMesh,
    bundle: &PathBundle,
    lambda: Option<&MarketPriceOfRisk>,
    path: usize,
) -> Result<PathOut> {
    let steps = mesh.n_steps;
    let d = mesh.factors;
    let dt = mesh.dt;
    let last = mesh.last;
    let want_xi = lambda.is_some();
    let mut vix = vec![0.0; steps + 1];
    let mut terms = [vec![0.0; steps + 1], vec![0.0; steps + 1], vec![0.0; steps + 1], vec![0.0; steps + 1]];
    let mut lam = vec![0.0; d];
    let mut record = |n: usize, f_nn: f64, dsum: f64, ssum: f64, terms: &mut [Vec<f64>; 4]| -> Result<()> {
        if !(f_nn > 0.0) || !f_nn.is_finite() {
            return Err(Error::NonPositiveImpliedVix { path, step: n });
        }
        vix[n] = f_nn;
        if let Some(l) = lambda {
            l.eval(bundle.grid.time(n), bundle.state(path, n), &mut lam);
            let nu = mesh.nu_at(n, n);
            terms[0][n] = mesh.slope0[n] / f_nn;
            terms[1][n] = mesh.mu[mesh.at(n, n)] + dsum / f_nn;
            terms[2][n] = ssum / f_nn;
            terms[3][n] = lam.iter().zip(nu).map(|(a, b)| a * b).sum();
        }
        Ok(())
    };
    if mesh.flat {
        // F(t_n, T) = F(0, T)·G_n for every maturity.
        let (mut ln_g, mut dsum, mut ssum) = (0.0, 0.0, 0.0);
        for n in 0..=steps {
            let g = ln_g.exp();
            record(n, (mesh.ln_f0[n] + ln_g).exp(), mesh.fd0[n] * dsum, mesh.fd0[n] * ssum, &mut terms)?;
            if n == steps {
                break;
            }
            let dw = bundle.increment(path, n);
            if want_xi {
                dsum += g * mesh.mu[n] * dt;
                ssum += g * mesh.nu_at(n, 0).iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
            }
            ln_g += mesh.log_step(n, 0, dw);
        }
    } else {
        let mut ln_f = mesh.ln_f0.clone();
        let mut dacc = vec![0.0; last + 1];
        let mut sacc = vec![0.0; last + 1];
        let mut f = vec![0.0; last + 1];
        let mut g = vec![0.0; (last + 1) * (d + 1)];
        for n in 0..=steps {
            record(n, ln_f[n].exp(), dacc[n], sacc[n], &mut terms)?;
            if n == steps {
                break;
            }
            let dw = bundle.increment(path, n);
            if want_xi {
                for m in n..=last {
                    f[m] = ln_f[m].exp();
                    let k = mesh.at(n, m);
                    g[m * (d + 1)] = f[m] * mesh.mu[k];
                    for j in 0..d {
                        g[m * (d + 1) + 1 + j] = f[m] * mesh.nu[k * d + j];
                    }
                }
                for m in n + 1..=last {
                    let (lo, hi, div) = if m == last { (m - 1, m, dt) } else { (m - 1, m + 1, 2.0 * dt) };
                    let deriv = |c: usize| (g[hi * (d + 1) + c] - g[lo * (d + 1) + c]) / div;
                    dacc[m] += deriv(0) * dt;
                    sacc[m] += (0..d).map(|j| deriv(1 + j) * dw[j]).sum::<f64>();
                }
            }
            for m in n + 1..=last {
                ln_f[m] += mesh.log_step(n, m, dw);
            }
        }
    }
    Ok(PathOut { vix, xi: want_xi.then_some(terms) })
}

fn run<E: PathMap>(
    ts: &TermStructureSpec,
    bundle: &PathBundle,
    lambda: Option<&MarketPriceOfRisk>,
    exec: &E,
) -> Result<ImpliedVixPath> {
    if bundle.n_paths == 0 {
        return Err(Error::EmptySimulation);
    }
    if let Some(l) = lambda {
        l.check_dim(bundle.n_factors, bundle.dim)?;
    }
    let mesh = FamilyMesh::new(ts, bundle)?;
    let outs = exec.map(bundle.n_paths, |p| simulate_path(&mesh, bundle, lambda, p));
    let n = mesh.n_steps + 1;
    let mut vix = Vec::with_capacity(bundle.n_paths * n);
    let mut xi = lambda.map(|_| XiTerms {
        slope: Vec::with_capacity(bundle.n_paths * n),
        drift: Vec::with_capacity(bundle.n_paths * n),
        stochastic: Vec::with_capacity(bundle.n_paths * n),
        risk_adjustment: Vec::with_capacity(bundle.n_paths * n),
    });
    for o in outs {
        let o = o?;
        vix.extend_from_slice(&o.vix);
        if let (Some(x), Some([a, b, c, e])) = (xi.as_mut(), o.xi) {
            x.slope.extend(a);
            x.drift.extend(b);
            x.stochastic.extend(c);
            x.risk_adjustment.extend(e);
        }
    }
    Ok(ImpliedVixPath { times: (0..n).map(|k| bundle.grid.time(k)).collect(), n_paths: bundle.n_paths, vix, xi })
}

/// Simulates the futures family on the bundle's increments and reads the diagonal `F(t, t)`.
pub fn implied_vix_path<E: PathMap>(ts: &TermStructureSpec, bundle: &PathBundle, exec: &E) -> Result<ImpliedVixPath> {
    run(ts, bundle, None, exec)
}

/// As [`implied_vix_path`], adding `ξ` and its terms; a nonzero `λ` gives the risk-neutral
/// drift `ξ^Q = ξ + λ·ν(t, t)`.
pub fn xi_path<E: PathMap>(
    ts: &TermStructureSpec,
    bundle: &PathBundle,
    lambda: &MarketPriceOfRisk,
    exec: &E,
) -> Result<ImpliedVixPath> {
    run(ts, bundle, Some(lambda), exec)
}
