use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::surface::{bump_partials, measure_weights, OptionSurface};
use super::{w_from_h, VarianceFunction};
use crate::models::ModelSpec;
use crate::{Error, Result};

/// Drift and diffusion coefficients of `V = √h` at one state.
///
/// `uij` is row-major and excludes the motion of the put/call split, which `u2` carries
/// through the `(0, 0)` entry.
#[derive(Debug, Clone, PartialEq)]
pub struct VixCoefficients {
    /// Calendar term; `None` without an option surface.
    pub u1: Option<f64>,
    pub u2: f64,
    pub uij: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
    pub x: Vec<f64>,
    pub v: f64,
}

/// Option surface plus the strike grid and bump sizes used to differentiate it.
pub struct SurfaceInput<'a> {
    pub surface: &'a dyn OptionSurface,
    pub strikes: Vec<f64>,
    /// Relative bump for first partials.
    pub bump: f64,
    /// Relative bump for second partials.
    pub bump2: f64,
}

impl SurfaceInput<'_> {
    pub fn new(surface: &dyn OptionSurface, strikes: Vec<f64>) -> SurfaceInput<'_> {
        SurfaceInput { surface, strikes, bump: 1e-4, bump2: 1e-3 }
    }
}

/// Coefficients from `h` alone, or from an option surface when one is supplied.
///
/// Without a surface, `w_i = ∂_i h/(2h)` and
/// `u_ij = ∂_ij h/(4h) + δ_{i0}δ_{j0}·N/(4τ*hF²) − w_i w_j/2`.
/// With a surface, `w` and `u_ij` are strike quadratures of bumped prices and `u1` uses the
/// calendar derivative.
pub fn vix_coefficients(
    hf: &VarianceFunction,
    model: &ModelSpec,
    t: f64,
    x: &[f64],
    surface: Option<&SurfaceInput<'_>>,
) -> Result<VixCoefficients> {
    let d = model.state_dim();
    if x.len() != d || hf.state_dim != d {
        return Err(Error::Dimension("state, model and variance function disagree".into()));
    }
    let h = hf.value(x);
    if !(h > 0.0) {
        return Err(Error::NonPositiveH(h));
    }
    let conv = &hf.convention;
    let f = x[0];
    let u2 = -conv.scale / (4.0 * conv.tau_star * h * f * f);
    let (w, uij, u1) = match surface {
        None => {
            let w = w_from_h(hf, x)?;
            let hess = hf.hessian(x);
            let mut uij = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    uij[i * d + j] = hess[i * d + j] / (4.0 * h) - 0.5 * w[i] * w[j];
                }
            }
            uij[0] -= u2;
            (w, uij, None)
        }
        Some(s) => {
            if s.surface.state_dim() != d {
                return Err(Error::Dimension("option surface state differs from the model state".into()));
            }
            let p = bump_partials(s.surface, x, conv.tau_star, &s.strikes, s.bump, s.bump2);
            let m = measure_weights(&s.strikes, conv)?;
            let integral = |v: &[f64]| v.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>() / (conv.tau_star * h);
            let w: Vec<f64> = p.first.iter().map(|v| 0.5 * integral(v)).collect();
            let mut uij = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    uij[i * d + j] = 0.25 * integral(&p.second[i * d + j]) - 0.5 * w[i] * w[j];
                }
            }
            let u1 = p.calendar.as_deref().map(|c| 0.5 * integral(c));
            (w, uij, u1)
        }
    };
    if w.iter().chain(&uij).chain(&[u2]).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite VIX coefficient".into()));
    }
    Ok(VixCoefficients { u1, u2, uij, w, t, x: x.to_vec(), v: h.sqrt() })
}

/// Itô drift and factor loadings of `V = √h(X)` under the model dynamics, both relative to `V`.
///
/// `dV/V = a dt + Σ_j s_j dW^j` with the model's (possibly correlated) factors.
pub fn ito_drift_of_sqrt_h(hf: &VarianceFunction, model: &ModelSpec, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let d = model.state_dim();
    let m = model.n_factors();
    let h = hf.value(x);
    if !(h > 0.0) {
        return Err(Error::NonPositiveH(h));
    }
    let g = hf.gradient(x).values;
    let hess = hf.hessian(x);
    let mut mu = vec![0.0; d];
    let mut b = vec![0.0; d * m];
    model.drift(x, &mut mu);
    model.diffusion(x, &mut b);
    let rho = model.correlation();
    // Covariance rate C = b ρ bᵀ.
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..m {
                for l in 0..m {
                    s += b[i * m + k] * rho[k * m + l] * b[j * m + l];
                }
            }
            c[i * d + j] = s;
        }
    }
    let mut gen = 0.0;
    let mut quad = 0.0;
    for i in 0..d {
        gen += mu[i] * g[i];
        for j in 0..d {
            gen += 0.5 * c[i * d + j] * hess[i * d + j];
            quad += g[i] * c[i * d + j] * g[j];
        }
    }
    let drift = gen / (2.0 * h) - quad / (8.0 * h * h);
    let vol = (0..m).map(|k| (0..d).map(|i| g[i] * b[i * m + k]).sum::<f64>() / (2.0 * h)).collect();
    Ok((drift, vol))
}
