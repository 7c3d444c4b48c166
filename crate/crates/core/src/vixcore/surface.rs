use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::black::black_call_put;
use crate::math::trapezoid_weights;
use crate::models::{StrikeMeasure, VixConvention};
use crate::{Error, Result};

/// Pricing oracle for out-of-the-money options as a function of the model state.
pub trait OptionSurface: Sync {
    fn state_dim(&self) -> usize;

    /// Undiscounted prices at tenor `tau`: puts below `split`, calls above, their average at it.
    fn otm_prices(&self, x: &[f64], tau: f64, split: f64, strikes: &[f64], out: &mut [f64]);

    /// Calendar derivative `∂_t` of the prices at fixed tenor, when the surface provides it.
    fn calendar_derivative(&self, _x: &[f64], _tau: f64, _split: f64, _strikes: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// Flat-volatility Black surface; state `[F]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackSurface {
    pub sigma: f64,
}

impl OptionSurface for BlackSurface {
    fn state_dim(&self) -> usize {
        1
    }

    fn otm_prices(&self, x: &[f64], tau: f64, split: f64, strikes: &[f64], out: &mut [f64]) {
        for (o, &k) in out.iter_mut().zip(strikes) {
            let (call, put) = black_call_put(x[0], k, self.sigma, tau);
            *o = otm_pick(k, split, call, put);
        }
    }

    fn calendar_derivative(&self, _x: &[f64], _tau: f64, _split: f64, strikes: &[f64], out: &mut [f64]) -> bool {
        out[..strikes.len()].fill(0.0);
        true
    }
}

/// Heston surface priced with the Lewis single-integral formula; state `[F, v]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonSurface {
    pub kappa: f64,
    pub theta: f64,
    pub eta: f64,
    pub rho: f64,
}

impl HestonSurface {
    /// Characteristic function of `ln(F_τ/F_0)` at complex argument `u`.
    pub fn cf(&self, u: Complex64, tau: f64, v: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let (k, th, eta, rho) = (self.kappa, self.theta, self.eta, self.rho);
        let xi = k - rho * eta * i * u;
        let d = (xi * xi + eta * eta * (i * u + u * u)).sqrt();
        let g = (xi - d) / (xi + d);
        let e = (-d * tau).exp();
        let dd = (xi - d) / (eta * eta) * (1.0 - e) / (1.0 - g * e);
        let cc = k * th / (eta * eta) * ((xi - d) * tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
        (cc + dd * v).exp()
    }
}

impl OptionSurface for HestonSurface {
    fn state_dim(&self) -> usize {
        2
    }

    fn otm_prices(&self, x: &[f64], tau: f64, split: f64, strikes: &[f64], out: &mut [f64]) {
        heston_otm_prices(self, x[0], x[1], tau, split, strikes, out);
    }

    fn calendar_derivative(&self, _x: &[f64], _tau: f64, _split: f64, strikes: &[f64], out: &mut [f64]) -> bool {
        out[..strikes.len()].fill(0.0);
        true
    }
}

/// Simpson step of the Heston integral; fixed so that bumped states share quadrature nodes.
const HESTON_STEP: f64 = 0.05;

/// Heston OTM prices: `C = F − √(FK)/π ∫₀^∞ Re[e^{iuκ} φ(u − i/2)]/(u² + ¼) du`, `κ = ln(F/K)`,
/// with puts from parity and the put/call average at `K = split`.
pub fn heston_otm_prices(p: &HestonSurface, f: f64, v: f64, tau: f64, split: f64, strikes: &[f64], out: &mut [f64]) {
    let shift = Complex64::new(0.0, -0.5);
    let vbar = (p.theta * tau + (v - p.theta) * (1.0 - (-p.kappa * tau).exp()) / p.kappa).max(1e-8);
    let mut upper = (80.0 / vbar).sqrt();
    for _ in 0..40 {
        let tail = p.cf(Complex64::new(upper, 0.0) + shift, tau, v).norm() / (upper * upper);
        if tail < 1e-17 {
            break;
        }
        upper *= 1.5;
    }
    let mut n = (upper / HESTON_STEP).ceil() as usize;
    n += n % 2;
    let h = HESTON_STEP;
    let mut re = vec![0.0; n + 1];
    let mut im = vec![0.0; n + 1];
    for j in 0..=n {
        let u = j as f64 * h;
        let w = if j == 0 || j == n {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let phi = p.cf(Complex64::new(u, 0.0) + shift, tau, v) * (w * h / 3.0 / (u * u + 0.25));
        re[j] = phi.re;
        im[j] = phi.im;
    }
    for (o, &k) in out.iter_mut().zip(strikes) {
        let kk = (f / k).ln();
        let rot = Complex64::new((h * kk).cos(), (h * kk).sin());
        let mut z = Complex64::new(1.0, 0.0);
        let mut integral = 0.0;
        for j in 0..=n {
            integral += z.re * re[j] - z.im * im[j];
            z *= rot;
        }
        let call = f - (f * k).sqrt() / PI * integral;
        let put = call - f + k;
        *o = otm_pick(k, split, call, put);
    }
}

fn otm_pick(k: f64, split: f64, call: f64, put: f64) -> f64 {
    if k < split {
        put
    } else if k > split {
        call
    } else {
        0.5 * (call + put)
    }
}

/// Bump-and-revalue partials of a surface at `x`, with the put/call split held at
/// `split` (the unbumped forward).
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePartials {
    pub base: Vec<f64>,
    /// `first[i][k] = ∂Θ(k)/∂x_i`
    pub first: Vec<Vec<f64>>,
    /// `second[i·d + j][k] = ∂²Θ(k)/∂x_i∂x_j`
    pub second: Vec<Vec<f64>>,
    pub calendar: Option<Vec<f64>>,
}

fn bump_size(rel: f64, x: f64) -> f64 {
    if x == 0.0 {
        rel
    } else {
        rel * x.abs()
    }
}

/// Central bumps: relative size `rel_bump` for first partials, `rel_bump2` for second ones.
pub fn bump_partials<S: OptionSurface + ?Sized>(
    surface: &S,
    x: &[f64],
    tau: f64,
    strikes: &[f64],
    rel_bump: f64,
    rel_bump2: f64,
) -> SurfacePartials {
    let d = surface.state_dim();
    let m = strikes.len();
    let split = x[0];
    let price = |xs: &[f64]| {
        let mut out = vec![0.0; m];
        surface.otm_prices(xs, tau, split, strikes, &mut out);
        out
    };
    let shifted = |moves: &[(usize, f64)]| {
        let mut xs = x.to_vec();
        for &(i, dx) in moves {
            xs[i] += dx;
        }
        price(&xs)
    };
    let base = price(x);
    let mut first = Vec::with_capacity(d);
    for i in 0..d {
        let dx = bump_size(rel_bump, x[i]);
        let (up, dn) = (shifted(&[(i, dx)]), shifted(&[(i, -dx)]));
        first.push(up.iter().zip(&dn).map(|(a, b)| (a - b) / (2.0 * dx)).collect());
    }
    let mut second = vec![Vec::new(); d * d];
    for i in 0..d {
        let di = bump_size(rel_bump2, x[i]);
        let (up, dn) = (shifted(&[(i, di)]), shifted(&[(i, -di)]));
        second[i * d + i] = (0..m).map(|k| (up[k] - 2.0 * base[k] + dn[k]) / (di * di)).collect();
        for j in 0..i {
            let dj = bump_size(rel_bump2, x[j]);
            let pp = shifted(&[(i, di), (j, dj)]);
            let pm = shifted(&[(i, di), (j, -dj)]);
            let mp = shifted(&[(i, -di), (j, dj)]);
            let mm = shifted(&[(i, -di), (j, -dj)]);
            let v: Vec<f64> = (0..m).map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * di * dj)).collect();
            second[j * d + i] = v.clone();
            second[i * d + j] = v;
        }
    }
    let mut cal = vec![0.0; m];
    let calendar = surface.calendar_derivative(x, tau, split, strikes, &mut cal).then_some(cal);
    SurfacePartials { base, first, second, calendar }
}

/// Strike-measure quadrature weights `m(dk)/k²` for `strikes`.
pub fn measure_weights(strikes: &[f64], convention: &VixConvention) -> Result<Vec<f64>> {
    let w = match &convention.measure {
        StrikeMeasure::ContinuousLebesgue => {
            trapezoid_weights(strikes).into_iter().map(|w| w * convention.scale).collect::<Vec<f64>>()
        }
        StrikeMeasure::Discrete { strikes: ks, weights } => {
            if ks.as_slice() != strikes {
                return Err(Error::Dimension("discrete measure strikes differ from the option grid".into()));
            }
            weights.clone()
        }
    };
    Ok(w.iter().zip(strikes).map(|(w, k)| w / (k * k)).collect())
}

/// Output of [`w_from_option_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct WFromGrid {
    pub w: Vec<f64>,
    /// Largest end-of-grid integrand relative to its peak, over all components.
    pub truncation_ratio: f64,
    pub truncation_warning: bool,
}

const TRUNCATION_THRESHOLD: f64 = 1e-6;

/// `w_i = (1/(2τ*V²)) ∫ ∂Θ/∂x_i / k² m(dk)` from bumped partials on a strike grid.
pub fn w_from_option_grid(first: &[Vec<f64>], strikes: &[f64], v2: f64, convention: &VixConvention) -> Result<WFromGrid> {
    if !(v2 > 0.0) {
        return Err(Error::NonPositiveH(v2));
    }
    let weights = measure_weights(strikes, convention)?;
    let mut ratio = 0.0f64;
    let w = first
        .iter()
        .map(|partial| {
            let integrand: Vec<f64> = partial.iter().zip(strikes).map(|(p, k)| p / (k * k)).collect();
            let peak = integrand.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if peak > 0.0 {
                let ends = integrand[0].abs().max(integrand[integrand.len() - 1].abs());
                ratio = ratio.max(ends / peak);
            }
            partial.iter().zip(&weights).map(|(p, w)| p * w).sum::<f64>() / (2.0 * convention.tau_star * v2)
        })
        .collect();
    Ok(WFromGrid { w, truncation_ratio: ratio, truncation_warning: ratio > TRUNCATION_THRESHOLD })
}
