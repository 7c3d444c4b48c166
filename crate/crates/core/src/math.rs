//! Small numerical helpers shared across modules.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * core::f64::consts::PI).sqrt()
}

/// Index `i` of the cell `[xs[i], xs[i+1]]` containing `x`, clamped to the grid.
pub fn locate(xs: &[f64], x: f64) -> usize {
    debug_assert!(xs.len() >= 2);
    let n = xs.len();
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    let i = xs.partition_point(|&v| v <= x);
    (i - 1).min(n - 2)
}

/// Cubic Hermite interpolation on a cell: returns value and first derivative.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * t2 - 6.0 * t) / h;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = (-6.0 * t2 + 6.0 * t) / h;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let slope = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, slope)
}

/// Piecewise-linear interpolation with flat extrapolation.
pub fn linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 {
        return ys[0];
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let i = locate(xs, x);
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - w) + ys[i + 1] * w
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    /// Builds the interpolant; `xs` must be strictly increasing with at least two nodes.
    pub fn new(xs: &[f64], ys: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut ds = vec![0.0; n];
        if n == 2 {
            ds[0] = delta[0];
            ds[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    ds[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            ds[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
            ds[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Some(Self { xs: xs.to_vec(), ys: ys.to_vec(), ds })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    /// Value and first derivative; constant extrapolation of the end values.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        if x < self.xs[0] {
            return (self.ys[0], 0.0);
        }
        if x > self.xs[n - 1] {
            return (self.ys[n - 1], 0.0);
        }
        let i = locate(&self.xs, x);
        hermite(
            self.xs[i],
            self.xs[i + 1],
            self.ys[i],
            self.ys[i + 1],
            self.ds[i],
            self.ds[i + 1],
            x,
        )
    }
}

/// Evaluates the monotone cubic interpolant of `(xs, ys)` at `x` without building it
/// globally; returns value and derivative, flat outside the nodes.
pub fn pchip_eval(xs: &[f64], ys: &[f64], x: f64) -> (f64, f64) {
    let n = xs.len();
    if n == 1 || x < xs[0] {
        return (ys[0], 0.0);
    }
    if x > xs[n - 1] {
        return (ys[n - 1], 0.0);
    }
    let i = locate(xs, x);
    let lo = i.saturating_sub(2);
    let hi = (i + 4).min(n);
    match Pchip::new(&xs[lo..hi], &ys[lo..hi]) {
        Some(p) => {
            let (d0, d1) = (p.ds[i - lo], p.ds[i + 1 - lo]);
            hermite(xs[i], xs[i + 1], ys[i], ys[i + 1], d0, d1, x)
        }
        None => (f64::NAN, f64::NAN),
    }
}

fn pchip_end(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` multiplies `x[i-1]`, `upper[i]` multiplies `x[i+1]`; `rhs` is overwritten with the solution.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> bool {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return false;
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 {
            return false;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    true
}

/// Second-order nodal first and second derivatives of samples on a non-uniform grid.
///
/// End nodes use three-point one-sided stencils.
pub fn nodal_derivatives(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    if n < 2 {
        return (d1, d2);
    }
    if n == 2 {
        let s = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        return (vec![s, s], d2);
    }
    for i in 0..n {
        let c = i.clamp(1, n - 2);
        let (xl, xm, xr) = (xs[c - 1], xs[c], xs[c + 1]);
        let (yl, ym, yr) = (ys[c - 1], ys[c], ys[c + 1]);
        let x = xs[i];
        // Derivatives of the quadratic through the three nodes, evaluated at x.
        let al = ((x - xm) + (x - xr)) / ((xl - xm) * (xl - xr));
        let am = ((x - xl) + (x - xr)) / ((xm - xl) * (xm - xr));
        let ar = ((x - xl) + (x - xm)) / ((xr - xl) * (xr - xm));
        d1[i] = al * yl + am * ym + ar * yr;
        d2[i] = 2.0 * (yl / ((xl - xm) * (xl - xr)) + ym / ((xm - xl) * (xm - xr)) + yr / ((xr - xl) * (xr - xm)));
    }
    (d1, d2)
}

/// Trapezoid weights for a strictly increasing grid.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = xs[i + 1] - xs[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
