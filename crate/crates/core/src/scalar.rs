//! Descriptors for real functions of one real variable.

use alloc::boxed::Box;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math;

/// Interpolation rule for tabulated functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    Linear,
    MonotoneCubic,
}

/// A real function of one variable with first and second derivatives.
///
/// Named forms have analytic derivatives; tabulated forms use central differences with
/// step `max(1e-6, 1e-6·|x|)`. Square-root and power forms are taken as 0 for `x ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFn {
    /// `value`
    Constant { value: f64 },
    /// `a + b·x`
    Affine { a: f64, b: f64 },
    /// `a·x^p`
    Power { a: f64, p: f64 },
    /// `alpha·√x`
    SqrtScaled { alpha: f64 },
    /// `a·ln x`
    Log { a: f64 },
    /// Interpolated table, flat beyond the end nodes.
    Tabulated { xs: Vec<f64>, ys: Vec<f64>, rule: Interp },
    /// `sigma(x)·(sigma'(x)/2 − gamma)`
    Restricted { sigma: Box<ScalarFn>, gamma: f64 },
    /// Sum of terms.
    Sum { terms: Vec<ScalarFn> },
    /// `factor·inner(x)`
    Scaled { factor: f64, inner: Box<ScalarFn> },
}

fn fd_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-6)
}

impl ScalarFn {
    pub fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::Affine { a, b } => a + b * x,
            ScalarFn::Power { a, p } => {
                if x > 0.0 {
                    a * x.powf(*p)
                } else if *p == 0.0 {
                    *a
                } else {
                    0.0
                }
            }
            ScalarFn::SqrtScaled { alpha } => alpha * x.max(0.0).sqrt(),
            ScalarFn::Log { a } => a * x.ln(),
            ScalarFn::Tabulated { xs, ys, rule } => tabulated(xs, ys, *rule, x),
            ScalarFn::Restricted { sigma, gamma } => 0.5 * sigma.sigma_dsigma(x) - gamma * sigma.value(x),
            ScalarFn::Sum { terms } => terms.iter().map(|f| f.value(x)).sum(),
            ScalarFn::Scaled { factor, inner } => factor * inner.value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant { .. } => 0.0,
            ScalarFn::Affine { b, .. } => *b,
            ScalarFn::Power { a, p } => {
                if x > 0.0 {
                    a * p * x.powf(p - 1.0)
                } else {
                    self.fd_first(x)
                }
            }
            ScalarFn::SqrtScaled { alpha } => {
                if x > 0.0 {
                    0.5 * alpha / x.sqrt()
                } else {
                    f64::INFINITY * alpha.signum()
                }
            }
            ScalarFn::Log { a } => a / x,
            ScalarFn::Restricted { sigma, gamma } => {
                0.5 * sigma.sigma_dsigma_derivative(x) - gamma * sigma.derivative(x)
            }
            ScalarFn::Sum { terms } => terms.iter().map(|f| f.derivative(x)).sum(),
            ScalarFn::Scaled { factor, inner } => factor * inner.derivative(x),
            ScalarFn::Tabulated { .. } => self.fd_first(x),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant { .. } | ScalarFn::Affine { .. } => 0.0,
            ScalarFn::Power { a, p } if x > 0.0 => a * p * (p - 1.0) * x.powf(p - 2.0),
            ScalarFn::SqrtScaled { alpha } if x > 0.0 => -0.25 * alpha * x.powf(-1.5),
            ScalarFn::Log { a } => -a / (x * x),
            ScalarFn::Sum { terms } => terms.iter().map(|f| f.second_derivative(x)).sum(),
            ScalarFn::Scaled { factor, inner } => factor * inner.second_derivative(x),
            _ => {
                let h = fd_step(x);
                (self.derivative(x + h) - self.derivative(x - h)) / (2.0 * h)
            }
        }
    }

    /// `f(x)·f'(x)`, finite at the origin for square-root forms.
    pub fn sigma_dsigma(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant { .. } => 0.0,
            ScalarFn::SqrtScaled { alpha } => 0.5 * alpha * alpha,
            ScalarFn::Power { a, p } => {
                if x > 0.0 {
                    a * a * p * x.powf(2.0 * p - 1.0)
                } else if 2.0 * p - 1.0 == 0.0 {
                    a * a * p
                } else {
                    0.0
                }
            }
            ScalarFn::Affine { a, b } => (a + b * x) * b,
            ScalarFn::Scaled { factor, inner } => factor * factor * inner.sigma_dsigma(x),
            _ => self.value(x) * self.derivative(x),
        }
    }

    fn sigma_dsigma_derivative(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Constant { .. } | ScalarFn::SqrtScaled { .. } => 0.0,
            ScalarFn::Affine { b, .. } => b * b,
            ScalarFn::Power { a, p } if x > 0.0 => a * a * p * (2.0 * p - 1.0) * x.powf(2.0 * p - 2.0),
            ScalarFn::Scaled { factor, inner } => factor * factor * inner.sigma_dsigma_derivative(x),
            _ => {
                let h = fd_step(x);
                (self.sigma_dsigma(x + h) - self.sigma_dsigma(x - h)) / (2.0 * h)
            }
        }
    }

    fn fd_first(&self, x: f64) -> f64 {
        let h = fd_step(x);
        (self.value(x + h) - self.value(x - h)) / (2.0 * h)
    }

    /// True when the function is identically zero by construction.
    pub fn is_zero(&self) -> bool {
        match self {
            ScalarFn::Constant { value } => *value == 0.0,
            ScalarFn::Affine { a, b } => *a == 0.0 && *b == 0.0,
            ScalarFn::Power { a, .. } => *a == 0.0,
            ScalarFn::SqrtScaled { alpha } => *alpha == 0.0,
            ScalarFn::Log { a } => *a == 0.0,
            ScalarFn::Tabulated { ys, .. } => ys.iter().all(|&y| y == 0.0),
            ScalarFn::Restricted { sigma, .. } => sigma.is_zero(),
            ScalarFn::Sum { terms } => terms.iter().all(ScalarFn::is_zero),
            ScalarFn::Scaled { factor, inner } => *factor == 0.0 || inner.is_zero(),
        }
    }

    /// Checks that tabulated nodes are usable.
    pub fn validate(&self) -> bool {
        match self {
            ScalarFn::Tabulated { xs, ys, .. } => {
                xs.len() >= 2 && xs.len() == ys.len() && xs.windows(2).all(|w| w[1] > w[0])
            }
            ScalarFn::Restricted { sigma, .. } => sigma.validate(),
            ScalarFn::Sum { terms } => terms.iter().all(ScalarFn::validate),
            ScalarFn::Scaled { inner, .. } => inner.validate(),
            _ => true,
        }
    }
}

fn tabulated(xs: &[f64], ys: &[f64], rule: Interp, x: f64) -> f64 {
    match rule {
        Interp::Linear => math::linear(xs, ys, x),
        Interp::MonotoneCubic => math::pchip_eval(xs, ys, x).0,
    }
}

/// The drift `μ(x) = σ(x)(σ'(x)/2 − γ)` paired with a volatility `σ`.
pub fn restricted_drift(sigma: &ScalarFn, gamma: f64) -> ScalarFn {
    ScalarFn::Restricted { sigma: Box::new(sigma.clone()), gamma }
}
