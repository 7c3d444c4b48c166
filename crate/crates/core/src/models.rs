//! Model specifications: index/state dynamics, VIX-futures term structures and the
//! VIX convention.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::scalar::{restricted_drift, ScalarFn};
use crate::{Error, Result};

/// Index future `F` and variance state `X`:
/// `dF = F√X dW`, `dX = μ(X)dt + σ(X)dZ`, `d⟨W,Z⟩ = ρ dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochVolSpec {
    pub mu: ScalarFn,
    pub sigma: ScalarFn,
    pub rho: f64,
    pub x0: f64,
    pub f0: f64,
}

/// A real function of the state vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFn {
    Constant { value: f64 },
    /// `f(x[index])`
    Component { index: usize, f: ScalarFn },
}

impl StateFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            StateFn::Constant { value } => *value,
            StateFn::Component { index, f } => f.value(x[*index]),
        }
    }

    fn max_index(&self) -> Option<usize> {
        match self {
            StateFn::Constant { .. } => None,
            StateFn::Component { index, .. } => Some(*index),
        }
    }
}

/// Positive state vector in the form `dXⁱ = Xⁱμⁱ dt + Xⁱσⁱ·dW`; component 0 is the index future.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorModelSpec {
    pub x0: Vec<f64>,
    /// Relative drifts `μⁱ`.
    pub drift: Vec<StateFn>,
    /// Relative volatility rows `σⁱ = (σ^{i,1}, …)`, one entry per Brownian factor.
    pub vol: Vec<Vec<StateFn>>,
    /// Factor correlation matrix; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    StochVol(StochVolSpec),
    Vector(VectorModelSpec),
}

/// Discretization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    FullTruncationEuler,
    Milstein,
}

fn is_sqrt_type(f: &ScalarFn) -> bool {
    match f {
        ScalarFn::SqrtScaled { .. } => true,
        ScalarFn::Power { p, .. } => *p < 1.0,
        ScalarFn::Scaled { inner, .. } => is_sqrt_type(inner),
        ScalarFn::Sum { terms } => terms.iter().any(is_sqrt_type),
        _ => false,
    }
}

impl ModelSpec {
    pub fn state_dim(&self) -> usize {
        match self {
            ModelSpec::StochVol(_) => 2,
            ModelSpec::Vector(v) => v.x0.len(),
        }
    }

    pub fn n_factors(&self) -> usize {
        match self {
            ModelSpec::StochVol(_) => 2,
            ModelSpec::Vector(v) => v.vol.first().map_or(0, Vec::len),
        }
    }

    pub fn component_names(&self) -> Vec<String> {
        match self {
            ModelSpec::StochVol(_) => vec!["F".to_string(), "X".to_string()],
            ModelSpec::Vector(v) => (0..v.x0.len()).map(|i| format!("X{i}")).collect(),
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match self {
            ModelSpec::StochVol(s) => vec![s.f0, s.x0],
            ModelSpec::Vector(v) => v.x0.clone(),
        }
    }

    /// Row-major factor correlation matrix.
    pub fn correlation(&self) -> Vec<f64> {
        match self {
            ModelSpec::StochVol(s) => vec![1.0, s.rho, s.rho, 1.0],
            ModelSpec::Vector(v) => {
                let d = self.n_factors();
                match &v.correlation {
                    Some(c) => c.iter().flat_map(|r| r.iter().copied()).collect(),
                    None => {
                        let mut m = vec![0.0; d * d];
                        for i in 0..d {
                            m[i * d + i] = 1.0;
                        }
                        m
                    }
                }
            }
        }
    }

    /// Scheme used when a scenario does not name one.
    pub fn default_scheme(&self) -> Scheme {
        match self {
            ModelSpec::StochVol(s) if is_sqrt_type(&s.sigma) => Scheme::FullTruncationEuler,
            _ => Scheme::Euler,
        }
    }

    /// Components kept non-negative by full truncation.
    pub fn truncated(&self, i: usize) -> bool {
        match self {
            ModelSpec::StochVol(_) => i == 1,
            ModelSpec::Vector(_) => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::StochVol(s) => {
                if !(s.x0 > 0.0 && s.f0 > 0.0) {
                    return Err(Error::InvalidParameter(format!("x0 and f0 must be positive (x0 {}, f0 {})", s.x0, s.f0)));
                }
                if !(s.rho.abs() <= 1.0) {
                    return Err(Error::InvalidParameter(format!("|rho| must not exceed 1, got {}", s.rho)));
                }
                if !s.mu.validate() || !s.sigma.validate() {
                    return Err(Error::InvalidParameter("malformed tabulated function".to_string()));
                }
            }
            ModelSpec::Vector(v) => {
                let n = v.x0.len();
                if n == 0 || v.drift.len() != n || v.vol.len() != n {
                    return Err(Error::Dimension(format!(
                        "x0 has {n} components, drift {}, vol rows {}",
                        v.drift.len(),
                        v.vol.len()
                    )));
                }
                let d = v.vol[0].len();
                if d == 0 || v.vol.iter().any(|r| r.len() != d) {
                    return Err(Error::Dimension("volatility rows must share a positive factor count".to_string()));
                }
                if v.x0.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::InvalidParameter("initial state must be positive".to_string()));
                }
                let all = v.drift.iter().chain(v.vol.iter().flatten());
                if all.filter_map(StateFn::max_index).any(|i| i >= n) {
                    return Err(Error::Dimension("state function refers to a missing component".to_string()));
                }
                if let Some(c) = &v.correlation {
                    if c.len() != d || c.iter().any(|r| r.len() != d) {
                        return Err(Error::Dimension(format!("correlation must be {d}x{d}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Absolute drift vector at `x`.
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ModelSpec::StochVol(s) => {
                out[0] = 0.0;
                out[1] = s.mu.value(x[1]);
            }
            ModelSpec::Vector(v) => {
                for (i, f) in v.drift.iter().enumerate() {
                    out[i] = x[i] * f.eval(x);
                }
            }
        }
    }

    /// Absolute diffusion matrix `b[i·d + j]` (state `i`, factor `j`) at `x`.
    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ModelSpec::StochVol(s) => {
                out[0] = x[0] * x[1].max(0.0).sqrt();
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = s.sigma.value(x[1]);
            }
            ModelSpec::Vector(v) => {
                let d = self.n_factors();
                for (i, row) in v.vol.iter().enumerate() {
                    for (j, f) in row.iter().enumerate() {
                        out[i * d + j] = x[i] * f.eval(x);
                    }
                }
            }
        }
    }

    /// Milstein correction using the diagonal part of the derivative of the diffusion.
    pub fn milstein_correction(&self, x: &[f64], dw: &[f64], dt: f64, out: &mut [f64]) {
        match self {
            ModelSpec::StochVol(s) => {
                let v = x[1].max(0.0);
                out[0] = 0.5 * x[0] * v * (dw[0] * dw[0] - dt);
                out[1] = 0.5 * s.sigma.sigma_dsigma(v) * (dw[1] * dw[1] - dt);
            }
            ModelSpec::Vector(v) => {
                for (i, row) in v.vol.iter().enumerate() {
                    out[i] = row
                        .iter()
                        .zip(dw)
                        .map(|(f, w)| {
                            let s = f.eval(x);
                            0.5 * x[i] * s * s * (w * w - dt)
                        })
                        .sum();
                }
            }
        }
    }

    /// Relative drift and volatility row of the index future at `x`.
    pub fn index_relative(&self, x: &[f64], vol_out: &mut [f64]) -> f64 {
        match self {
            ModelSpec::StochVol(_) => {
                vol_out[0] = x[1].max(0.0).sqrt();
                vol_out[1] = 0.0;
                0.0
            }
            ModelSpec::Vector(v) => {
                for (j, f) in v.vol[0].iter().enumerate() {
                    vol_out[j] = f.eval(x);
                }
                v.drift[0].eval(x)
            }
        }
    }
}

/// Initial VIX-futures curve `F^VIX(0, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Curve {
    Flat { level: f64 },
    /// `level·e^{rate·T}`
    Exponential { level: f64, rate: f64 },
    /// Monotone-cubic interpolation of `(maturities, values)`.
    Tabulated { maturities: Vec<f64>, values: Vec<f64> },
}

impl Curve {
    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// Derivative in maturity.
    pub fn slope(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            Curve::Flat { level } => (*level, 0.0),
            Curve::Exponential { level, rate } => {
                let v = level * (rate * t).exp();
                (v, rate * v)
            }
            Curve::Tabulated { maturities, values } => math::pchip_eval(maturities, values, t),
        }
    }
}

/// Coefficient `c(t, T)` on the triangle `0 ≤ t ≤ T ≤ T*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermFn {
    Zero,
    Constant { value: f64 },
    /// `scale·e^{−kappa·(T−t)}`
    ExpDecay { scale: f64, kappa: f64 },
}

impl TermFn {
    pub fn eval(&self, t: f64, maturity: f64) -> f64 {
        match self {
            TermFn::Zero => 0.0,
            TermFn::Constant { value } => *value,
            TermFn::ExpDecay { scale, kappa } => scale * (-kappa * (maturity - t)).exp(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TermFn::Zero => true,
            TermFn::Constant { value } => *value == 0.0,
            TermFn::ExpDecay { scale, .. } => *scale == 0.0,
        }
    }

    /// True when the value does not depend on the maturity argument.
    pub fn maturity_independent(&self) -> bool {
        match self {
            TermFn::ExpDecay { scale, kappa } => *scale == 0.0 || *kappa == 0.0,
            _ => true,
        }
    }
}

/// Futures family `dF^VIX(t,T) = F^VIX(t,T)(μ^V(t,T)dt + ν(t,T)·dW)`, `T ≤ T*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermStructureSpec {
    pub initial_curve: Curve,
    pub mu_v: TermFn,
    /// One loading per Brownian factor of the index model.
    pub nu: Vec<TermFn>,
    pub t_star: f64,
}

const PROBE: usize = 50;

fn triangle_probe(t_star: f64, mut f: impl FnMut(f64, f64) -> bool) -> bool {
    for a in 0..=PROBE {
        let t = t_star * a as f64 / PROBE as f64;
        for b in a..=PROBE {
            let big_t = t_star * b as f64 / PROBE as f64;
            if !f(t, big_t) {
                return false;
            }
        }
    }
    true
}

impl TermStructureSpec {
    pub fn validate(&self, n_factors: usize) -> Result<()> {
        if !(self.t_star > 0.0) {
            return Err(Error::InvalidParameter(format!("T* must be positive, got {}", self.t_star)));
        }
        if self.nu.len() != n_factors {
            return Err(Error::Dimension(format!(
                "term structure has {} loadings, model has {n_factors} factors",
                self.nu.len()
            )));
        }
        let curve_ok = (0..=PROBE).all(|i| {
            let (v, s) = self.initial_curve.eval(self.t_star * i as f64 / PROBE as f64);
            v > 0.0 && s.is_finite()
        });
        if !curve_ok {
            return Err(Error::InvalidParameter("initial curve must be positive with finite slope on [0, T*]".to_string()));
        }
        let h = 1e-6 * self.t_star;
        let bounded = |f: &TermFn| {
            triangle_probe(self.t_star, |t, big_t| {
                let d = (f.eval(t, big_t + h) - f.eval(t, big_t - h)) / (2.0 * h);
                d.is_finite() && f.eval(t, big_t).is_finite()
            })
        };
        if !bounded(&self.mu_v) || !self.nu.iter().all(bounded) {
            return Err(Error::InvalidParameter("term-structure coefficients must be finite with bounded maturity derivative".to_string()));
        }
        Ok(())
    }

    pub fn maturity_independent(&self) -> bool {
        self.mu_v.maturity_independent() && self.nu.iter().all(TermFn::maturity_independent)
    }
}

/// Term structure with `μ^V ≡ 0` and `ν = β` on factor `z_factor`.
pub fn proportional_termstructure(
    initial_curve: Curve,
    beta: TermFn,
    n_factors: usize,
    z_factor: usize,
    t_star: f64,
) -> Result<TermStructureSpec> {
    if z_factor >= n_factors {
        return Err(Error::Dimension(format!("factor {z_factor} out of range for {n_factors} factors")));
    }
    if !triangle_probe(t_star, |t, big_t| beta.eval(t, big_t) >= 0.0) {
        return Err(Error::InvalidParameter("beta must be non-negative".to_string()));
    }
    let mut nu = vec![TermFn::Zero; n_factors];
    nu[z_factor] = beta;
    Ok(TermStructureSpec { initial_curve, mu_v: TermFn::Zero, nu, t_star })
}

/// Strike measure used by the VIX convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrikeMeasure {
    /// `N` times Lebesgue measure.
    ContinuousLebesgue,
    /// Point masses at `strikes`.
    Discrete { strikes: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VixConvention {
    #[serde(default = "default_tau_star")]
    pub tau_star: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_measure")]
    pub measure: StrikeMeasure,
}

fn default_tau_star() -> f64 {
    30.0 / 365.0
}

fn default_scale() -> f64 {
    2.0 * 100.0 * 100.0
}

fn default_measure() -> StrikeMeasure {
    StrikeMeasure::ContinuousLebesgue
}

impl Default for VixConvention {
    fn default() -> Self {
        Self { tau_star: default_tau_star(), scale: default_scale(), measure: default_measure() }
    }
}

impl VixConvention {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_star > 0.0 && self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_star and scale must be positive (tau_star {}, scale {})",
                self.tau_star, self.scale
            )));
        }
        if let StrikeMeasure::Discrete { strikes, weights } = &self.measure {
            if strikes.len() != weights.len() {
                return Err(Error::Dimension("discrete measure strikes and weights differ in length".to_string()));
            }
        }
        Ok(())
    }

    /// `N / (2τ*)`, the factor turning expected integrated variance into `h`.
    pub fn source_scale(&self) -> f64 {
        self.scale / (2.0 * self.tau_star)
    }
}

fn param(params: &BTreeMap<String, f64>, name: &str, default: Option<f64>) -> Result<f64> {
    match params.get(name) {
        Some(v) => Ok(*v),
        None => default.ok_or_else(|| Error::InvalidParameter(format!("missing parameter `{name}`"))),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("`{name}` must be positive, got {v}")))
    }
}

/// Named models: `heston`, `cir_restricted`, `gbm_restricted` (`σ(x) = 2γx`), `gbm_index`.
///
/// Unknown parameter names are rejected. `custom` models are supplied as full specs.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    let allowed: &[&str] = match name {
        "heston" => &["kappa", "theta", "eta", "v0", "rho", "f0"],
        "cir_restricted" => &["alpha", "gamma", "x0", "rho", "f0"],
        "gbm_restricted" => &["gamma", "x0", "rho", "f0"],
        "gbm_index" => &["sigma0", "f0"],
        "custom" => return Err(Error::UnknownModel("custom (supply the full model spec instead)".to_string())),
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!("`{k}` is not a parameter of `{name}`")));
    }
    let spec = match name {
        "heston" => {
            let kappa = positive("kappa", param(params, "kappa", None)?)?;
            let theta = positive("theta", param(params, "theta", None)?)?;
            let eta = positive("eta", param(params, "eta", None)?)?;
            ModelSpec::StochVol(StochVolSpec {
                mu: ScalarFn::Affine { a: kappa * theta, b: -kappa },
                sigma: ScalarFn::SqrtScaled { alpha: eta },
                rho: param(params, "rho", Some(0.0))?,
                x0: param(params, "v0", None)?,
                f0: param(params, "f0", Some(100.0))?,
            })
        }
        "cir_restricted" => {
            let alpha = positive("alpha", param(params, "alpha", None)?)?;
            let gamma = positive("gamma", param(params, "gamma", None)?)?;
            let sigma = ScalarFn::SqrtScaled { alpha };
            ModelSpec::StochVol(StochVolSpec {
                mu: restricted_drift(&sigma, gamma),
                sigma,
                rho: param(params, "rho", Some(0.0))?,
                x0: param(params, "x0", None)?,
                f0: param(params, "f0", Some(100.0))?,
            })
        }
        "gbm_restricted" => {
            let gamma = positive("gamma", param(params, "gamma", None)?)?;
            let sigma = ScalarFn::Affine { a: 0.0, b: 2.0 * gamma };
            ModelSpec::StochVol(StochVolSpec {
                mu: restricted_drift(&sigma, gamma),
                sigma,
                rho: param(params, "rho", Some(0.0))?,
                x0: param(params, "x0", None)?,
                f0: param(params, "f0", Some(100.0))?,
            })
        }
        _ => {
            let sigma0 = param(params, "sigma0", None)?;
            if !(sigma0 >= 0.0) {
                return Err(Error::InvalidParameter(format!("`sigma0` must be non-negative, got {sigma0}")));
            }
            ModelSpec::Vector(VectorModelSpec {
                x0: vec![param(params, "f0", Some(100.0))?],
                drift: vec![StateFn::Constant { value: 0.0 }],
                vol: vec![vec![StateFn::Constant { value: sigma0 }]],
                correlation: None,
            })
        }
    };
    spec.validate()?;
    Ok(spec)
}
