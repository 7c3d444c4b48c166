//! The squared-VIX function `h` and the coefficients of the VIX dynamics.
//!
//! `h` is produced by Monte Carlo ([`h_by_mc`]), by a Feynman–Kac solve ([`h_by_fk`]) or
//! from a closed form, and always carries the factor `N/(2τ*)` so that `√h` is in vol points.

mod coeffs;
mod fk;
mod mc;
mod surface;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::models::VixConvention;
use crate::{Error, Result};

pub use coeffs::{ito_drift_of_sqrt_h, vix_coefficients, SurfaceInput, VixCoefficients};
pub use fk::{fk_backward, h_by_fk, matched_curve, stationarity_residual, FkOptions};
pub use mc::{h_by_mc, McOptions};
pub use surface::{
    bump_partials, heston_otm_prices, measure_weights, w_from_option_grid, BlackSurface, HestonSurface, OptionSurface, SurfacePartials,
    WFromGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Mc,
    Fk,
    ClosedForm,
}

/// Grid axis over one state component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub component: usize,
    pub nodes: Vec<f64>,
}

/// `H(t, x)` on `[0, τ*]` for one-axis solves, `values[time][node]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSlices {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Gradient of `h` with a flag set when an end-of-grid stencil was involved.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub at_boundary: bool,
}

/// Tabulated `h(x)` over a tensor grid of selected state components.
///
/// Components without an axis are held at `base_state`. With one axis values are cubic
/// Hermite in the nodal values and slopes; with several, multilinear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFunction {
    pub provenance: Provenance,
    pub convention: VixConvention,
    pub state_dim: usize,
    pub base_state: Vec<f64>,
    pub axes: Vec<Axis>,
    /// Row-major over axes (last axis fastest).
    pub values: Vec<f64>,
    /// Nodal `∂h/∂x` per axis, same layout as `values`.
    pub gradients: Vec<Vec<f64>>,
    /// Nodal `∂²h/∂x²` per axis.
    pub curvatures: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
    /// Per-axis range treated as the grid interior by residual checks.
    pub interior: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_slices: Option<TimeSlices>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl VarianceFunction {
    /// Builds the function from nodal values; slopes and curvatures come from
    /// second-order finite differences along each axis.
    pub fn from_grid(
        provenance: Provenance,
        convention: VixConvention,
        base_state: Vec<f64>,
        axes: Vec<Axis>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let expected: usize = axes.iter().map(|a| a.nodes.len()).product();
        if values.len() != expected {
            return Err(Error::Dimension(format!("{} values for a grid of {expected} nodes", values.len())));
        }
        for a in &axes {
            if a.component >= base_state.len() {
                return Err(Error::Dimension(format!("axis component {} out of range", a.component)));
            }
            if a.nodes.len() < 3 || a.nodes.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter("axis nodes must be increasing with at least three nodes".into()));
            }
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.nodes.len()).collect();
        let mut gradients = Vec::with_capacity(axes.len());
        let mut curvatures = Vec::with_capacity(axes.len());
        for (k, axis) in axes.iter().enumerate() {
            let stride: usize = shape[k + 1..].iter().product();
            let mut g = vec![0.0; values.len()];
            let mut c = vec![0.0; values.len()];
            for start in 0..values.len() {
                if (start / stride) % shape[k] != 0 {
                    continue;
                }
                let line: Vec<f64> = (0..shape[k]).map(|i| values[start + i * stride]).collect();
                let (d1, d2) = math::nodal_derivatives(&axis.nodes, &line);
                for i in 0..shape[k] {
                    g[start + i * stride] = d1[i];
                    c[start + i * stride] = d2[i];
                }
            }
            gradients.push(g);
            curvatures.push(c);
        }
        let interior = axes.iter().map(|a| (a.nodes[1], a.nodes[a.nodes.len() - 2])).collect();
        Ok(Self {
            provenance,
            convention,
            state_dim: base_state.len(),
            base_state,
            axes,
            values,
            gradients,
            curvatures,
            std_errors: None,
            interior,
            time_slices: None,
            note: String::new(),
        })
    }

    /// Grid-node state vectors in storage order.
    pub fn node_states(&self) -> Vec<Vec<f64>> {
        let shape: Vec<usize> = self.axes.iter().map(|a| a.nodes.len()).collect();
        (0..self.values.len())
            .map(|flat| {
                let mut x = self.base_state.clone();
                let mut rem = flat;
                for k in (0..self.axes.len()).rev() {
                    let i = rem % shape[k];
                    rem /= shape[k];
                    x[self.axes[k].component] = self.axes[k].nodes[i];
                }
                x
            })
            .collect()
    }

    /// True when every axis coordinate of `x` lies in the declared interior.
    pub fn in_interior(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(&self.interior).all(|(a, &(lo, hi))| {
            let v = x[a.component];
            v >= lo && v <= hi
        })
    }

    fn cells(&self, x: &[f64]) -> (Vec<usize>, Vec<f64>, bool) {
        let mut idx = Vec::with_capacity(self.axes.len());
        let mut wts = Vec::with_capacity(self.axes.len());
        let mut boundary = false;
        for a in &self.axes {
            let v = x[a.component];
            let n = a.nodes.len();
            let i = math::locate(&a.nodes, v);
            if i == 0 || i == n - 2 || v < a.nodes[0] || v > a.nodes[n - 1] {
                boundary = true;
            }
            let w = ((v - a.nodes[i]) / (a.nodes[i + 1] - a.nodes[i])).clamp(0.0, 1.0);
            idx.push(i);
            wts.push(w);
        }
        (idx, wts, boundary)
    }

    fn multilinear(&self, field: &[f64], idx: &[usize], wts: &[f64]) -> f64 {
        let k = self.axes.len();
        let shape: Vec<usize> = self.axes.iter().map(|a| a.nodes.len()).collect();
        let mut total = 0.0;
        for corner in 0..(1usize << k) {
            let mut flat = 0;
            let mut w = 1.0;
            for a in 0..k {
                let up = (corner >> a) & 1;
                flat = flat * shape[a] + idx[a] + up;
                w *= if up == 1 { wts[a] } else { 1.0 - wts[a] };
            }
            total += w * field[flat];
        }
        total
    }

    fn one_axis(&self, v: f64) -> (f64, f64, f64) {
        let nodes = &self.axes[0].nodes;
        let i = math::locate(nodes, v);
        let vc = v.clamp(nodes[0], nodes[nodes.len() - 1]);
        let (val, slope) = math::hermite(
            nodes[i],
            nodes[i + 1],
            self.values[i],
            self.values[i + 1],
            self.gradients[0][i],
            self.gradients[0][i + 1],
            vc,
        );
        let w = (vc - nodes[i]) / (nodes[i + 1] - nodes[i]);
        let curv = self.curvatures[0][i] * (1.0 - w) + self.curvatures[0][i + 1] * w;
        // Linear continuation outside the grid.
        let val = val + slope * (v - vc);
        (val, slope, curv)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.axes.len() {
            0 => self.values[0],
            1 => self.one_axis(x[self.axes[0].component]).0,
            _ => {
                let (idx, wts, _) = self.cells(x);
                self.multilinear(&self.values, &idx, &wts)
            }
        }
    }

    /// `∂h/∂x_i` for every state component.
    pub fn gradient(&self, x: &[f64]) -> Gradient {
        let mut values = vec![0.0; self.state_dim];
        if self.axes.is_empty() {
            return Gradient { values, at_boundary: false };
        }
        let (idx, wts, at_boundary) = self.cells(x);
        if self.axes.len() == 1 {
            values[self.axes[0].component] = self.one_axis(x[self.axes[0].component]).1;
        } else {
            for (k, a) in self.axes.iter().enumerate() {
                values[a.component] = self.multilinear(&self.gradients[k], &idx, &wts);
            }
        }
        Gradient { values, at_boundary }
    }

    /// Row-major Hessian over all state components.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.state_dim;
        let mut out = vec![0.0; d * d];
        match self.axes.len() {
            0 => {}
            1 => {
                let c = self.axes[0].component;
                out[c * d + c] = self.one_axis(x[c]).2;
            }
            _ => {
                let (idx, wts, _) = self.cells(x);
                for (k, a) in self.axes.iter().enumerate() {
                    out[a.component * d + a.component] = self.multilinear(&self.curvatures[k], &idx, &wts);
                }
                for (j, aj) in self.axes.iter().enumerate() {
                    let i = idx[j];
                    let step = 1e-3 * (aj.nodes[i + 1] - aj.nodes[i]);
                    let mut up = x.to_vec();
                    let mut dn = x.to_vec();
                    up[aj.component] += step;
                    dn[aj.component] -= step;
                    let (gu, gd) = (self.gradient(&up).values, self.gradient(&dn).values);
                    for ai in self.axes.iter() {
                        if ai.component != aj.component {
                            let v = (gu[ai.component] - gd[ai.component]) / (2.0 * step);
                            out[ai.component * d + aj.component] += 0.5 * v;
                            out[aj.component * d + ai.component] += 0.5 * v;
                        }
                    }
                }
            }
        }
        out
    }
}

/// `∂h/∂x_i`, with the boundary flag of the stencil used.
pub fn gradient_h(hf: &VarianceFunction, x: &[f64]) -> Gradient {
    hf.gradient(x)
}

/// `w_i = ∂_i h / (2h)`.
pub fn w_from_h(hf: &VarianceFunction, x: &[f64]) -> Result<Vec<f64>> {
    let h = hf.value(x);
    if !(h > 0.0) {
        return Err(Error::NonPositiveH(h));
    }
    Ok(hf.gradient(x).values.into_iter().map(|g| g / (2.0 * h)).collect())
}
