use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::models::{Curve, StateFn};
use crate::sde::PathBundle;
use crate::{Error, Result};

/// Candidate market price of risk `λ_t`, one entry per Brownian factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarketPriceOfRisk {
    Constant { values: Vec<f64> },
    /// Deterministic functions of time.
    Deterministic { fns: Vec<Curve> },
    /// Functions of the state.
    State { fns: Vec<StateFn> },
}

impl MarketPriceOfRisk {
    pub fn zero(n_factors: usize) -> Self {
        MarketPriceOfRisk::Constant { values: vec![0.0; n_factors] }
    }

    pub fn n_factors(&self) -> usize {
        match self {
            MarketPriceOfRisk::Constant { values } => values.len(),
            MarketPriceOfRisk::Deterministic { fns } => fns.len(),
            MarketPriceOfRisk::State { fns } => fns.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, MarketPriceOfRisk::Constant { values } if values.iter().all(|&v| v == 0.0))
    }

    pub fn state_dependent(&self) -> bool {
        matches!(self, MarketPriceOfRisk::State { .. })
    }

    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            MarketPriceOfRisk::Constant { values } => out.copy_from_slice(values),
            MarketPriceOfRisk::Deterministic { fns } => {
                for (o, f) in out.iter_mut().zip(fns) {
                    *o = f.value(t);
                }
            }
            MarketPriceOfRisk::State { fns } => {
                for (o, f) in out.iter_mut().zip(fns) {
                    *o = f.eval(x);
                }
            }
        }
    }

    pub fn check_dim(&self, n_factors: usize, state_dim: usize) -> Result<()> {
        if self.n_factors() != n_factors {
            return Err(Error::Dimension(format!(
                "market price of risk has {} entries, model has {n_factors} factors",
                self.n_factors()
            )));
        }
        if let MarketPriceOfRisk::State { fns } = self {
            if fns.iter().any(|f| matches!(f, StateFn::Component { index, .. } if *index >= state_dim)) {
                return Err(Error::Dimension("state function index out of range".into()));
            }
        }
        Ok(())
    }
}

/// Girsanov shift of the stored increments: `ΔW^Q = ΔW^P − λ(t_n, X_n)Δt`. States are kept.
pub fn tilt_bundle(bundle: &PathBundle, lambda: &MarketPriceOfRisk) -> Result<PathBundle> {
    lambda.check_dim(bundle.n_factors, bundle.dim)?;
    let d = bundle.n_factors;
    let dt = bundle.grid.dt();
    let mut out = bundle.clone();
    let mut lam = vec![0.0; d];
    for p in 0..bundle.n_paths {
        for n in 0..bundle.grid.n_steps {
            lambda.eval(bundle.grid.time(n), bundle.state(p, n), &mut lam);
            if lam.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { path: p, step: n });
            }
            let row = (p * bundle.grid.n_steps + n) * d;
            for j in 0..d {
                out.increments[row + j] -= lam[j] * dt;
            }
        }
    }
    Ok(out)
}
