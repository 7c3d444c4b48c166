//! Implied VIX from the futures family and numerical checks of the joint no-arbitrage
//! restrictions between the index model and the VIX-futures model.

mod checks;
mod family;
mod lambda;
mod martingale;
mod report;

use alloc::string::String;
use alloc::vec::Vec;

pub use checks::{
    check_c1_pathwise, check_cc1, check_cc2, check_cc3, check_cc4, check_genpde, check_stationarity, cc3_residual_form,
    genpde_residual_form, nu_diagonal,
};
pub use family::{implied_vix_path, xi_path, ImpliedVixPath, XiTerms};
pub use lambda::{tilt_bundle, MarketPriceOfRisk};
pub use martingale::{check_martingale, martingale_diagnostic, DensityDiagnostics, MartingaleDiagnostic, MaturityDrift};
pub use report::{CheckName, CheckResult, ConsistencyReport, Location, ResidualField};

use serde::{Deserialize, Serialize};

use crate::models::{ModelSpec, TermStructureSpec};
use crate::sde::{PathBundle, PathMap};
use crate::vixcore::{SurfaceInput, VarianceFunction};
use crate::{Error, Result};

/// Inputs shared by all checks of one scenario.
pub struct CheckInputs<'a> {
    pub model: &'a ModelSpec,
    pub ts: &'a TermStructureSpec,
    pub hf: &'a VarianceFunction,
    pub bundle: &'a PathBundle,
    pub lambda: &'a MarketPriceOfRisk,
    pub surface: Option<&'a SurfaceInput<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRequest {
    pub name: CheckName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Times at which the genPDE residual is evaluated.
const GENPDE_TIMES: usize = 11;

/// Runs the requested checks in order; tolerances are multiplied by `tolerance_scale`.
pub fn run_checks<E: PathMap>(
    inputs: &CheckInputs<'_>,
    requests: &[CheckRequest],
    tolerance_scale: f64,
    scenario_hash: String,
    exec: &E,
) -> Result<ConsistencyReport> {
    if requests.is_empty() {
        return Err(Error::Missing("at least one check".into()));
    }
    let CheckInputs { model, ts, hf, bundle, lambda, surface } = *inputs;
    let tol = |r: &CheckRequest| r.tolerance.unwrap_or_else(|| r.name.default_tolerance()) * tolerance_scale;
    let needs_path = requests.iter().any(|r| matches!(r.name, CheckName::Cc4 | CheckName::Cc4Integrated | CheckName::C1Pathwise));
    let ivp = if needs_path { Some(xi_path(ts, bundle, lambda, exec)?) } else { None };
    let mut results: Vec<CheckResult> = Vec::with_capacity(requests.len());
    let mut cc4: Option<(CheckResult, CheckResult)> = None;
    let mut diag = None;
    for req in requests {
        let t = tol(req);
        let result = match req.name {
            CheckName::Cc1 => check_cc1(model, lambda, bundle, t, exec)?,
            CheckName::Cc2 => check_cc2(ts, lambda, bundle, t, exec)?,
            CheckName::Cc3 => check_cc3(ts, model, hf, bundle, t, exec)?,
            CheckName::Genpde => check_genpde(hf, model, ts, GENPDE_TIMES, t)?,
            CheckName::Cc4 | CheckName::Cc4Integrated => {
                if cc4.is_none() {
                    let ivp = ivp.as_ref().ok_or_else(|| Error::Missing("implied VIX".into()))?;
                    cc4 = Some(check_cc4(model, hf, bundle, ivp, lambda, surface, t, exec)?);
                }
                let (a, b) = cc4.clone().unwrap_or_else(|| unreachable!());
                if req.name == CheckName::Cc4 { a } else { b }.with_tolerance(t)
            }
            CheckName::C1Pathwise => {
                let ivp = ivp.as_ref().ok_or_else(|| Error::Missing("implied VIX".into()))?;
                check_c1_pathwise(hf, ivp, bundle, t, exec)?
            }
            CheckName::Martingale => {
                let d = martingale_diagnostic(ts, bundle, lambda, exec)?;
                let r = check_martingale(&d, t);
                diag = Some(d);
                r
            }
            CheckName::Stationarity => check_stationarity(model, hf, t)?,
        };
        results.push(result);
    }
    let passed = results.iter().all(|r| r.passed);
    Ok(ConsistencyReport { scenario_hash, h_provenance: hf.provenance, results, martingale: diag, passed })
}
