//! Scenario files: schema, hashing and resolution into core inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vixlab_core::consistency::{CheckRequest, MarketPriceOfRisk};
use vixlab_core::models::{
    builtin, proportional_termstructure, Curve, ModelSpec, Scheme, TermFn, TermStructureSpec, VixConvention,
};
use vixlab_core::sde::{NoiseSpec, PathMap, TimeGrid};
use vixlab_core::vixcore::{
    h_by_fk, h_by_mc, matched_curve, Axis, BlackSurface, FkOptions, HestonSurface, McOptions, OptionSurface,
    VarianceFunction,
};

use crate::error::{io_err, json_err, Error, Result};
use crate::io::read_variance_function;

pub const SCHEMA_VERSION: u32 = 1;

/// A pricing surface and its strike grid.
pub type SurfaceParts = (Box<dyn OptionSurface>, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default)]
    pub convention: VixConvention,
    pub index_model: IndexModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term_structure: Option<TermStructureInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceInput>,
    pub simulation: Simulation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market_price_of_risk: Option<MarketPriceOfRisk>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option_surface: Option<SurfaceSpec>,
    #[serde(default)]
    pub checks: Vec<CheckRequest>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A named model with parameters, or a full model spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexModel {
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Spec(ModelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermStructureInput {
    /// `μ^V ≡ 0` and a single loading `β` on `factor` (default: the last factor).
    Proportional {
        curve: CurveInput,
        beta: TermFn,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        factor: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_star: Option<f64>,
    },
    Custom {
        spec: TermStructureSpec,
    },
}

/// Initial futures curve; `matched` prices `E√h` from the variance function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveInput {
    Matched {
        #[serde(default = "default_matched_steps")]
        steps: usize,
    },
    Flat {
        level: f64,
    },
    Exponential {
        level: f64,
        rate: f64,
    },
    Tabulated {
        maturities: Vec<f64>,
        values: Vec<f64>,
    },
}

fn default_matched_steps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceInput {
    Fk(FkOptions),
    Mc {
        n_paths: usize,
        n_steps: usize,
        /// Defaults to the simulation seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default)]
        axes: Vec<Axis>,
    },
    /// A variance function written by `export-h`, relative to the scenario file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub n_paths: usize,
    pub n_steps: usize,
    /// Defaults to `T*` of the term structure, else `τ*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
}

/// Option surface for the strike-quadrature coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Black { sigma: f64, strikes: StrikeGrid },
    Heston { kappa: f64, theta: f64, eta: f64, rho: f64, strikes: StrikeGrid },
}

/// Absolute strikes `from, from + step, …, to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrikeGrid {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl StrikeGrid {
    pub fn strikes(&self) -> Result<Vec<f64>> {
        if !(self.from > 0.0 && self.to > self.from && self.step > 0.0) {
            return Err(Error::Scenario("strike grid needs 0 < from < to and step > 0".into()));
        }
        let n = ((self.to - self.from) / self.step).round() as usize;
        Ok((0..=n).map(|i| self.from + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Txt,
    Csv,
    Bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Txt, Format::Csv]
}

impl Default for Outputs {
    fn default() -> Self {
        Self { dir: None, formats: default_formats() }
    }
}

impl Outputs {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// A parsed scenario together with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        self.convention.validate()?;
        Ok(())
    }
}

pub fn load(path: &Path) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let scenario = Scenario::from_json(&text).map_err(json_err(path))?;
    scenario.validate()?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedScenario { scenario, base_dir })
}

impl LoadedScenario {
    fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// SHA-256 over the canonical scenario JSON and any referenced files, in hex.
    pub fn hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        let canonical = serde_json::to_vec(&self.scenario).map_err(|e| Error::Scenario(e.to_string()))?;
        hasher.update(&canonical);
        if let Some(VarianceInput::File { path }) = &self.scenario.variance {
            let p = self.resolve_path(path);
            hasher.update(std::fs::read(&p).map_err(io_err(p))?);
        }
        Ok(hex::encode(hasher.finalize()))
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let model = match &self.scenario.index_model {
            IndexModel::Builtin { name, params } => builtin(name, params)?,
            IndexModel::Spec(spec) => spec.clone(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Variance function as configured; stochastic-volatility models default to the PDE solve.
    pub fn variance_function<E: PathMap>(&self, model: &ModelSpec, exec: &E) -> Result<VarianceFunction> {
        let conv = &self.scenario.convention;
        let default_fk;
        let input = match &self.scenario.variance {
            Some(v) => v,
            None => {
                default_fk = VarianceInput::Fk(FkOptions::default());
                &default_fk
            }
        };
        let hf = match input {
            VarianceInput::Fk(opts) => match model {
                ModelSpec::StochVol(spec) => h_by_fk(spec, conv, opts)?,
                ModelSpec::Vector(_) => {
                    return Err(Error::Scenario("variance method `fk` needs a stochastic-volatility model".into()))
                }
            },
            VarianceInput::Mc { n_paths, n_steps, seed, axes } => {
                let opts = McOptions {
                    n_paths: *n_paths,
                    n_steps: *n_steps,
                    seed: seed.unwrap_or(self.scenario.simulation.seed),
                    scheme: self.scenario.simulation.scheme,
                    start_time: 0.0,
                };
                h_by_mc(model, conv, axes, &opts, exec)?
            }
            VarianceInput::File { path } => {
                let hf = read_variance_function(&self.resolve_path(path))?;
                if hf.state_dim != model.state_dim() {
                    return Err(Error::Scenario(format!(
                        "variance function has dimension {}, model has {}",
                        hf.state_dim,
                        model.state_dim()
                    )));
                }
                if hf.convention != *conv {
                    return Err(Error::Scenario("variance function was built under a different convention".into()));
                }
                hf
            }
        };
        Ok(hf)
    }

    fn t_star_hint(&self) -> Option<f64> {
        match &self.scenario.term_structure {
            Some(TermStructureInput::Proportional { t_star, .. }) => *t_star,
            Some(TermStructureInput::Custom { spec }) => Some(spec.t_star),
            None => None,
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let sim = &self.scenario.simulation;
        let t_end = sim.t_end.or_else(|| self.t_star_hint()).unwrap_or(self.scenario.convention.tau_star);
        Ok(TimeGrid::new(0.0, t_end, sim.n_steps)?)
    }

    pub fn noise(&self, model: &ModelSpec) -> NoiseSpec {
        NoiseSpec::for_model(model, self.scenario.simulation.seed)
    }

    pub fn scheme(&self, model: &ModelSpec) -> Scheme {
        self.scenario.simulation.scheme.unwrap_or_else(|| model.default_scheme())
    }

    pub fn term_structure(&self, model: &ModelSpec, hf: &VarianceFunction) -> Result<TermStructureSpec> {
        let input = self
            .scenario
            .term_structure
            .as_ref()
            .ok_or_else(|| Error::Scenario("`term_structure` is required".into()))?;
        let ts = match input {
            TermStructureInput::Custom { spec } => spec.clone(),
            TermStructureInput::Proportional { curve, beta, factor, t_star } => {
                let t_star = match t_star {
                    Some(t) => *t,
                    None => self.grid()?.t_end,
                };
                let curve = match curve {
                    CurveInput::Matched { steps } => match model {
                        ModelSpec::StochVol(spec) => matched_curve(spec, hf, t_star, *steps)?,
                        ModelSpec::Vector(_) => {
                            return Err(Error::Scenario("a matched curve needs a stochastic-volatility model".into()))
                        }
                    },
                    CurveInput::Flat { level } => Curve::Flat { level: *level },
                    CurveInput::Exponential { level, rate } => Curve::Exponential { level: *level, rate: *rate },
                    CurveInput::Tabulated { maturities, values } => {
                        Curve::Tabulated { maturities: maturities.clone(), values: values.clone() }
                    }
                };
                let d = model.n_factors();
                proportional_termstructure(curve, beta.clone(), d, factor.unwrap_or(d - 1), t_star)?
            }
        };
        ts.validate(model.n_factors())?;
        Ok(ts)
    }

    pub fn lambda(&self, model: &ModelSpec) -> Result<MarketPriceOfRisk> {
        let lambda = self
            .scenario
            .market_price_of_risk
            .clone()
            .unwrap_or_else(|| MarketPriceOfRisk::zero(model.n_factors()));
        lambda.check_dim(model.n_factors(), model.state_dim())?;
        Ok(lambda)
    }

    /// Option surface and its strikes, when configured.
    pub fn surface(&self) -> Result<Option<SurfaceParts>> {
        Ok(match &self.scenario.option_surface {
            None => None,
            Some(SurfaceSpec::Black { sigma, strikes }) => {
                Some((Box::new(BlackSurface { sigma: *sigma }) as Box<dyn OptionSurface>, strikes.strikes()?))
            }
            Some(SurfaceSpec::Heston { kappa, theta, eta, rho, strikes }) => Some((
                Box::new(HestonSurface { kappa: *kappa, theta: *theta, eta: *eta, rho: *rho }) as Box<dyn OptionSurface>,
                strikes.strikes()?,
            )),
        })
    }
}
