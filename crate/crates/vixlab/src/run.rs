//! Commands as library calls; the CLI is a thin wrapper over these.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vixlab_core::chain::{compute_single_expiry_vix, interpolate_vix_30d, VixComputation};
use vixlab_core::consistency::{run_checks, CheckInputs, ConsistencyReport};
use vixlab_core::math::mean_and_se;
use vixlab_core::models::Scheme;
use vixlab_core::sde::{simulate, PathBundle, PathMap};
use vixlab_core::vixcore::{SurfaceInput, VarianceFunction};

use crate::error::{io_err, Error, Result};
use crate::io::{read_chain, write_json, write_paths_bin, write_paths_csv, write_report, write_variance_function};
use crate::scenario::{Format, LoadedScenario};

/// Characters of the scenario hash used to name a run directory.
pub const RUN_ID_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VixReport {
    pub expiries: Vec<VixComputation>,
    /// 30-day interpolation, present with two expiries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vix_30d: Option<f64>,
    /// The interpolated value, or the single sub-index.
    pub headline: f64,
}

pub fn vix_from_chain(files: &[PathBuf]) -> Result<VixReport> {
    if files.is_empty() || files.len() > 2 {
        return Err(Error::Format(format!("expected one or two chain files, got {}", files.len())));
    }
    let expiries = files
        .iter()
        .map(|f| {
            let chain = read_chain(f)?;
            compute_single_expiry_vix(&chain).map_err(|e| Error::Format(format!("{}: {e}", f.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let vix_30d = match expiries.as_slice() {
        [a, b] => Some(interpolate_vix_30d(a, b)?),
        _ => None,
    };
    let headline = vix_30d.unwrap_or(expiries[0].sub_index);
    Ok(VixReport { expiries, vix_30d, headline })
}

/// Creates `<out>/<first 16 hex digits of the scenario hash>`.
pub fn run_dir(out: &Path, hash: &str) -> Result<PathBuf> {
    let dir = out.join(&hash[..RUN_ID_LEN.min(hash.len())]);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub name: String,
    pub terminal_mean: f64,
    pub terminal_std_error: f64,
    pub min: f64,
    pub max: f64,
    /// Mean of `∫x ds` over the grid (trapezoid rule).
    pub integral_mean: f64,
    pub integral_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub scenario_hash: String,
    pub n_paths: usize,
    pub n_steps: usize,
    pub t_end: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub components: Vec<ComponentSummary>,
}

impl SimulationSummary {
    pub fn component(&self, name: &str) -> Option<&ComponentSummary> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "scenario {}  paths {}  steps {}  t_end {}\n{:<6} {:>14} {:>12} {:>14} {:>12}\n",
            self.scenario_hash, self.n_paths, self.n_steps, self.t_end, "comp", "E[x_T]", "se", "E[int x]", "se"
        );
        for c in &self.components {
            s += &format!(
                "{:<6} {:>14.6e} {:>12.4e} {:>14.6e} {:>12.4e}\n",
                c.name, c.terminal_mean, c.terminal_std_error, c.integral_mean, c.integral_std_error
            );
        }
        s
    }
}

pub fn summarize(bundle: &PathBundle, scenario_hash: String) -> SimulationSummary {
    let n = bundle.grid.n_steps;
    let dt = bundle.grid.dt();
    let components = (0..bundle.dim)
        .map(|c| {
            let mut terminal = Vec::with_capacity(bundle.n_paths);
            let mut integral = Vec::with_capacity(bundle.n_paths);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in 0..bundle.n_paths {
                let mut acc = 0.0;
                for s in 0..=n {
                    let x = bundle.state(p, s)[c];
                    lo = lo.min(x);
                    hi = hi.max(x);
                    acc += if s == 0 || s == n { 0.5 * x } else { x };
                }
                terminal.push(bundle.state(p, n)[c]);
                integral.push(acc * dt);
            }
            let (tm, tse) = mean_and_se(&terminal);
            let (im, ise) = mean_and_se(&integral);
            ComponentSummary {
                name: bundle.names[c].clone(),
                terminal_mean: tm,
                terminal_std_error: tse,
                min: lo,
                max: hi,
                integral_mean: im,
                integral_std_error: ise,
            }
        })
        .collect();
    SimulationSummary {
        scenario_hash,
        n_paths: bundle.n_paths,
        n_steps: n,
        t_end: bundle.grid.t_end,
        seed: bundle.seed,
        scheme: bundle.scheme,
        components,
    }
}

/// Simulates the scenario's index model.
pub fn simulate_scenario<E: PathMap>(sc: &LoadedScenario, exec: &E) -> Result<PathBundle> {
    let model = sc.model()?;
    let sim = &sc.scenario.simulation;
    Ok(simulate(&model, &sc.noise(&model), &sc.grid()?, sim.n_paths, sc.scheme(&model), exec)?)
}

/// Runs `simulate` and writes the requested outputs into `dir`.
pub fn cmd_simulate<E: PathMap>(sc: &LoadedScenario, dir: &Path, exec: &E) -> Result<SimulationSummary> {
    let hash = sc.hash()?;
    let bundle = simulate_scenario(sc, exec)?;
    let summary = summarize(&bundle, hash);
    let out = &sc.scenario.outputs;
    if out.wants(Format::Csv) {
        write_paths_csv(&dir.join("paths.csv"), &bundle)?;
    }
    if out.wants(Format::Bin) {
        write_paths_bin(&dir.join("paths.bin"), &bundle)?;
    }
    if out.wants(Format::Json) {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    if out.wants(Format::Txt) {
        let p = dir.join("summary.txt");
        std::fs::write(&p, summary.table()).map_err(io_err(&p))?;
    }
    Ok(summary)
}

/// Builds every input and runs the enabled checks.
pub fn check_scenario<E: PathMap>(sc: &LoadedScenario, tolerance_scale: f64, exec: &E) -> Result<ConsistencyReport> {
    if sc.scenario.checks.is_empty() {
        return Err(Error::Scenario("no checks enabled".into()));
    }
    if tolerance_scale.is_nan() || tolerance_scale <= 0.0 {
        return Err(Error::Scenario(format!("tolerance scale must be positive, got {tolerance_scale}")));
    }
    let hash = sc.hash()?;
    let model = sc.model()?;
    let hf = sc.variance_function(&model, exec)?;
    let ts = sc.term_structure(&model, &hf)?;
    let lambda = sc.lambda(&model)?;
    let bundle = simulate_scenario(sc, exec)?;
    let surface = sc.surface()?;
    let surface_input = surface.as_ref().map(|(s, k)| SurfaceInput::new(s.as_ref(), k.clone()));
    let inputs = CheckInputs {
        model: &model,
        ts: &ts,
        hf: &hf,
        bundle: &bundle,
        lambda: &lambda,
        surface: surface_input.as_ref(),
    };
    Ok(run_checks(&inputs, &sc.scenario.checks, tolerance_scale, hash, exec)?)
}

/// Runs `check` and writes the report files into `dir`.
pub fn cmd_check<E: PathMap>(
    sc: &LoadedScenario,
    dir: &Path,
    tolerance_scale: f64,
    exec: &E,
) -> Result<ConsistencyReport> {
    let report = check_scenario(sc, tolerance_scale, exec)?;
    write_report(dir, &report, &sc.scenario.outputs.formats)?;
    Ok(report)
}

/// Computes the scenario's variance function and writes `h.json` into `dir`.
pub fn cmd_export_h<E: PathMap>(sc: &LoadedScenario, dir: &Path, exec: &E) -> Result<VarianceFunction> {
    let model = sc.model()?;
    let hf = sc.variance_function(&model, exec)?;
    write_variance_function(&dir.join("h.json"), &hf)?;
    Ok(hf)
}
