//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::exec::Rayon;
use crate::io::write_json;
use crate::run::{cmd_check, cmd_export_h, cmd_simulate, run_dir, vix_from_chain};
use crate::scenario::{self, LoadedScenario};

/// All enabled checks passed, or the command succeeded.
pub const EXIT_OK: i32 = 0;
/// At least one enabled check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Unreadable or invalid input.
pub const EXIT_INPUT_ERROR: i32 = 2;

const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "vixlab", version, about = "VIX replication and VIX-futures consistency checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Computes the VIX from one or two option-chain files.
    VixFromChain {
        /// Chain CSV (with `<stem>.meta.json`) or JSON files.
        #[arg(required = true, num_args = 1..=2)]
        chains: Vec<PathBuf>,
        /// Directory for `vix.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulates the scenario's index model and exports paths.
    Simulate(RunArgs),
    /// Runs the scenario's consistency checks.
    Check {
        #[command(flatten)]
        run: RunArgs,
        /// Multiplies every check tolerance.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// Writes the scenario's variance function as JSON.
    ExportH(RunArgs),
    /// Prints the version.
    Version,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Parent of the run directory; defaults to the scenario's `outputs.dir`, else `runs`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "VIXLAB_THREADS")]
    pub threads: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<LoadedScenario> {
        let mut sc = scenario::load(&self.scenario)?;
        if let Some(seed) = self.seed {
            sc.scenario.simulation.seed = seed;
        }
        Ok(sc)
    }

    fn exec(&self) -> Result<Rayon> {
        let threads = match self.threads {
            Some(0) => return Err(Error::Format("--threads must be at least 1".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, usize::from),
        };
        Ok(Rayon::new(threads))
    }

    fn dir(&self, sc: &LoadedScenario) -> Result<PathBuf> {
        let out = match (&self.out, &sc.scenario.outputs.dir) {
            (Some(o), _) => o.clone(),
            (None, Some(d)) => sc.base_dir.join(d),
            (None, None) => PathBuf::from(DEFAULT_OUT),
        };
        run_dir(&out, &sc.hash()?)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(crate::error::io_err(dir))
}

/// Executes a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::VixFromChain { chains, out } => {
            let report = vix_from_chain(&chains)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            create_dir(&dir)?;
            let path = dir.join("vix.json");
            write_json(&path, &report)?;
            for e in &report.expiries {
                println!("sub-index {} days: {:.2}", e.days_to_expiry, e.sub_index);
            }
            println!("VIX {:.2}", report.headline);
            eprintln!("wrote {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => {
            let sc = args.load()?;
            let exec = args.exec()?;
            let dir = args.dir(&sc)?;
            let summary = cmd_simulate(&sc, &dir, &exec)?;
            print!("{}", summary.table());
            eprintln!("wrote {}", dir.display());
            Ok(EXIT_OK)
        }
        Command::Check { run, tolerance_scale } => {
            let sc = run.load()?;
            let exec = run.exec()?;
            let dir = run.dir(&sc)?;
            let report = cmd_check(&sc, &dir, tolerance_scale, &exec)?;
            print!("{}", report.table());
            eprintln!("wrote {}", dir.display());
            Ok(if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::ExportH(args) => {
            let sc = args.load()?;
            let exec = args.exec()?;
            let dir = args.dir(&sc)?;
            cmd_export_h(&sc, &dir, &exec)?;
            println!("{}", dir.join("h.json").display());
            Ok(EXIT_OK)
        }
        Command::Version => {
            println!("vixlab {}", env!("CARGO_PKG_VERSION"));
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args`, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}
