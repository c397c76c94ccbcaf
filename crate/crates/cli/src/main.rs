//! `wfsm`: pipeline driver for the machine, drive and optimization models.
//!
//! Exit codes: 0 success, 1 I/O or lock, 2 configuration, 3 validation,
//! 4 solver divergence, 5 infeasible cycle.

mod config;
mod error;
mod output;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wfsm_core::control::Strategy;

use config::{Loaded, Overrides};
use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "wfsm", version, about = "Wound-field synchronous machine design pipeline")]
struct Cli {
    /// Run config (TOML) or a stage manifest to rerun.
    #[arg(long, global = true, env = "WFSM_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true, env = "WFSM_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "WFSM_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "WFSM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Material grade files
    #[command(subcommand)]
    Materials(MaterialsCmd),
    /// Flux-linkage maps
    #[command(subcommand)]
    Map(MapCmd),
    /// Current control
    #[command(subcommand)]
    Control(ControlCmd),
    /// Drive-cycle energy
    #[command(subcommand)]
    Cycle(CycleCmd),
    /// Design optimization
    #[command(subcommand)]
    Optimize(OptimizeCmd),
    /// Comparison tables
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Subcommand)]
enum MaterialsCmd {
    /// Check grade files; defaults to the config's materials, then the shipped grades.
    Validate { paths: Vec<PathBuf> },
}

#[derive(Subcommand)]
enum MapCmd {
    /// Solve the flux-linkage map on the configured grid.
    Build,
}

#[derive(Subcommand)]
enum ControlCmd {
    /// Efficiency map over a torque-speed grid.
    Mtpl {
        #[arg(long, default_value = "mtpl")]
        strategy: Strategy,
    },
    /// Peak torque and power against speed.
    Envelope,
}

#[derive(Subcommand)]
enum CycleCmd {
    /// Drive-cycle energy, loss histogram and cruise efficiencies.
    Run,
}

#[derive(Subcommand)]
enum OptimizeCmd {
    /// Genetic search, fine re-evaluation of the front and selection.
    Run,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Benchmark and EDU efficiency tables against `report.baseline`.
    Compare,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            threads: self.threads,
        }
    }

    fn load(&self) -> Result<Loaded> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::config("no config (use --config or WFSM_CONFIG)"))?;
        let loaded = Loaded::load(path, &self.overrides())?;
        if let Some(n) = loaded.config.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::config(format!("threads: {e}")))?;
        }
        Ok(loaded)
    }
}

fn materials(cli: &Cli, paths: &[PathBuf]) -> Result<()> {
    let files: Vec<(PathBuf, String)> = if !paths.is_empty() {
        paths
            .iter()
            .map(|p| {
                std::fs::read_to_string(p)
                    .map(|t| (p.clone(), t))
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))
            })
            .collect::<Result<_>>()?
    } else if cli.config.is_some() {
        let l = cli.load()?;
        l.material_texts()
            .map(|(p, t)| (p.to_path_buf(), t.to_string()))
            .collect()
    } else {
        Vec::new()
    };
    let report = stages::materials_validate(&files);
    for line in &report.lines {
        println!("{line}");
    }
    match report.failure {
        Some(kind) => Err(CliError::new(kind, "material validation failed")),
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let written = match &cli.command {
        Command::Materials(MaterialsCmd::Validate { paths }) => return materials(cli, paths),
        Command::Map(MapCmd::Build) => stages::map_build(&cli.load()?)?,
        Command::Control(ControlCmd::Mtpl { strategy }) => stages::control_map(&cli.load()?, *strategy)?,
        Command::Control(ControlCmd::Envelope) => stages::control_envelope(&cli.load()?)?,
        Command::Cycle(CycleCmd::Run) => stages::cycle_run(&cli.load()?)?,
        Command::Optimize(OptimizeCmd::Run) => stages::optimize_run(&cli.load()?)?,
        Command::Report(ReportCmd::Compare) => stages::report_compare(&cli.load()?)?,
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
