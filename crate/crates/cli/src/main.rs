//! `simulate`: batch driver for the EG miscible-displacement scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use egmd::driver::config::{parse_override, ConfigError};
use egmd::{run, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(
    name = "simulate",
    version,
    about = "Enriched Galerkin flow and transport simulator"
)]
struct Args {
    /// Scenario preset: single_vortex, perm_block, random_perm_2d,
    /// hele_shaw_rect, hele_shaw_radial or manufactured.
    #[arg(long)]
    scenario: Option<String>,
    /// key=value configuration file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for VTK files, diagnostics.csv and config.txt.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for assembly; 1 gives bitwise reproducible output.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    no_amr: bool,
    /// Zero both entropy-viscosity coefficients.
    #[arg(long)]
    no_stab: bool,
    /// Override a single configuration key, e.g. `--set dt=0.005`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(args: &Args) -> Result<ScenarioConfig, ConfigError> {
    let text =
        match &args.config {
            Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
                ConfigError::Invalid(format!("cannot read {}: {e}", path.display()))
            })?),
            None => None,
        };
    let mut overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if args.no_amr {
        overrides.push(("amr".into(), "false".into()));
    }
    if args.no_stab {
        overrides.push(("lambda_lin".into(), "0".into()));
        overrides.push(("lambda_ent".into(), "0".into()));
    }
    ScenarioConfig::load(args.scenario.as_deref(), text.as_deref(), &overrides)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let scenario = config.scenario;
    match pool.install(|| run(config, &args.out)) {
        Ok(summary) => {
            println!(
                "{scenario}: {} steps to t = {}, {} VTK files, diagnostics in {}",
                summary.steps,
                summary.final_time,
                summary.vtk_files.len(),
                summary.csv.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
