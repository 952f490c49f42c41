//! `brwre`: reproducible experiment runner for branching random walks in
//! random environment and their directed-polymer partition functions.
//!
//! Every run takes one JSON config (from `--config` or a named `--preset`),
//! writes CSV/JSON artifacts plus a checksummed `manifest.json` into the
//! output directory, and exits 0 on success, 1 on configuration errors,
//! 2 on runtime failures, and 3 when `verify` finds a violated property.

mod commands;
mod config;
mod error;
mod output;
mod presets;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{sha256_hex, OutputWriter};

#[derive(Parser)]
#[command(
    name = "brwre",
    version,
    about = "Monte Carlo laboratory for branching random walks in space-time \
             i.i.d. random environment"
)]
struct Cli {
    /// Path to an experiment config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Use a built-in experiment config instead of --config.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Override the master seed of the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (default: env BRWRE_OUT, then ./out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: env BRWRE_WORKERS, then all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run tracked population trajectories.
    Simulate,
    /// Estimate the survival probability over environment replicas.
    Survival,
    /// Estimate survival along a ray with a path-forcing lower bound.
    LocalSurvival,
    /// Estimate the global free energy (1/t) ln Z_t with brackets.
    FreeEnergy,
    /// Estimate the directional free energy along a ray.
    Directional,
    /// Emit the annealed upper bound, the single-site chain lower bound,
    /// and the survival estimate side by side.
    Bounds,
    /// Compute the quenched extinction field on a window.
    ExtinctionField,
    /// Run the embedded single-site chain along a ray.
    EmbeddedSw,
    /// Tabulate free-energy concentration tails against the bound.
    Concentration,
    /// Run a calibrated self-check suite; exit 3 on violation.
    Verify {
        #[arg(long, default_value = "quick")]
        suite: String,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Simulate => "simulate",
            Cmd::Survival => "survival",
            Cmd::LocalSurvival => "local-survival",
            Cmd::FreeEnergy => "free-energy",
            Cmd::Directional => "directional",
            Cmd::Bounds => "bounds",
            Cmd::ExtinctionField => "extinction-field",
            Cmd::EmbeddedSw => "embedded-sw",
            Cmd::Concentration => "concentration",
            Cmd::Verify { .. } => "verify",
        }
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return 1;
        }
        Err(e) => {
            // --help / --version.
            print!("{e}");
            return 0;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn configure_workers(cli_workers: Option<usize>) -> CliResult<()> {
    let workers = match cli_workers {
        Some(n) => Some(n),
        None => match std::env::var("BRWRE_WORKERS") {
            Ok(text) => Some(text.parse::<usize>().map_err(|_| {
                CliError::config("BRWRE_WORKERS", format!("not a worker count: {text:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::config("workers", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot size worker pool: {e}")))?;
    }
    Ok(())
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "--config and --preset are mutually exclusive".to_string(),
        )),
        (Some(path), None) => ExperimentConfig::from_file(path),
        (None, Some(name)) => {
            let config = presets::preset(name)?;
            if let Some(desc) = presets::describe(name) {
                eprintln!("preset {name}: {desc}");
            }
            Ok(config)
        }
        (None, None) => {
            if matches!(cli.cmd, Cmd::Verify { .. }) {
                // verify carries its own calibrated config.
                let mut config = presets::preset("thm-NT-growth")?;
                config.disorder = presets::constant_binary_spec(2024_0007);
                Ok(config)
            } else {
                Err(CliError::Config(
                    "one of --config PATH or --preset NAME is required".to_string(),
                ))
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_workers(cli.workers)?;
    let mut config = load_config(&cli)?;
    if let Some(seed) = cli.seed {
        config.disorder.master_seed = seed;
    }
    config.validate()?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("BRWRE_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut writer = OutputWriter::new(&out_dir)?;
    let canonical = config.canonical_json();
    let config_sha = sha256_hex(canonical.as_bytes());
    writer.write_text("config.json", &canonical)?;

    let result = match &cli.cmd {
        Cmd::Simulate => commands::cmd_simulate(&config, &mut writer),
        Cmd::Survival => commands::cmd_survival(&config, &mut writer),
        Cmd::LocalSurvival => commands::cmd_local_survival(&config, &mut writer),
        Cmd::FreeEnergy => commands::cmd_free_energy(&config, &mut writer),
        Cmd::Directional => commands::cmd_directional(&config, &mut writer),
        Cmd::Bounds => commands::cmd_bounds(&config, &mut writer),
        Cmd::ExtinctionField => commands::cmd_extinction_field(&config, &mut writer),
        Cmd::EmbeddedSw => commands::cmd_embedded_sw(&config, &mut writer),
        Cmd::Concentration => commands::cmd_concentration(&config, &mut writer),
        Cmd::Verify { suite } => commands::cmd_verify(&config, suite, &mut writer),
    };
    let name = cli.cmd.name();
    match result {
        Ok(()) => writer.finish(name, &config_sha, config.disorder.master_seed),
        Err(CliError::Violation(v)) => {
            // The verify report is itself an artifact; seal the manifest.
            writer.finish(name, &config_sha, config.disorder.master_seed)?;
            Err(CliError::Violation(v))
        }
        Err(e) => Err(e),
    }
}
