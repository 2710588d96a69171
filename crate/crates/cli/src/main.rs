mod config;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{apply_override, validate_config, Command, ConfigError};

#[derive(Parser)]
#[command(name = "pqmt", version, about = "Memory-shared photonic quantum memtransistor experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Two-mode device loops per gate level.
    DeviceHysteresis(Common),
    /// Network coherence loop for one drive pair, per memory-sharing strength.
    NetworkHysteresis(Common),
    /// Loop areas over all pairs of few-photon drive states.
    Ensemble(Common),
    /// Per-state marginal loop areas.
    Marginal(Common),
    /// Transmittance vectors and read-out features for an image set.
    Reservoir(Common),
    /// Reservoir features plus a trained softmax read-out.
    Train(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set memory.d=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Base seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Config(Vec<ConfigError>),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn config_error(key: &str, message: impl Into<String>) -> Failure {
    Failure::Config(vec![ConfigError {
        key: key.to_owned(),
        message: message.into(),
    }])
}

fn load_config(cmd: Command, args: &Common) -> Result<Value, Failure> {
    let text = fs::read_to_string(&args.config).map_err(|e| config_error("<file>", format!("{}: {e}", args.config.display())))?;
    let mut raw: Value = serde_json::from_str(&text).map_err(|e| config_error("<file>", format!("{}: {e}", args.config.display())))?;
    for spec in &args.overrides {
        apply_override(&mut raw, spec).map_err(|e| Failure::Config(vec![e]))?;
    }
    if let Some(seed) = args.seed {
        apply_override(&mut raw, &format!("seed={seed}")).map_err(|e| Failure::Config(vec![e]))?;
    }
    let base = args.config.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base = base.canonicalize().unwrap_or_else(|_| base.to_path_buf());
    validate_config(cmd, &raw, &base).map_err(Failure::Config)
}

fn execute(cmd: Command, args: &Common) -> Result<(), Failure> {
    let resolved = load_config(cmd, args)?;
    if args.jobs == Some(0) {
        return Err(config_error("--jobs", "must be at least 1"));
    }
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    fs::create_dir_all(&args.out).map_err(|e| Failure::Runtime(anyhow::anyhow!("{}: {e}", args.out.display())))?;
    pqmt::dataio::write_json(args.out.join("resolved_config.json"), &resolved).map_err(|e| Failure::Runtime(e.into()))?;
    let started = Instant::now();
    let details = run::dispatch(cmd, &resolved, &args.out)?;
    let metadata = json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_file": args.config.to_string_lossy(),
        "config": resolved,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "details": details,
    });
    pqmt::dataio::write_json(args.out.join("metadata.json"), &metadata).map_err(|e| Failure::Runtime(e.into()))?;
    log::info!("{} finished in {:.2?}", cmd.name(), started.elapsed());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Sub::DeviceHysteresis(a) => (Command::DeviceHysteresis, a),
        Sub::NetworkHysteresis(a) => (Command::NetworkHysteresis, a),
        Sub::Ensemble(a) => (Command::Ensemble, a),
        Sub::Marginal(a) => (Command::Marginal, a),
        Sub::Reservoir(a) => (Command::Reservoir, a),
        Sub::Train(a) => (Command::Train, a),
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(errors)) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
