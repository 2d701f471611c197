//! Command-line front end: simulate, analyze, fit and sweep.
//!
//! Every subcommand takes a JSON config (`--config`); flags override the
//! matching config fields. The fully resolved config is written next to the
//! outputs as `resolved_config.json`.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use config::{load, resolve, AnalyzeConfig, FitConfig, Format, SimulateConfig, SweepConfig};

#[derive(Parser)]
#[command(name = "tlsjump", version, about = "Quantum-jump analysis of qubits coupled to two-level systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed (simulate only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Format of curve and map outputs.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    error_json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate jump traces (and IQ records if a readout model is configured).
    Simulate,
    /// Condition traces on selection patterns and estimate g2.
    Analyze {
        /// Trace or IQ files, or directories of them.
        inputs: Vec<PathBuf>,
    },
    /// Fit the rate model to a ground and a post-jump curve.
    Fit {
        #[arg(long)]
        ground: Option<PathBuf>,
        #[arg(long)]
        post_jump: Option<PathBuf>,
        /// Number of coupled TLS.
        #[arg(long)]
        n_tls: Option<usize>,
    },
    /// Fit every point of a frequency/field sweep and locate TLS peaks.
    Sweep {
        /// Manifest: JSON list of {path, f_q_hz, field_v_per_m}.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn config_or<T: serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<Option<T>> {
    path.map(load).transpose()
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!(tlsjump::Error::InvalidArgument("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg_path = cli.config.as_deref();
    let out = &cli.out;
    match &cli.command {
        Command::Simulate => {
            let Some(mut cfg) = config_or::<SimulateConfig>(cfg_path)? else {
                bail!(tlsjump::Error::InvalidArgument("simulate needs --config".into()));
            };
            if let Some(s) = cli.seed {
                cfg.sim.seed = s;
            }
            commands::simulate(&cfg, out)
        }
        Command::Analyze { inputs } => {
            let mut cfg = config_or::<AnalyzeConfig>(cfg_path)?.unwrap_or_default();
            cfg.inputs = if inputs.is_empty() {
                cfg.inputs.iter().map(|p| resolve(cfg_path, p)).collect()
            } else {
                inputs.iter().map(|p| resolve(None, p)).collect()
            };
            if let Some(f) = cli.format {
                cfg.format = f;
            }
            commands::analyze(&cfg, out)
        }
        Command::Fit { ground, post_jump, n_tls } => {
            let mut cfg = match config_or::<FitConfig>(cfg_path)? {
                Some(mut c) => {
                    c.ground = resolve(cfg_path, &c.ground);
                    c.post_jump = resolve(cfg_path, &c.post_jump);
                    c
                }
                None => {
                    let (Some(g), Some(p)) = (ground, post_jump) else {
                        bail!(tlsjump::Error::InvalidArgument("fit needs --ground and --post-jump or --config".into()));
                    };
                    FitConfig { ground: g.clone(), post_jump: p.clone(), spec: tlsjump::FitSpec::new(1), compare: vec![] }
                }
            };
            if let Some(g) = ground {
                cfg.ground = resolve(None, g);
            }
            if let Some(p) = post_jump {
                cfg.post_jump = resolve(None, p);
            }
            if let Some(n) = n_tls {
                cfg.spec.n_tls = *n;
            }
            cfg.spec.validate()?;
            commands::fit(&cfg, out)
        }
        Command::Sweep { manifest } => {
            let mut cfg = match config_or::<SweepConfig>(cfg_path)? {
                Some(mut c) => {
                    c.manifest = resolve(cfg_path, &c.manifest);
                    c
                }
                None => {
                    let Some(m) = manifest else {
                        bail!(tlsjump::Error::InvalidArgument("sweep needs --manifest or --config".into()));
                    };
                    serde_json::from_value(serde_json::json!({ "manifest": m }))?
                }
            };
            if let Some(m) = manifest {
                cfg.manifest = resolve(None, m);
            }
            if let Some(f) = cli.format {
                cfg.format = f;
            }
            commands::sweep(&cfg, out)
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    e.chain()
        .find_map(|c| c.downcast_ref::<tlsjump::Error>())
        .map_or("error", tlsjump::Error::kind)
}

/// The error chain joined by ": ", skipping causes already quoted by their parent.
fn message(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.error_json {
                let msg = serde_json::json!({ "error": error_kind(&e), "message": message(&e) });
                eprintln!("{msg}");
            } else {
                eprintln!("error: {}", message(&e));
            }
            ExitCode::FAILURE
        }
    }
}
