//! Command-line orchestration of the RIS key-generation experiments.

pub mod config;
pub mod manifest;
pub mod pipeline;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Scale, SchemeKind};

#[derive(Debug, Parser)]
#[command(name = "ris-skg", version, about = "RIS secret key generation experiments")]
pub struct Cli {
    /// Configuration file overriding the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Preset the config file is applied to.
    #[arg(long, global = true, default_value = "desk", value_parser = ["desk", "paper"])]
    pub scale: String,
    /// Run seed; defaults to the first configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate and save a training dataset.
    GenData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Adversarially train Alice's and Bob's generators.
    Train {
        #[arg(long)]
        out: PathBuf,
        /// Dataset written by gen-data; generated from the seed when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train a worst-case eavesdropper against a feature scheme.
    TrainEve {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "nn")]
        scheme: String,
        /// Directory with alice.mlp, bob.mlp and mallory.mlp.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Correlations of the legacy features and their RIS reconstructions.
    AttackReport {
        #[arg(long)]
        out: PathBuf,
    },
    /// Mutual-information gap across a noise sweep.
    Skr {
        #[arg(long)]
        out: PathBuf,
        /// sigma2=<lo>:<hi>:<steps> in dBW; defaults to the configured sweep.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Polynomial refit and term distillation of trained generators.
    Distill {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Key agreement metrics from a feature CSV.
    Keys {
        #[arg(long)]
        out: PathBuf,
        /// CSV with scheme, sigma2_dbw, f_a, f_b and f_e columns.
        #[arg(long)]
        features: PathBuf,
    },
    /// Lambda sweep (and optional MSE-loss ablation) over the configured seeds.
    Sweep {
        #[arg(long)]
        out: PathBuf,
    },
    /// Full scenario for every configured seed and scheme.
    Run {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated schemes overriding the config.
        #[arg(long)]
        scheme: Option<String>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    pipeline::init_workers()?;
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), Scale::parse(&cli.scale)?)?;
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    let seed = cfg.seeds[0];
    match cli.command {
        Command::GenData { out } => {
            pipeline::gen_data(&cfg, seed, &out)?;
        }
        Command::Train { out, data } => {
            pipeline::train(&cfg, seed, data.as_deref(), &out)?;
        }
        Command::TrainEve { out, scheme, model } => {
            pipeline::train_eve_cmd(&cfg, seed, SchemeKind::parse(&scheme)?, model.as_deref(), &out)?;
        }
        Command::AttackReport { out } => {
            pipeline::attack_report(&cfg, seed, &out)?;
        }
        Command::Skr { out, sweep } => {
            let points = match sweep {
                Some(s) => pipeline::parse_sweep(&s)?,
                None => cfg.sweep.sigma2_points(),
            };
            pipeline::skr_sweep(&cfg, seed, &points, &out)?;
        }
        Command::Distill { out, model } => {
            pipeline::distill_cmd(&cfg, seed, &model, &out)?;
        }
        Command::Keys { out, features } => {
            pipeline::keys_cmd(&cfg, &features, &out)?;
        }
        Command::Sweep { out } => {
            pipeline::sweep_cmd(&cfg, &out)?;
        }
        Command::Run { out, scheme } => {
            if let Some(list) = scheme {
                cfg.schemes = list.split(',').map(|s| SchemeKind::parse(s.trim())).collect::<Result<_>>()?;
                if cfg.schemes.is_empty() {
                    bail!("--scheme needs at least one scheme");
                }
            }
            pipeline::run_scenario(&cfg, &out)?;
        }
    }
    Ok(())
}
