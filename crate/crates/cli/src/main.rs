//! simplexcode: locality-weighted sparse coding on the probability simplex.
//!
//! Subcommands: certify (exact Delaunay-recovery campaigns), train (unrolled
//! dictionary learning), cluster (spectral clustering of learned codes), gen
//! (synthetic dataset generation). Each run is fully determined by its
//! config file, flag overrides (flags win), and seed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simplexcode::Error;

use config::{load_config, parse_digits, CertifyConfig, ClusterCmdConfig, GenCmdConfig, TrainCmdConfig};

#[derive(Parser)]
#[command(name = "simplexcode", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainOverrides {
    /// Locality penalty weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Unrolled encoder depth.
    #[arg(long)]
    unroll: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Number of dictionary atoms.
    #[arg(long)]
    m: Option<usize>,
    /// Digits kept from an IDX source, comma-separated.
    #[arg(long)]
    digits: Option<String>,
    /// Images per digit from an IDX source.
    #[arg(long)]
    per_digit: Option<usize>,
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut TrainCmdConfig) -> Result<(), Error> {
        if let Some(v) = self.lambda {
            cfg.train.lambda = v;
        }
        if let Some(v) = self.unroll {
            cfg.train.unroll_depth = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.m {
            cfg.train.atoms = v;
        }
        if let Some(s) = &self.digits {
            cfg.dataset.digits = parse_digits(s)?;
        }
        if let Some(v) = self.per_digit {
            cfg.dataset.per_digit = v;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an exact-recovery certification campaign.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Landmarks per instance.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Train a dictionary with the unrolled encoder.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Train, then spectrally cluster the learned codes.
    Cluster {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Number of clusters.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate a synthetic dataset.
    Gen {
        #[command(flatten)]
        common: CommonArgs,
        /// Landmark count for the delaunay-model generator.
        #[arg(long)]
        m: Option<usize>,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::DegenerateSimplex
        | Error::NotGeneralPosition(_)
        | Error::NonUniqueTriangulation { .. }
        | Error::OutsideHull
        | Error::Infeasible
        | Error::GeneralPositionFailure { .. } => 3,
        Error::NonFiniteIterate { .. } | Error::NonFiniteLoss { .. } => 4,
        Error::DegenerateGraph { .. } => 5,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Certify { common, m } => {
            let mut cfg: CertifyConfig = load_config(common.config.as_deref())?;
            if let Some(v) = m {
                cfg.m = v;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let all_passed = commands::cmd_certify(&cfg, &common.out)?;
            Ok(if all_passed { 0 } else { 1 })
        }
        Command::Train { common, overrides } => {
            let mut cfg: TrainCmdConfig = load_config(common.config.as_deref())?;
            overrides.apply(&mut cfg)?;
            if let Some(s) = common.seed {
                cfg.dataset.seed = s;
                cfg.train.seed = s;
            }
            commands::cmd_train(&cfg, &common.out)?;
            Ok(0)
        }
        Command::Cluster {
            common,
            overrides,
            k,
        } => {
            let mut cfg: ClusterCmdConfig = load_config(common.config.as_deref())?;
            let mut tc = TrainCmdConfig {
                dataset: cfg.dataset,
                train: cfg.train,
            };
            overrides.apply(&mut tc)?;
            cfg.dataset = tc.dataset;
            cfg.train = tc.train;
            if let Some(v) = k {
                cfg.k = v;
            }
            if let Some(s) = common.seed {
                cfg.dataset.seed = s;
                cfg.train.seed = s;
                cfg.kmeans_seed = s;
            }
            commands::cmd_cluster(&cfg, &common.out)?;
            Ok(0)
        }
        Command::Gen { common, m } => {
            let mut cfg: GenCmdConfig = load_config(common.config.as_deref())?;
            if let Some(v) = m {
                cfg.dataset.landmarks = v;
            }
            if let Some(s) = common.seed {
                cfg.dataset.seed = s;
            }
            commands::cmd_gen(&cfg, &common.out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
