use std::path::PathBuf;

use anyhow::Result;
use audinv::experiment::{cmd_evaluate, cmd_invert, cmd_report, cmd_train, ExperimentConfig, TrainTarget};
use audinv_core::inversion::Method;
use audinv_core::profile::Scale;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "audinv", version, about = "Recover latent vectors of an audio GAN and compare inversion methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory holding checkpoints, results and figures.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spoken-digit dataset root (`<root>/<digit>/*.wav`); synthetic digits otherwise.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Toy,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Gan,
    Classifier,
    Inverter,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gradient,
    Mapper,
    Hybrid,
}

#[derive(Subcommand)]
enum Command {
    /// Train one component and write its checkpoint.
    Train {
        #[arg(value_enum)]
        target: TargetArg,
        #[command(flatten)]
        common: Common,
    },
    /// Run every inversion method on fake and real targets; write tables, sidecars and figures.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Summarize the evaluation runs under a directory.
    Report { dir: PathBuf },
    /// Invert a single WAV file.
    Invert {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "hybrid")]
        method: MethodArg,
        /// Output path stem; `.wav` and `.json` are written.
        #[arg(long, default_value = "reconstruction")]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(c: Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = c.profile {
        cfg = cfg.with_scale(match p {
            ProfileArg::Toy => Scale::Toy,
            ProfileArg::Full => Scale::Full,
        });
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(o) = c.out {
        cfg.out = o;
    }
    if c.data_dir.is_some() {
        cfg.data_dir = c.data_dir;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train { target, common } => {
            let target = match target {
                TargetArg::Gan => TrainTarget::Gan,
                TargetArg::Classifier => TrainTarget::Classifier,
                TargetArg::Inverter => TrainTarget::Inverter,
            };
            let dir = cmd_train(&resolve(common)?, target)?;
            println!("checkpoint written to {}", dir.display());
        }
        Command::Evaluate { common } => {
            let cfg = resolve(common)?;
            let summary = cmd_evaluate(&cfg)?;
            println!("results written to {}", cfg.results_dir().display());
            for f in &summary.flags {
                println!("flag: {f}");
            }
        }
        Command::Report { dir } => print!("{}", cmd_report(&dir)?),
        Command::Invert { input, method, output, common } => {
            let method = match method {
                MethodArg::Gradient => Method::Gradient,
                MethodArg::Mapper => Method::Mapper,
                MethodArg::Hybrid => Method::Hybrid,
            };
            let record = cmd_invert(&resolve(common)?, &input, method, &output)?;
            println!(
                "{} inversion: spectrogram MAE {:.6}, {} steps, {:.2}s",
                method.as_str(),
                record.spectrogram_mae,
                record.steps_used,
                record.wall_time
            );
        }
    }
    Ok(())
}
