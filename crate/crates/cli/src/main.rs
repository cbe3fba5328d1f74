mod import;
mod wfdb;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ecgseg::dataset::{write_dataset, Lead};
use ecgseg::pipeline::{Pipeline, RunConfig, Stage};
use ecgseg::synth::{synth_dataset, SynthConfig};

#[derive(Parser)]
#[command(
    name = "ecgseg",
    version,
    about = "ECG wave delineation: training, evaluation and ensembles"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML run configuration; flags and environment variables override it.
    #[arg(long, global = true, env = "ECGSEG_CONFIG")]
    config: Option<PathBuf>,

    /// Imported dataset directory.
    #[arg(long, global = true, env = "ECGSEG_DATASET")]
    dataset: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "ECGSEG_OUTPUT")]
    output: Option<PathBuf>,

    #[arg(long, global = true, env = "ECGSEG_SEED")]
    seed: Option<u64>,

    /// Lead used for training and scoring (i, ii, iii, avr, avl, avf, v1..v6).
    #[arg(long, global = true, env = "ECGSEG_LEAD")]
    lead: Option<Lead>,

    #[arg(long, global = true, env = "ECGSEG_THREADS")]
    threads: Option<usize>,

    /// Reduce batch gradients in a fixed order.
    #[arg(long, global = true, env = "ECGSEG_DETERMINISTIC")]
    deterministic: bool,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Convert upstream WFDB files or converted records into a dataset directory.
    Import { src: PathBuf, dst: PathBuf },
    /// Write a synthetic annotated dataset (for trying the pipeline out).
    Synth {
        dst: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
    },
    /// Remove baseline wander and store the corrected records.
    Preprocess,
    /// Train the base network (continues an interrupted run).
    Train,
    /// Score the base network on both splits.
    Evaluate,
    /// Build and score the error-correcting ensemble.
    Ensemble,
    /// Distillation scattergram, split summary and generalization probe.
    Report,
    /// Every stage in order, reusing finished outputs.
    RunAll {
        /// Run only these stages.
        #[arg(long, value_delimiter = ',')]
        stage: Vec<Stage>,
    },
}

fn run_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(d) = &global.dataset {
        config.dataset_dir = d.clone();
    }
    if let Some(o) = &global.output {
        config.output_dir = o.clone();
    }
    if let Some(s) = global.seed {
        config.seed = s;
    }
    if let Some(l) = global.lead {
        config.lead = l;
    }
    if global.threads.is_some() {
        config.threads = global.threads;
    }
    config.deterministic |= global.deterministic;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let stages = match cli.command {
        Command::Import { src, dst } => {
            let seed = run_config(&cli.global)?.seed;
            let count = import::import(&src, &dst, seed)?;
            println!("{count} records written to {}", dst.display());
            return Ok(());
        }
        Command::Synth { dst, count } => {
            let seed = run_config(&cli.global)?.seed;
            let records = synth_dataset(count, seed, &SynthConfig::default());
            write_dataset(&dst, &records, seed)?;
            println!("{count} synthetic records written to {}", dst.display());
            return Ok(());
        }
        Command::Preprocess => vec![Stage::Preprocess, Stage::Split],
        Command::Train => vec![Stage::Split, Stage::Train],
        Command::Evaluate => vec![Stage::Evaluate],
        Command::Ensemble => vec![Stage::Ensemble],
        Command::Report => vec![Stage::Report],
        Command::RunAll { stage } if stage.is_empty() => Stage::ALL.to_vec(),
        Command::RunAll { stage } => stage,
    };
    let config = run_config(&cli.global)?;
    let out = config.output_dir.clone();
    let pipeline = Pipeline::open(config)?;
    pipeline.run(&stages)?;
    println!("done: {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ECGSEG_LOG", level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
