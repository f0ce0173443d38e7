use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfold_core::harness::{cmd_fold, cmd_saw, cmd_tune_penalty, report, ExperimentConfig, RunArchive};
use qfold_core::Error;

/// QAOA folding experiments on lattice walks and peptides.
#[derive(Parser)]
#[command(name = "qfold", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Self-avoiding walk success probabilities and size sweep.
    Saw(RunArgs),
    /// Peptide energy curves, histograms and conformations.
    Fold(RunArgs),
    /// Sweep the penalty weight and recommend one.
    TunePenalty(RunArgs),
    /// Summarize an existing archive.
    Report {
        /// Archive directory.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    memory_cap_bytes: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
        }
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            config.output_dir = dir.clone();
        }
        if let Some(cap) = self.memory_cap_bytes {
            config.memory_cap_bytes = cap;
        }
        Ok(config)
    }
}

fn finished(archive: &RunArchive) {
    for note in &archive.notes {
        eprintln!("note: {note}");
    }
    println!("wrote {} files to {}", archive.files.len(), archive.root.display());
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Saw(args) => finished(&cmd_saw(&args.load()?)?),
        Command::Fold(args) => finished(&cmd_fold(&args.load()?)?),
        Command::TunePenalty(args) => {
            let (archive, tuned) = cmd_tune_penalty(&args.load()?)?;
            finished(&archive);
            println!("recommended lambda {}", tuned.chosen);
        }
        Command::Report { dir } => print!("{}", report(dir)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Parse { .. } => 2,
                Error::MemoryCap { .. } => 3,
                _ => 1,
            })
        }
    }
}
