//! Command-line runner for recalibration experiments.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use online_recal::error::{Error, Result};
use online_recal::forecasters::StepRule;
use online_recal::harness::{
    emit_report, generate_stream, replay, DataSource, Experiment, ExperimentConfig, GeneratorKind, Mode, Report,
};
use online_recal::recalibrator::UpdateMode;
use online_recal::transcript::write_transcript;

#[derive(Parser)]
#[command(name = "recal", version, about = "Online recalibration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report.
    Run(RunArgs),
    /// Write a generated round stream to a file.
    Gen(GenArgs),
    /// Resume a checkpoint and run it to completion.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "covariate")]
    mode: Mode,
    /// Nature generator, e.g. `miscalibrated-link`, `iid-bernoulli:0.3`, `expert-panel:4`.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    generator: Option<GeneratorKind>,
    /// Round stream file (line-delimited JSON).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Number of rounds; defaults to the whole input file.
    #[arg(long = "T")]
    horizon: Option<u64>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "expected")]
    update_mode: UpdateMode,
    /// Logistic forecaster learning rate.
    #[arg(long, default_value_t = 0.0005)]
    eta: f64,
    /// Use per-coordinate adaptive learning rates.
    #[arg(long)]
    adaptive: bool,
    #[arg(long, default_value_t = 1e-8)]
    delta: f64,
    /// Report path; a `.reliability.csv` companion is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a checkpoint after this many rounds.
    #[arg(long, requires = "checkpoint_out")]
    checkpoint_at: Option<u64>,
    #[arg(long, requires = "checkpoint_at")]
    checkpoint_out: Option<PathBuf>,
    /// Write the per-round transcript (line-delimited JSON).
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "covariate")]
    mode: Mode,
    #[arg(long)]
    generator: GeneratorKind,
    #[arg(long = "T")]
    horizon: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(report: &Report, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => emit_report(report, path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, report)?;
            writeln!(lock)?;
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let source = match (args.generator, args.input) {
        (Some(g), None) => DataSource::Generator(g),
        (None, Some(p)) => DataSource::File(p),
        _ => return Err(Error::Config("give exactly one of --generator or --input".into())),
    };
    let config = ExperimentConfig {
        mode: args.mode,
        source,
        n: args.n,
        horizon: args.horizon,
        seed: args.seed,
        forecaster: if args.adaptive {
            StepRule::Adaptive {
                eta: args.eta,
                delta: args.delta,
            }
        } else {
            StepRule::Fixed { eta: args.eta }
        },
        update_mode: args.update_mode,
        report_path: args.out.clone(),
    };

    let started = Instant::now();
    let mut exp = Experiment::new(config)?;
    if args.transcript.is_some() {
        exp.record_transcript();
    }
    if let (Some(at), Some(path)) = (args.checkpoint_at, &args.checkpoint_out) {
        exp.advance(Some(at))?;
        std::fs::write(path, exp.checkpoint()?)?;
    }
    exp.advance(None)?;
    let report = exp.report(started.elapsed().as_secs_f64())?;
    if let (Some(path), Some(log)) = (&args.transcript, exp.transcript()) {
        write_transcript(BufWriter::new(File::create(path)?), log)?;
    }
    output(&report, args.out.as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Gen(args) => File::create(&args.out)
            .map_err(Error::from)
            .and_then(|f| generate_stream(args.generator, args.mode, args.seed, args.horizon, BufWriter::new(f))),
        Command::Replay(args) => replay(&args.checkpoint).and_then(|r| output(&r, args.out.as_ref())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
