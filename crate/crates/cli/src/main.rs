use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use intermittency::MapModel;
use intermittency_cli::runner::build_measure;
use intermittency_cli::{report, run, Experiment, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "intermittency", version, about = "Concentration experiments for intermittent interval maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config without running anything.
    Validate(ConfigArg),
    /// Build (or load) the cached invariant measure for a config.
    BuildMeasure(ConfigArg),
    /// Run the selected experiments.
    Run(RunArgs),
    /// Verify checksums in an output directory and print the verdicts.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated subset of experiments, overriding the config.
    #[arg(long, value_delimiter = ',')]
    experiments: Option<Vec<Experiment>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Validate(a) => {
            let config = RunConfig::load(&a.config)?;
            for w in config.validate()? {
                println!("warning: {w}");
            }
            println!("{}: ok", a.config.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::BuildMeasure(a) => {
            let config = RunConfig::load(&a.config)?;
            let model = MapModel::new(config.alpha)?;
            let (measure, op, how) = build_measure(&model, &config)?;
            println!(
                "{how}: alpha = {} cells = {} scheme = {} residual = {:.3e}",
                measure.alpha(),
                measure.cells(),
                measure.scheme(),
                op.residual()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(a) => {
            let config = RunConfig::load(&a.config)?;
            let opts = RunOptions {
                seed: a.seed,
                out: a.out,
                threads: a.threads,
                experiments: a.experiments,
            };
            let (resolved, _) = opts.resolve(&config)?;
            let summary = run(&config, &opts)?;
            let out = resolved.out_dir.unwrap_or_else(|| PathBuf::from("results"));
            print!("{}", report(&out)?);
            Ok(if summary.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Report { out } => {
            print!("{}", report(&out)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
