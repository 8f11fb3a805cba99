use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use disent_cli::error::CliError;
use disent_cli::{check, parse_config, render_report, resolve_out, RunOptions, OUT_ENV};

#[derive(Parser)]
#[command(
    name = "disent",
    version,
    about = "Evaluate representations against ground-truth factors of variation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Sample and encode the observational data of every model
    Generate(Common),
    /// Score every model
    Evaluate(Common),
    /// Run the configured analyses over existing scores
    Analyze(Common),
    /// Render figures from an output directory
    Report {
        #[arg(long, env = OUT_ENV)]
        out: PathBuf,
    },
    /// evaluate, analyze and report
    Run(Common),
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (verb, common) = match cli.command {
        Command::Report { out } => {
            let summary = render_report(&out)?;
            eprintln!(
                "{} figures written to {}",
                summary.figures.len(),
                out.join("figures").display()
            );
            for m in &summary.missing {
                eprintln!("missing: {m}");
            }
            return Ok(());
        }
        Command::Generate(c) => ("generate", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Analyze(c) => ("analyze", c),
        Command::Run(c) => ("run", c),
    };
    let cfg = parse_config(&common.config)?;
    let opts = RunOptions {
        out: resolve_out(common.out, &cfg),
        jobs: common.jobs,
        seed: common.seed,
    };
    let manifest = match verb {
        "generate" => disent_cli::generate(&cfg, &opts)?,
        "evaluate" => disent_cli::evaluate(&cfg, &opts)?,
        "analyze" => disent_cli::analyze(&cfg, &opts)?,
        _ => disent_cli::run(&cfg, &opts)?,
    };
    eprintln!(
        "{verb}: {} tasks, {} failed; output in {}",
        manifest.tasks.len(),
        manifest.failures,
        opts.out.display()
    );
    check(&manifest)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
