//! Command-line front end for `ngram-lr`.

pub mod commands;
pub mod config;
pub mod svg;

use std::io::Write;

use anyhow::Result;
use clap::{Parser, Subcommand};
use ngram_lr::error::{Error, EstimatorError};

use crate::config::{RunArgs, RunConfig, UsageError};

#[derive(Debug, Parser)]
#[command(
    name = "ngram-lr",
    version,
    about = "Rank N-gram entity contexts by likelihood ratio"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count a training corpus into a cached model
    Count(RunArgs),
    /// Rank test N-grams and write the report bundle
    Rank(RunArgs),
    /// Grid-search regularization on the validation split
    Tune(RunArgs),
    /// Pick KN discounts by training likelihood
    TuneKn(RunArgs),
    /// Write a seeded synthetic train/valid/test corpus
    Generate(RunArgs),
    /// Write the regularization sweeps over the built-in examples
    ReproduceFigures(RunArgs),
}

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ESTIMATOR: i32 = 3;

/// Exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if is_broken_pipe(cause) {
            return 0;
        }
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<EstimatorError>()
            || matches!(cause.downcast_ref::<Error>(), Some(Error::Estimator(_)))
        {
            return EXIT_ESTIMATOR;
        }
    }
    EXIT_DATA
}

/// Output cut short by a closed reader (`| head`) is not a failure.
pub fn is_broken_pipe(cause: &(dyn std::error::Error + 'static)) -> bool {
    cause
        .downcast_ref::<std::io::Error>()
        .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Count(args) => {
            let s = commands::cmd_count(&RunConfig::resolve(&args)?)?;
            writeln!(
                stdout,
                "wrote {} (n_de = {}, n_nu = {})",
                s.path.display(),
                s.n_de,
                s.n_nu
            )?;
        }
        Command::Rank(args) => {
            let s = commands::cmd_rank(&RunConfig::resolve(&args)?)?;
            writeln!(
                stdout,
                "{}: {} candidates, {} relevant, auc {:.4}, recall {:.4}; wrote {}",
                s.estimator.kind,
                s.candidates,
                s.relevant,
                s.auc,
                s.final_recall,
                s.dir.display()
            )?;
        }
        Command::Tune(args) => {
            let config = RunConfig::resolve(&args)?;
            let o = commands::cmd_tune(&config)?;
            write!(stdout, "{}", commands::estimator_conf(&o.best))?;
            writeln!(
                stdout,
                "# validation auc = {:.4}; wrote {}",
                o.best_auc,
                config.out.display()
            )?;
        }
        Command::TuneKn(args) => {
            let config = RunConfig::resolve(&args)?;
            let o = commands::cmd_tune_kn(&config)?;
            let tuned = ngram_lr::EstimatorConfig::kn(o.discounts);
            write!(stdout, "{}", commands::estimator_conf(&tuned))?;
            writeln!(stdout, "# wrote {}", config.out.display())?;
        }
        Command::Generate(args) => {
            for p in commands::cmd_generate(&RunConfig::resolve(&args)?)? {
                writeln!(stdout, "wrote {}", p.display())?;
            }
        }
        Command::ReproduceFigures(args) => {
            for p in commands::cmd_reproduce_figures(&RunConfig::resolve(&args)?)? {
                writeln!(stdout, "wrote {}", p.display())?;
            }
        }
    }
    Ok(())
}
