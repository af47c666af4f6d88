//! `attrsparse` command-line harness.
//!
//! Exit codes: 0 success, 1 configuration/data error, 2 training
//! divergence, 3 a verification check failed.

mod attribute;
mod compare;
mod gini;
mod input;
mod synth;
mod train;
mod verify;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "attrsparse", version, about = "Adversarial training and attribution sparseness toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write it as JSON, with a per-epoch trace.
    Train(train::TrainArgs),
    /// Train natural, adversarial and ℓ1 models on one split and compare
    /// the sparseness of their attributions.
    Compare(compare::CompareArgs),
    /// Integrated Gradients attributions of a saved model.
    Attribute(attribute::AttributeArgs),
    /// Gini index of attribution vectors or of a list of values.
    Gini(gini::GiniArgs),
    /// Run a Monte-Carlo or exact check: thm1-zero, thm1-bound, thm3, lemmaD1.
    Verify(verify::VerifyArgs),
    /// Generate a synthetic dataset.
    Synth(synth::SynthArgs),
}

pub(crate) const EXIT_CONFIG: u8 = 1;
pub(crate) const EXIT_DIVERGED: u8 = 2;
pub(crate) const EXIT_CHECK_FAILED: u8 = 3;

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("ATTRSPARSE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("ATTRSPARSE_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => train::run(a),
        Command::Compare(a) => compare::run(a),
        Command::Attribute(a) => attribute::run(a),
        Command::Gini(a) => gini::run(a),
        Command::Verify(a) => verify::run(a),
        Command::Synth(a) => synth::run(a),
    }
}

fn diverged(err: &anyhow::Error) -> bool {
    err.chain()
        .any(|e| matches!(e.downcast_ref::<attrsparse::Error>(), Some(attrsparse::Error::Diverged { .. })))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if diverged(&e) { EXIT_DIVERGED } else { EXIT_CONFIG })
        }
    }
}
