use crate::input::parse_reals;
use anyhow::Result;
use attrsparse::data::{generate_blobs, generate_synthetic, BlobSpec, SplitKind, SyntheticSpec};
use attrsparse::DatasetF64;
use clap::{Args, Subcommand};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(subcommand)]
    kind: SynthKind,
}

#[derive(Subcommand, Debug)]
enum SynthKind {
    /// Features with `E(x_i | y) = a_i y` and independent Gaussian noise.
    Features {
        /// Per-feature strengths `a_i`.
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        /// Per-feature noise standard deviations (default 1 for all).
        #[arg(long)]
        noise_sd: Option<String>,
        /// Probability of the positive class.
        #[arg(long, default_value_t = 0.5)]
        balance: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Small grayscale images with one Gaussian blob whose vertical
    /// position depends on the class.
    Blobs {
        #[arg(long, default_value_t = 8)]
        height: usize,
        #[arg(long, default_value_t = 8)]
        width: usize,
        #[arg(long, default_value_t = 0.7)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.1)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0.5)]
        balance: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Number of examples.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset JSON output, readable by the other subcommands via `--data`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: SynthArgs) -> Result<ExitCode> {
    let (ds, common): (DatasetF64, &Common) = match &args.kind {
        SynthKind::Features {
            a,
            noise_sd,
            balance,
            common,
        } => {
            let a = parse_reals(a)?;
            let sd = match noise_sd {
                Some(s) => parse_reals(s)?,
                None => vec![1.0; a.len()],
            };
            let spec = SyntheticSpec::new(a, sd, *balance, common.seed)?;
            (generate_synthetic(&spec, common.n)?, common)
        }
        SynthKind::Blobs {
            height,
            width,
            sigma,
            amplitude,
            noise_sd,
            balance,
            common,
        } => {
            let spec = BlobSpec {
                height: *height,
                width: *width,
                sigma: *sigma,
                amplitude: *amplitude,
                noise_sd: *noise_sd,
                class_balance: *balance,
                seed: common.seed,
            };
            (generate_blobs(&spec, common.n)?, common)
        }
    };
    ds.save_json(&common.out)?;
    let positives = ds.labels().iter().filter(|&&y| y == 1).count();
    let summary = json!({
        "examples": ds.n_examples(),
        "dim": ds.dim(),
        "positives": positives,
        "n_train": ds.indices(SplitKind::Train).len(),
        "n_test": ds.indices(SplitKind::Test).len(),
        "image_shape": ds.image_shape(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}
