use crate::input::{emit, parse_reals, DataArgs};
use anyhow::{anyhow, Context, Result};
use attrsparse::attribution::{attribute_split, impact_report, write_attributions_csv, write_impact_csv, write_pgm, Method};
use attrsparse::data::SplitKind;
use attrsparse::model::Model;
use attrsparse::sparseness::gini_of_attribution;
use attrsparse::Scalar;
use clap::{Args, ValueEnum};
use ndarray::Array1;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

use crate::compare::MethodArg;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Args, Debug)]
pub struct AttributeArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Closed)]
    method: MethodArg,
    /// Riemann steps for `--method numeric`.
    #[arg(long, default_value_t = Method::REPORT_STEPS)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Baseline as comma-separated values (all zeros when omitted).
    #[arg(long)]
    baseline: Option<String>,
    /// Long-format attributions CSV: example_id,feature,value.
    #[arg(long)]
    out: PathBuf,
    /// Mean |attribution| per encoded feature.
    #[arg(long, requires = "fi")]
    fv: Option<PathBuf>,
    /// Mean |attribution| per original column.
    #[arg(long, requires = "fv")]
    fi: Option<PathBuf>,
    /// Directory for one PGM heat map per example (image datasets only).
    #[arg(long)]
    pgm_dir: Option<PathBuf>,
    /// Summary JSON (stdout when omitted).
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn run_typed<T: Scalar>(args: &AttributeArgs, model_text: &str) -> Result<()> {
    let model = Model::<T>::from_json_str(model_text).with_context(|| format!("loading {}", args.model.display()))?;
    let ds = args.data.load::<T>()?;
    let baseline: Array1<T> = match &args.baseline {
        Some(s) => parse_reals(s)?.into_iter().map(T::lit).collect(),
        None => Array1::zeros(ds.dim()),
    };
    let method = match args.method {
        MethodArg::Closed => Method::Closed,
        MethodArg::Numeric => Method::Numeric { steps: args.steps },
    };
    let split = match args.split {
        SplitArg::Train => SplitKind::Train,
        SplitArg::Test => SplitKind::Test,
    };
    let attribs = attribute_split(&model, &ds, split, baseline.view(), method)?;
    write_attributions_csv(&args.out, &attribs, ds.feature_names())?;
    if let (Some(fv), Some(fi)) = (&args.fv, &args.fi) {
        write_impact_csv(fv, fi, &impact_report(&attribs, &ds)?)?;
    }
    if let Some(dir) = &args.pgm_dir {
        let shape = ds
            .image_shape()
            .ok_or_else(|| anyhow!("--pgm-dir needs an image-shaped dataset"))?;
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (k, a) in attribs.iter().enumerate() {
            let id = a.example.unwrap_or(k);
            write_pgm(&dir.join(format!("example_{id:05}.pgm")), a.values.view(), shape)?;
        }
    }
    let mut total = 0.0;
    let mut degenerate = 0usize;
    for a in &attribs {
        let g = gini_of_attribution(a)?;
        total += g.value.to_f64_lossy();
        degenerate += usize::from(g.degenerate);
    }
    let summary = json!({
        "model": model.kind_name(),
        "scalar": T::NAME,
        "method": method,
        "examples": attribs.len(),
        "features": ds.dim(),
        "mean_gini": total / attribs.len().max(1) as f64,
        "degenerate": degenerate,
    });
    emit(args.summary.as_deref(), &serde_json::to_string_pretty(&summary)?)
}

pub fn run(args: AttributeArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let header: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.model.display()))?;
    match header.get("scalar").and_then(|s| s.as_str()) {
        Some("f32") => run_typed::<f32>(&args, &text)?,
        Some("f64") => run_typed::<f64>(&args, &text)?,
        other => return Err(anyhow!("{}: unknown scalar {other:?}", args.model.display())),
    }
    Ok(ExitCode::SUCCESS)
}
