use crate::input::{emit, read_config, write_text, DataArgs, Precision};
use crate::train::HyperArgs;
use anyhow::{anyhow, Result};
use attrsparse::attribution::Method;
use attrsparse::experiment::{compare, CompareConfig, ExperimentReport};
use attrsparse::Scalar;
use clap::{Args, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    Closed,
    Numeric,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// TOML or JSON comparison config (`loss`, `epsilons`, `lambdas`,
    /// `method` and a `[train]` table).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Adversarial budgets, comma separated. A bare `--eps` trains no
    /// adversarial models.
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// ℓ1 penalties, comma separated. A bare `--lambda` trains no ℓ1 models.
    #[arg(long, num_args = 0.., value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Integrated Gradients evaluation.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Riemann steps for `--method numeric`.
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    /// Dataset name in the report; defaults to the file stem.
    #[arg(long)]
    name: Option<String>,
    /// Report JSON (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Summary table CSV: dataset,attr,model,dG,AcDrop.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Per-example Gini differences against the natural model.
    #[arg(long)]
    distribution: Option<PathBuf>,
    /// Accuracy against mean Gini for every trained model.
    #[arg(long)]
    tradeoff: Option<PathBuf>,
    /// Record wall-clock time in the report (makes it non-reproducible).
    #[arg(long)]
    record_runtime: bool,
}

fn resolve(args: &CompareArgs) -> Result<CompareConfig> {
    let mut cfg: CompareConfig = match &args.config {
        Some(path) => serde_json::from_value(read_config(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))?,
        None => CompareConfig::default(),
    };
    args.hyper.apply(&mut cfg.train, &mut cfg.loss)?;
    if let Some(e) = &args.eps {
        cfg.epsilons = e.clone();
    }
    if let Some(l) = &args.lambda {
        cfg.lambdas = l.clone();
    }
    let steps = args.steps.or(match cfg.method {
        Method::Numeric { steps } => Some(steps),
        Method::Closed => None,
    });
    match args.method {
        Some(MethodArg::Closed) => cfg.method = Method::Closed,
        Some(MethodArg::Numeric) => {
            cfg.method = Method::Numeric {
                steps: steps.unwrap_or(Method::REPORT_STEPS),
            }
        }
        None => {
            if let (Some(s), Method::Numeric { .. }) = (args.steps, cfg.method) {
                cfg.method = Method::Numeric { steps: s };
            }
        }
    }
    cfg.train.validate()?;
    for r in cfg.regimes() {
        r.validate()?;
    }
    Ok(cfg)
}

fn run_typed<T: Scalar>(args: &CompareArgs, cfg: &CompareConfig) -> Result<ExperimentReport> {
    let ds = args.data.load::<T>()?;
    let name = args.name.clone().unwrap_or_else(|| args.data.name());
    let start = Instant::now();
    let (mut report, _) = compare(&name, &ds, cfg)?;
    if args.record_runtime {
        report.runtime_secs = Some(start.elapsed().as_secs_f64());
    }
    Ok(report)
}

pub fn run(args: CompareArgs) -> Result<ExitCode> {
    let cfg = resolve(&args)?;
    let report = match args.precision {
        Precision::F64 => run_typed::<f64>(&args, &cfg)?,
        Precision::F32 => run_typed::<f32>(&args, &cfg)?,
    };
    if let Some(p) = &args.table {
        write_text(p, &report.table_csv())?;
    }
    if let Some(p) = &args.distribution {
        write_text(p, &report.distribution_csv())?;
    }
    if let Some(p) = &args.tradeoff {
        write_text(p, &report.tradeoff_csv())?;
    }
    emit(args.report.as_deref(), &report.to_json()?)?;
    if args.report.is_some() {
        eprint!("{}", report.table_csv());
    }
    Ok(ExitCode::SUCCESS)
}
