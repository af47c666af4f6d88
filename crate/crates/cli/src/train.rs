use crate::input::{emit, read_config, write_text, DataArgs, Precision};
use anyhow::{anyhow, Result};
use attrsparse::data::SplitKind;
use attrsparse::model::Model;
use attrsparse::optim::OptimizerKind;
use attrsparse::training::{evaluate, train, train_one_vs_all, Architecture, Regime, TrainConfig, TrainTrace};
use attrsparse::{LossSpec, Scalar};
use clap::Args;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

/// Hyperparameter flags shared by `train` and `compare`. Each one, when
/// given, overrides the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct HyperArgs {
    /// logistic, hinge or softplus-hinge.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Fit an unpenalized bias term.
    #[arg(long)]
    pub bias: Option<bool>,
    /// Hidden layer widths, e.g. `32` or `64,32`; `0` selects a linear model.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// PGD steps for MLP adversarial training.
    #[arg(long)]
    pub pgd_steps: Option<usize>,
}

impl HyperArgs {
    pub fn apply(&self, cfg: &mut TrainConfig, loss: &mut LossSpec) -> Result<()> {
        if let Some(l) = &self.loss {
            *loss = l.parse()?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(o) = &self.optimizer {
            cfg.optimizer = o.parse::<OptimizerKind>()?;
        }
        if let Some(v) = self.bias {
            cfg.bias = v;
        }
        if let Some(h) = &self.hidden {
            cfg.architecture = if h.is_empty() || h == &[0] {
                Architecture::Linear
            } else {
                let activation = match &cfg.architecture {
                    Architecture::Mlp { activation, .. } => *activation,
                    Architecture::Linear => Default::default(),
                };
                Architecture::Mlp {
                    hidden: h.clone(),
                    activation,
                }
            };
        }
        if let Some(s) = self.pgd_steps {
            cfg.pgd.steps = Some(s);
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// TOML or JSON training config; an optional `loss` key sits next to
    /// the training fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// natural, adversarial, l1 or stable-ig.
    #[arg(long)]
    regime: Option<String>,
    /// ℓ∞ budget for the adversarial and stable-ig regimes.
    #[arg(long)]
    eps: Option<f64>,
    /// ℓ1 penalty for the l1 regime.
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run summary JSON (stdout when omitted).
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// Config file, then flags, over the defaults.
fn resolve(args: &TrainArgs) -> Result<(TrainConfig, LossSpec)> {
    let (mut cfg, mut loss) = match &args.config {
        Some(path) => {
            let mut value = read_config(path)?;
            let loss = match value.as_object_mut().and_then(|m| m.remove("loss")) {
                Some(l) => serde_json::from_value(l)?,
                None => LossSpec::Logistic,
            };
            let cfg: TrainConfig = serde_json::from_value(value)
                .map_err(|e| anyhow!("{}: {e}", path.display()))?;
            (cfg, loss)
        }
        None => (TrainConfig::default(), LossSpec::Logistic),
    };
    args.hyper.apply(&mut cfg, &mut loss)?;

    let prev_eps = matches!(cfg.regime, Regime::Adversarial { .. } | Regime::StableIg { .. }).then(|| cfg.regime.epsilon());
    let prev_lambda = matches!(cfg.regime, Regime::L1 { .. }).then(|| cfg.regime.lambda());
    if let Some(name) = &args.regime {
        cfg.regime = Regime::parse(name, args.eps.or(prev_eps), args.lambda.or(prev_lambda))?;
    } else {
        if let Some(eps) = args.eps {
            cfg.regime = match cfg.regime {
                Regime::Adversarial { .. } => Regime::Adversarial { epsilon: eps },
                Regime::StableIg { .. } => Regime::StableIg { epsilon: eps },
                _ => return Err(anyhow!("--eps needs the adversarial or stable-ig regime")),
            };
        }
        if let Some(lambda) = args.lambda {
            cfg.regime = match cfg.regime {
                Regime::L1 { .. } => Regime::L1 { lambda },
                _ => return Err(anyhow!("--lambda needs the l1 regime")),
            };
        }
    }
    cfg.validate()?;
    Ok((cfg, loss))
}

fn traces_csv(traces: &[TrainTrace]) -> String {
    if let [one] = traces {
        return one.to_csv_string();
    }
    let mut out = String::new();
    for (head, t) in traces.iter().enumerate() {
        for (k, line) in t.to_csv_string().lines().enumerate() {
            match (k, head) {
                (0, 0) => out.push_str(&format!("head,{line}\n")),
                (0, _) => {}
                _ => out.push_str(&format!("{head},{line}\n")),
            }
        }
    }
    out
}

fn run_typed<T: Scalar>(args: &TrainArgs, cfg: &TrainConfig, loss: LossSpec) -> Result<()> {
    let ds = args.data.load::<T>()?;
    let (model, traces): (Model<T>, Vec<TrainTrace>) = if ds.is_binary() {
        let (m, t) = train(&ds, loss, cfg)?;
        (m, vec![t])
    } else {
        let (m, t) = train_one_vs_all(&ds, loss, cfg)?;
        (m.into(), t)
    };
    model.save_json(&args.out)?;
    if let Some(path) = &args.trace {
        write_text(path, &traces_csv(&traces))?;
    }
    let eval = evaluate(&model, &ds, SplitKind::Test, loss)?;
    let summary = json!({
        "dataset": args.data.name(),
        "scalar": T::NAME,
        "split_seed": ds.split_seed(),
        "n_train": ds.indices(SplitKind::Train).len(),
        "n_test": ds.indices(SplitKind::Test).len(),
        "loss": loss,
        "config": cfg,
        "model": model.kind_name(),
        "test": eval,
        "steps": traces.iter().map(|t| t.steps).sum::<usize>(),
    });
    emit(args.summary.as_deref(), &serde_json::to_string_pretty(&summary)?)
}

pub fn run(args: TrainArgs) -> Result<ExitCode> {
    let (cfg, loss) = resolve(&args)?;
    match args.precision {
        Precision::F64 => run_typed::<f64>(&args, &cfg, loss)?,
        Precision::F32 => run_typed::<f32>(&args, &cfg, loss)?,
    }
    Ok(ExitCode::SUCCESS)
}
