//! End-to-end pipelines: train natural, adversarial and ℓ1 models on one
//! split, attribute the test set and compare attribution sparseness.

use crate::attribution::{attribute_dataset, Method};
use crate::data::{generate_blobs, BlobSpec, Dataset, SplitKind};
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::model::Model;
use crate::scalar::Scalar;
use crate::sparseness::{compare_regimes, GiniReport, SparsenessComparison};
use crate::training::{evaluate, train, Architecture, Regime, TrainConfig};
use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Shared hyperparameters; the regime field is ignored.
    pub train: TrainConfig,
    pub loss: LossSpec,
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub method: Method,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            train: TrainConfig::default(),
            loss: LossSpec::Logistic,
            epsilons: vec![0.1],
            lambdas: vec![0.02],
            method: Method::Closed,
        }
    }
}

impl CompareConfig {
    pub fn regimes(&self) -> Vec<Regime> {
        std::iter::once(Regime::Natural)
            .chain(self.epsilons.iter().map(|&epsilon| Regime::Adversarial { epsilon }))
            .chain(self.lambdas.iter().map(|&lambda| Regime::L1 { lambda }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeResult {
    pub regime: Regime,
    pub tag: String,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub mean_gini: f64,
    pub degenerate_attributions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub toolkit_version: String,
    pub scalar: String,
    pub seed: u64,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub config: CompareConfig,
    pub results: Vec<RegimeResult>,
    pub comparison: SparsenessComparison,
    /// Wall-clock seconds; left empty unless the caller records it, so
    /// reports stay byte-identical across reruns.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_secs: Option<f64>,
}

impl ExperimentReport {
    pub fn table_csv(&self) -> String {
        self.comparison.to_table_csv(&self.dataset, "IG")
    }

    pub fn distribution_csv(&self) -> String {
        self.comparison.to_distribution_csv()
    }

    /// Accuracy against mean Gini for every trained regime.
    pub fn tradeoff_csv(&self) -> String {
        let mut out = String::from("model,kind,param,accuracy,mean_gini\n");
        for r in &self.results {
            let (kind, param) = match r.regime {
                Regime::Natural => ("n", 0.0),
                Regime::Adversarial { epsilon } => ("a", epsilon),
                Regime::L1 { lambda } => ("l", lambda),
                Regime::StableIg { epsilon } => ("s", epsilon),
            };
            let _ = writeln!(out, "{},{kind},{param},{},{}", r.tag, r.test_accuracy, r.mean_gini);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Trains every regime of `cfg` on the same split (in parallel, each run
/// deterministic), attributes the natural test split from a zero baseline
/// and compares mean Gini values.
pub fn compare<T: Scalar>(dataset: &str, ds: &Dataset<T>, cfg: &CompareConfig) -> Result<(ExperimentReport, Vec<Model<T>>)> {
    cfg.train.validate()?;
    if ds.indices(SplitKind::Test).is_empty() {
        return Err(Error::Empty("test split"));
    }
    let regimes = cfg.regimes();
    let baseline = Array1::<T>::zeros(ds.dim());
    let runs: Vec<(Model<T>, RegimeResult, GiniReport)> = regimes
        .par_iter()
        .map(|&regime| {
            let tc = cfg.train.clone().with_regime(regime);
            let (model, _) = train(ds, cfg.loss, &tc)?;
            let eval = evaluate(&model, ds, SplitKind::Test, cfg.loss)?;
            let method = match (&model, cfg.method) {
                (Model::Mlp(_), Method::Closed) => Method::Numeric {
                    steps: Method::REPORT_STEPS,
                },
                (_, m) => m,
            };
            let attribs = attribute_dataset(&model, ds, baseline.view(), method)?;
            let report = GiniReport::new(regime.tag(), &attribs, ds.split())?.with_accuracy(eval.accuracy);
            let result = RegimeResult {
                regime,
                tag: regime.tag(),
                test_accuracy: eval.accuracy,
                test_loss: eval.mean_loss,
                mean_gini: report.mean,
                degenerate_attributions: report.degenerate,
            };
            Ok((model, result, report))
        })
        .collect::<Result<_>>()?;

    let n_eps = cfg.epsilons.len();
    let reports: Vec<&GiniReport> = runs.iter().map(|r| &r.2).collect();
    let adv: Vec<GiniReport> = reports[1..1 + n_eps].iter().map(|r| (*r).clone()).collect();
    let l1: Vec<GiniReport> = reports[1 + n_eps..].iter().map(|r| (*r).clone()).collect();
    let comparison = compare_regimes(reports[0], &adv, &l1)?;

    let mut models = Vec::with_capacity(runs.len());
    let mut results = Vec::with_capacity(runs.len());
    for (m, r, _) in runs {
        models.push(m);
        results.push(r);
    }
    let report = ExperimentReport {
        dataset: dataset.to_string(),
        toolkit_version: TOOLKIT_VERSION.to_string(),
        scalar: T::NAME.to_string(),
        seed: cfg.train.seed,
        split_seed: ds.split_seed(),
        n_train: ds.indices(SplitKind::Train).len(),
        n_test: ds.indices(SplitKind::Test).len(),
        config: cfg.clone(),
        results,
        comparison,
        runtime_secs: None,
    };
    Ok((report, models))
}

/// Blob-image study: a one-hidden-layer MLP trained naturally, with PGD
/// adversarial training and over an ℓ1 grid, repeated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageStudyConfig {
    pub n_examples: usize,
    pub data_seed: u64,
    pub hidden: usize,
    pub epochs: usize,
    pub epsilon: f64,
    pub pgd_steps: Option<usize>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub ig_steps: usize,
    /// An ℓ1 model is eligible if its mean accuracy is within this of the
    /// natural model's.
    pub accuracy_slack: f64,
}

impl Default for ImageStudyConfig {
    fn default() -> Self {
        ImageStudyConfig {
            n_examples: 2500,
            data_seed: 0,
            hidden: 16,
            epochs: 20,
            epsilon: 0.1,
            pgd_steps: None,
            lambdas: vec![1e-4, 3e-4, 1e-3, 2e-3, 4e-3, 6e-3, 8e-3, 1e-2],
            seeds: (0..5).collect(),
            ig_steps: 64,
            accuracy_slack: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRegimeSummary {
    pub regime: Regime,
    /// Per-seed (accuracy, mean Gini).
    pub per_seed: Vec<(f64, f64)>,
    pub mean_accuracy: f64,
    pub mean_gini: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageStudyReport {
    pub config: ImageStudyConfig,
    pub natural: ImageRegimeSummary,
    pub adversarial: ImageRegimeSummary,
    pub l1: Vec<ImageRegimeSummary>,
    /// Best ℓ1 model within the accuracy slack, by mean Gini.
    pub best_l1: Option<usize>,
}

impl ImageStudyReport {
    pub fn adversarial_beats_natural(&self) -> bool {
        self.adversarial.mean_gini > self.natural.mean_gini
    }

    pub fn adversarial_beats_best_l1(&self) -> bool {
        self.best_l1
            .is_none_or(|i| self.adversarial.mean_gini > self.l1[i].mean_gini)
    }
}

pub fn image_study<T: Scalar>(cfg: &ImageStudyConfig) -> Result<ImageStudyReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("image study needs at least one seed".into()));
    }
    let ds: Dataset<T> = generate_blobs(
        &BlobSpec {
            seed: cfg.data_seed,
            ..BlobSpec::default()
        },
        cfg.n_examples,
    )?;
    let baseline = Array1::<T>::zeros(ds.dim());
    let base = TrainConfig {
        epochs: cfg.epochs,
        bias: true,
        architecture: Architecture::Mlp {
            hidden: vec![cfg.hidden],
            activation: Default::default(),
        },
        clamp01: true,
        pgd: crate::training::PgdSettings {
            steps: cfg.pgd_steps,
            ..Default::default()
        },
        ..TrainConfig::default()
    };
    let regimes: Vec<Regime> = [Regime::Natural, Regime::Adversarial { epsilon: cfg.epsilon }]
        .into_iter()
        .chain(cfg.lambdas.iter().map(|&lambda| Regime::L1 { lambda }))
        .collect();
    let jobs: Vec<(Regime, u64)> = regimes
        .iter()
        .flat_map(|&r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let outcomes: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(regime, seed)| {
            let tc = TrainConfig {
                seed,
                ..base.clone()
            }
            .with_regime(regime);
            let (model, _) = train(&ds, LossSpec::Logistic, &tc)?;
            let acc = evaluate(&model, &ds, SplitKind::Test, LossSpec::Logistic)?.accuracy;
            let attribs = attribute_dataset(&model, &ds, baseline.view(), Method::Numeric { steps: cfg.ig_steps })?;
            let g = GiniReport::new(regime.tag(), &attribs, ds.split())?.mean;
            Ok((acc, g))
        })
        .collect::<Result<_>>()?;

    let k = cfg.seeds.len();
    let mut summaries: Vec<ImageRegimeSummary> = regimes
        .iter()
        .zip(outcomes.chunks(k))
        .map(|(&regime, runs)| ImageRegimeSummary {
            regime,
            per_seed: runs.to_vec(),
            mean_accuracy: runs.iter().map(|r| r.0).sum::<f64>() / k as f64,
            mean_gini: runs.iter().map(|r| r.1).sum::<f64>() / k as f64,
        })
        .collect();
    let l1 = summaries.split_off(2);
    let adversarial = summaries.pop().expect("two fixed regimes");
    let natural = summaries.pop().expect("two fixed regimes");
    let best_l1 = l1
        .iter()
        .enumerate()
        .filter(|(_, s)| s.mean_accuracy >= natural.mean_accuracy - cfg.accuracy_slack)
        .max_by(|a, b| a.1.mean_gini.total_cmp(&b.1.mean_gini))
        .map(|(i, _)| i);
    Ok(ImageStudyReport {
        config: cfg.clone(),
        natural,
        adversarial,
        l1,
        best_l1,
    })
}
