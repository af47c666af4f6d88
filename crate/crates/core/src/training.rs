//! Mini-batch training under the natural, adversarial, ℓ1 and stable-IG
//! regimes, plus evaluation and per-epoch traces.

use crate::adversarial::{adversarial_parts, pgd_with_rng, PerturbationBudget, PgdConfig};
use crate::data::{Dataset, LabelKind, SplitKind};
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::model::{mlp_loss_gradient, Activation, Dense, HiddenActivation, LinearModel, MlpModel, Model, OneVsAllModel, Scorer};
use crate::optim::{Optimizer, OptimizerKind, ParamGroup};
use crate::scalar::Scalar;
use crate::sparseness::gini_abs;
use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Losses above this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Regime {
    #[default]
    Natural,
    Adversarial { epsilon: f64 },
    L1 { lambda: f64 },
    StableIg { epsilon: f64 },
}

impl Regime {
    pub const NAMES: [&'static str; 4] = ["natural", "adversarial", "l1", "stable-ig"];

    /// Builds a regime from its name and the parameter it needs.
    pub fn parse(name: &str, epsilon: Option<f64>, lambda: Option<f64>) -> Result<Self> {
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::Config(format!("regime `{name}` needs {what}")))
        };
        let r = match name {
            "natural" | "n" => Regime::Natural,
            "adversarial" | "a" => Regime::Adversarial {
                epsilon: need(epsilon, "an epsilon")?,
            },
            "l1" | "l" => Regime::L1 {
                lambda: need(lambda, "a lambda")?,
            },
            "stable-ig" => Regime::StableIg {
                epsilon: need(epsilon, "an epsilon")?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown regime `{other}`; valid regimes: {}",
                    Self::NAMES.join(", ")
                )))
            }
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match *self {
            Regime::Natural => Ok(()),
            Regime::Adversarial { epsilon } | Regime::StableIg { epsilon } if ok(epsilon) => Ok(()),
            Regime::L1 { lambda } if ok(lambda) => Ok(()),
            _ => Err(Error::Config(format!("regime parameter must be finite and ≥ 0: {self:?}"))),
        }
    }

    pub fn epsilon(&self) -> f64 {
        match *self {
            Regime::Adversarial { epsilon } | Regime::StableIg { epsilon } => epsilon,
            _ => 0.0,
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Regime::L1 { lambda } => lambda,
            _ => 0.0,
        }
    }

    /// Short tag such as `n`, `a(0.1)` or `l(0.02)`.
    pub fn tag(&self) -> String {
        match *self {
            Regime::Natural => "n".into(),
            Regime::Adversarial { epsilon } => format!("a({epsilon})"),
            Regime::L1 { lambda } => format!("l({lambda})"),
            Regime::StableIg { epsilon } => format!("s({epsilon})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    #[default]
    Linear,
    Mlp {
        hidden: Vec<usize>,
        #[serde(default)]
        activation: HiddenActivation,
    },
}

/// PGD settings for MLP adversarial training; `steps = None` uses the
/// ε-dependent default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgdSettings {
    pub steps: Option<usize>,
    pub step_size: f64,
    pub random_start: bool,
}

impl Default for PgdSettings {
    fn default() -> Self {
        PgdSettings {
            steps: None,
            step_size: 0.01,
            random_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub regime: Regime,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Adds an unpenalized, unperturbed bias term.
    pub bias: bool,
    pub architecture: Architecture,
    pub pgd: PgdSettings,
    /// Keep adversarial inputs inside `[0, 1]`.
    pub clamp01: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regime: Regime::Natural,
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            bias: false,
            architecture: Architecture::Linear,
            pgd: PgdSettings::default(),
            clamp01: false,
        }
    }
}

impl TrainConfig {
    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.regime.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if let Architecture::Mlp { hidden, .. } = &self.architecture {
            if hidden.contains(&0) {
                return Err(Error::Config("hidden layer widths must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    fn pgd_config(&self) -> PgdConfig {
        let mut c = PgdConfig::for_epsilon(self.regime.epsilon(), 0);
        if let Some(s) = self.pgd.steps {
            c.steps = s;
        }
        c.step_size = self.pgd.step_size;
        c.random_start = self.pgd.random_start;
        c.clamp01 = self.clamp01;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective over the epoch's examples (without the ℓ1 term).
    pub loss: f64,
    /// Training-split accuracy after the epoch.
    pub accuracy: f64,
    pub l1_norm: f64,
    pub weight_gini: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    pub steps: usize,
}

impl TrainTrace {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epoch,loss,acc,l1_norm,weight_gini\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{},{},{},{},{}", r.epoch, r.loss, r.accuracy, r.l1_norm, r.weight_gini);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// What a trainer needs from a parameterized model.
trait Learner<T: Scalar> {
    /// Mean objective and mean gradient (one array per parameter group).
    fn batch(&self, ds: &Dataset<T>, idx: &[usize], seeds: &[u64]) -> Result<(T, Vec<Array1<T>>)>;
    fn groups(&mut self) -> Vec<ParamGroup<'_, T>>;
    /// Penalized weights, excluding biases.
    fn weights(&self) -> Vec<T>;
    fn scorer(&self) -> &dyn Scorer<T>;
    fn needs_seeds(&self) -> bool {
        false
    }
}

struct LinearLearner<T> {
    model: LinearModel<T>,
    spec: LossSpec,
    eps: T,
}

impl<T: Scalar> Learner<T> for LinearLearner<T> {
    fn batch(&self, ds: &Dataset<T>, idx: &[usize], _: &[u64]) -> Result<(T, Vec<Array1<T>>)> {
        let mut gw = Array1::zeros(ds.dim());
        let mut gb = T::zero();
        let mut total = T::zero();
        for &i in idx {
            let (l, g, b) = adversarial_parts(self.spec, &self.model, ds.row(i), ds.signed_label(i), self.eps)?;
            total += l;
            gw += &g;
            gb += b;
        }
        let m = T::lit(idx.len() as f64);
        let mut grads = vec![gw / m];
        if self.model.bias().is_some() {
            grads.push(Array1::from_elem(1, gb / m));
        }
        Ok((total / m, grads))
    }

    fn groups(&mut self) -> Vec<ParamGroup<'_, T>> {
        let (w, b) = self.model.params_mut();
        let mut groups = vec![ParamGroup {
            values: w.as_slice_mut().expect("contiguous weights"),
            l1: true,
        }];
        if let Some(b) = b {
            groups.push(ParamGroup {
                values: std::slice::from_mut(b),
                l1: false,
            });
        }
        groups
    }

    fn weights(&self) -> Vec<T> {
        self.model.w().to_vec()
    }

    fn scorer(&self) -> &dyn Scorer<T> {
        &self.model
    }
}

struct MlpLearner<T> {
    model: MlpModel<T>,
    spec: LossSpec,
    eps: T,
    pgd: PgdConfig,
}

impl<T: Scalar> Learner<T> for MlpLearner<T> {
    fn batch(&self, ds: &Dataset<T>, idx: &[usize], seeds: &[u64]) -> Result<(T, Vec<Array1<T>>)> {
        let budget = PerturbationBudget::new(self.eps)?;
        let adversarial = self.eps > T::zero();
        let per_example: Vec<(T, Vec<Dense<T>>)> = idx
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(&i, &seed)| {
                let x = ds.row(i);
                let y = ds.label(i);
                if adversarial {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let delta = pgd_with_rng(self.spec, &self.model, x, y, budget, &self.pgd, &mut rng)?;
                    let xa = &x + &delta;
                    let (l, g, _) = mlp_loss_gradient(self.spec, &self.model, xa.view(), y)?;
                    Ok((l, g))
                } else {
                    let (l, g, _) = mlp_loss_gradient(self.spec, &self.model, x, y)?;
                    Ok((l, g))
                }
            })
            .collect::<Result<_>>()?;
        // Sequential reduction in batch order keeps results independent of
        // the thread count.
        let mut acc = self.model.zeros_like();
        let mut total = T::zero();
        for (l, g) in &per_example {
            total += *l;
            for (a, gl) in acc.iter_mut().zip(g) {
                a.weights += &gl.weights;
                a.bias += &gl.bias;
            }
        }
        let m = T::lit(idx.len() as f64);
        let grads = acc
            .into_iter()
            .flat_map(|l| {
                let w = Array1::from_iter(l.weights.iter().copied()) / m;
                [w, l.bias / m]
            })
            .collect();
        Ok((total / m, grads))
    }

    fn groups(&mut self) -> Vec<ParamGroup<'_, T>> {
        self.model
            .layers_mut()
            .iter_mut()
            .flat_map(|l| {
                [
                    ParamGroup {
                        values: l.weights.as_slice_mut().expect("standard layout"),
                        l1: true,
                    },
                    ParamGroup {
                        values: l.bias.as_slice_mut().expect("contiguous"),
                        l1: false,
                    },
                ]
            })
            .collect()
    }

    fn weights(&self) -> Vec<T> {
        self.model.layers().iter().flat_map(|l| l.weights.iter().copied()).collect()
    }

    fn scorer(&self) -> &dyn Scorer<T> {
        &self.model
    }

    fn needs_seeds(&self) -> bool {
        self.eps > T::zero()
    }
}

fn check_trainable<T: Scalar>(ds: &Dataset<T>, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if !ds.is_binary() {
        return Err(Error::Unsupported(
            "train needs binary labels; use train_one_vs_all for multi-class data".into(),
        ));
    }
    if ds.indices(SplitKind::Train).is_empty() {
        return Err(Error::Empty("training split"));
    }
    Ok(())
}

/// Trains a fresh model on the training split. Deterministic given the
/// config seed; MLP batches fan out over threads but reduce in order.
pub fn train<T: Scalar>(ds: &Dataset<T>, spec: LossSpec, cfg: &TrainConfig) -> Result<(Model<T>, TrainTrace)> {
    check_trainable(ds, cfg)?;
    if let Regime::StableIg { .. } = cfg.regime {
        let (m, trace) = train_stable_ig(ds, spec, cfg)?;
        return Ok((m.into(), trace));
    }
    match &cfg.architecture {
        Architecture::Linear => {
            let (m, trace) = train_linear(ds, spec, cfg)?;
            Ok((m.into(), trace))
        }
        Architecture::Mlp { hidden, activation } => {
            let sizes: Vec<usize> = std::iter::once(ds.dim()).chain(hidden.iter().copied()).collect();
            let mut learner = MlpLearner {
                model: MlpModel::random(&sizes, *activation, cfg.seed)?,
                spec,
                eps: T::lit(cfg.regime.epsilon()),
                pgd: cfg.pgd_config(),
            };
            let trace = run(&mut learner, ds, cfg)?;
            Ok((learner.model.into(), trace))
        }
    }
}

/// Minimizes the stable-IG risk of a linear model. The per-example
/// objective `ℒ + max ‖IG^{ℒ_y}(x, x + Δ)‖₁` equals the adversarial loss
/// `g(ε‖w‖₁ − y⟨w, x⟩)`, so this runs the adversarial code path with the
/// same ε and produces an identical trajectory.
pub fn train_stable_ig<T: Scalar>(ds: &Dataset<T>, spec: LossSpec, cfg: &TrainConfig) -> Result<(LinearModel<T>, TrainTrace)> {
    check_trainable(ds, cfg)?;
    if cfg.architecture != Architecture::Linear {
        return Err(Error::Unsupported("stable-IG training is defined for linear models".into()));
    }
    let epsilon = match cfg.regime {
        Regime::StableIg { epsilon } | Regime::Adversarial { epsilon } => epsilon,
        Regime::Natural => 0.0,
        Regime::L1 { .. } => return Err(Error::Config("stable-IG training takes an epsilon, not a lambda".into())),
    };
    let cfg = cfg.clone().with_regime(Regime::Adversarial { epsilon });
    train_linear(ds, spec, &cfg)
}

fn train_linear<T: Scalar>(ds: &Dataset<T>, spec: LossSpec, cfg: &TrainConfig) -> Result<(LinearModel<T>, TrainTrace)> {
    let mut model = LinearModel::zeros(ds.dim(), Activation::Sigmoid);
    if cfg.bias {
        model = model.with_bias(T::zero())?;
    }
    let mut learner = LinearLearner {
        model,
        spec,
        eps: T::lit(cfg.regime.epsilon()),
    };
    let trace = run(&mut learner, ds, cfg)?;
    Ok((learner.model, trace))
}

fn run<T: Scalar, L: Learner<T>>(learner: &mut L, ds: &Dataset<T>, cfg: &TrainConfig) -> Result<TrainTrace> {
    let mut order = ds.indices(SplitKind::Train).to_vec();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pgd_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pgd_rng.set_stream(1);
    let mut opt = Optimizer::new(cfg.optimizer, T::lit(cfg.learning_rate));
    let lambda = T::lit(cfg.regime.lambda());
    let mut trace = TrainTrace::default();
    let mut seeds = Vec::new();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            seeds.clear();
            if learner.needs_seeds() {
                seeds.extend((0..batch.len()).map(|_| pgd_rng.next_u64()));
            } else {
                seeds.resize(batch.len(), 0);
            }
            let (loss, grads) = learner.batch(ds, batch, &seeds)?;
            let l = loss.to_f64_lossy();
            if !l.is_finite() || l > DIVERGENCE_LIMIT {
                return Err(Error::Diverged {
                    step: trace.steps,
                    loss: l,
                });
            }
            opt.step(learner.groups(), &grads, lambda)?;
            trace.steps += 1;
            if learner.groups().iter().any(|g| g.values.iter().any(|v| !v.is_finite())) {
                return Err(Error::Diverged {
                    step: trace.steps,
                    loss: f64::NAN,
                });
            }
            epoch_loss += l * batch.len() as f64;
        }
        let weights = learner.weights();
        trace.epochs.push(EpochRecord {
            epoch: epoch + 1,
            loss: epoch_loss / order.len() as f64,
            accuracy: binary_accuracy(learner.scorer(), ds, SplitKind::Train)?,
            l1_norm: weights.iter().map(|w| w.abs()).sum::<T>().to_f64_lossy(),
            weight_gini: gini_abs(weights.iter().copied())?.value.to_f64_lossy(),
        });
    }
    Ok(trace)
}

fn binary_accuracy<T: Scalar>(model: &dyn Scorer<T>, ds: &Dataset<T>, split: SplitKind) -> Result<f64> {
    let idx = ds.indices(split);
    let mut correct = 0usize;
    for &i in idx {
        if model.classify(ds.row(i))? == ds.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len().max(1) as f64)
}

/// One linear head per class, each trained on the ±1 relabeling
/// "class c vs rest" with its own closed-form adversary.
pub fn train_one_vs_all<T: Scalar>(
    ds: &Dataset<T>,
    spec: LossSpec,
    cfg: &TrainConfig,
) -> Result<(OneVsAllModel<T>, Vec<TrainTrace>)> {
    let k = match ds.label_kind() {
        LabelKind::MultiClass(k) if k >= 3 => k,
        _ => return Err(Error::Unsupported("one-vs-all needs at least 3 classes".into())),
    };
    if cfg.architecture != Architecture::Linear {
        return Err(Error::Unsupported("one-vs-all heads are linear".into()));
    }
    let train_idx = ds.indices(SplitKind::Train);
    let mut heads = Vec::with_capacity(k);
    let mut traces = Vec::with_capacity(k);
    for c in 0..k as i32 {
        if !train_idx.iter().any(|&i| ds.label(i) == c) {
            return Err(Error::ClassAbsent(c));
        }
        let labels = ds.labels().iter().map(|&y| if y == c { 1 } else { -1 }).collect();
        let map = vec![("rest".to_string(), -1), (format!("class {c}"), 1)];
        let binary = ds.relabel(labels, LabelKind::Binary, map)?;
        let (head, trace) = match cfg.regime {
            Regime::StableIg { .. } => train_stable_ig(&binary, spec, cfg)?,
            _ => train_linear(&binary, spec, cfg)?,
        };
        heads.push(head);
        traces.push(trace);
    }
    Ok((OneVsAllModel::new(heads)?, traces))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub n: usize,
}

/// Accuracy (0.5 threshold, ties to +1; argmax for one-vs-all) and mean
/// natural loss on a split. For one-vs-all the loss sums over heads.
pub fn evaluate<T: Scalar>(model: &Model<T>, ds: &Dataset<T>, split: SplitKind, spec: LossSpec) -> Result<Evaluation> {
    let idx = ds.indices(split);
    if idx.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let mut correct = 0usize;
    let mut total = 0.0;
    for &i in idx {
        let x: ArrayView1<'_, T> = ds.row(i);
        let y = ds.label(i);
        match model {
            Model::OneVsAll(m) => {
                let scores = m.scores(x)?;
                if m.predict_class(x)? as i32 == y {
                    correct += 1;
                }
                for (c, s) in scores.into_iter().enumerate() {
                    let yc = if c as i32 == y { T::one() } else { -T::one() };
                    total += spec.g(-yc * s).to_f64_lossy();
                }
            }
            _ => {
                let scorer = model.as_scorer().expect("binary model");
                let z = scorer.logit(x)?;
                if (if z >= T::zero() { 1 } else { -1 }) == y {
                    correct += 1;
                }
                total += spec.g(-T::lit(y as f64) * z).to_f64_lossy();
            }
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / idx.len() as f64,
        mean_loss: total / idx.len() as f64,
        n: idx.len(),
    })
}
