//! Monte-Carlo and algebraic checks of the expected adversarial SGD
//! update, the covariance lemma behind it, and the stable-IG identity.
//!
//! Sampling runs in `f64`; the algebraic identity is generic.

mod sampler;
mod stats;
mod theorem3;

pub use sampler::{CorrelatedGroup, FeatureSampler, NoiseKind};
pub use stats::{monte_carlo, Moments, CHUNK};
pub use theorem3::{check_theorem3_identity, check_theorem3_random, THEOREM3_TOLERANCE, theorem3_corner_search, CornerSearch, Theorem3Check};

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Pass threshold in standard errors.
pub const SE_MULTIPLIER: f64 = 3.0;

/// Minimum sample count for reported Monte-Carlo results.
pub const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// One verdict: an empirical quantity against a theoretical value or bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheckResult {
    pub label: String,
    pub estimate: f64,
    pub bound: f64,
    pub standard_error: f64,
    pub passed: bool,
    pub samples: usize,
}

/// A feature subset `S` and weights defining w-weighted averages
/// `q̄ᵂ_S = Σ_S w_i q_i / Σ_S |w_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAverageSpec {
    subset: Vec<usize>,
    w: Vec<f64>,
}

impl WeightedAverageSpec {
    pub fn new(subset: Vec<usize>, w: Vec<f64>) -> Result<Self> {
        if subset.is_empty() {
            return Err(Error::Empty("feature subset S"));
        }
        if subset.iter().any(|&i| i >= w.len()) {
            return Err(Error::Config("subset index outside the weight vector".into()));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("weights must be finite".into()));
        }
        Ok(WeightedAverageSpec { subset, w })
    }

    /// All features.
    pub fn full(w: Vec<f64>) -> Result<Self> {
        Self::new((0..w.len()).collect(), w)
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn scaled(&self, s: f64) -> Self {
        WeightedAverageSpec {
            subset: self.subset.clone(),
            w: self.w.iter().map(|v| v * s).collect(),
        }
    }

    /// `Σ_S |w_i|`; the non-zero branch needs it positive.
    pub fn mass(&self) -> f64 {
        self.subset.iter().map(|&i| self.w[i].abs()).sum()
    }

    pub fn average(&self, q: &[f64]) -> f64 {
        self.subset.iter().map(|&i| self.w[i] * q[i]).sum::<f64>() / self.mass()
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `ε‖w‖₁ − y⟨w, x⟩`.
fn adversarial_margin(w: &[f64], x: &[f64], y: f64, eps: f64) -> f64 {
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    eps * l1 - y * dot
}

fn check_inputs(w: &[f64], eps: f64, sampler: &FeatureSampler, n: usize) -> Result<()> {
    if w.len() != sampler.d() {
        return Err(Error::DimensionMismatch {
            expected: sampler.d(),
            got: w.len(),
        });
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Config("epsilon must be finite and ≥ 0".into()));
    }
    if n < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    Ok(())
}

/// `ḡ′ = E[g′(ε‖w‖₁ − y⟨w, x⟩)]` with its standard error.
pub fn estimate_gprimebar(
    spec: LossSpec,
    w: &[f64],
    eps: f64,
    sampler: &FeatureSampler,
    n: usize,
    seed: u64,
) -> Result<Estimate> {
    check_inputs(w, eps, sampler, n)?;
    let m = monte_carlo(n, seed, 1, |rng, out| {
        let mut x = vec![0.0; sampler.d()];
        let y = sampler.sample(rng, &mut x);
        out[0] = spec.g_prime(adversarial_margin(w, &x, y, eps));
    });
    Ok(Estimate {
        value: m.mean[0],
        se: m.se(0),
    })
}

/// Expected unit-rate SGD step under the adversarial loss,
/// `Δ̄_i = E[g′(m)(y x_i − sign(w_i) ε)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedUpdate {
    pub delta: Vec<Estimate>,
    pub gprimebar: Estimate,
    pub samples: usize,
    /// Moments of `(g′, Δ_1, …, Δ_d)`, for paired comparisons.
    #[serde(skip)]
    moments: Option<Moments>,
}

pub fn expected_update(
    spec: LossSpec,
    w: &[f64],
    eps: f64,
    sampler: &FeatureSampler,
    n: usize,
    seed: u64,
) -> Result<ExpectedUpdate> {
    check_inputs(w, eps, sampler, n)?;
    let d = sampler.d();
    let m = monte_carlo(n, seed, d + 1, |rng, out| {
        let mut x = vec![0.0; d];
        let y = sampler.sample(rng, &mut x);
        let gp = spec.g_prime(adversarial_margin(w, &x, y, eps));
        out[0] = gp;
        for i in 0..d {
            out[i + 1] = gp * (y * x[i] - sign0(w[i]) * eps);
        }
    });
    Ok(ExpectedUpdate {
        delta: (0..d)
            .map(|i| Estimate {
                value: m.mean[i + 1],
                se: m.se(i + 1),
            })
            .collect(),
        gprimebar: Estimate {
            value: m.mean[0],
            se: m.se(0),
        },
        samples: n,
        moments: Some(m),
    })
}

/// At `w = 0` every coordinate satisfies `Δ̄_i = ḡ′ a_i`; one result per
/// coordinate, passing when the paired difference is within 3 SE of zero.
pub fn check_theorem1_zero(
    spec: LossSpec,
    eps: f64,
    sampler: &FeatureSampler,
    n: usize,
    seed: u64,
) -> Result<Vec<TheoremCheckResult>> {
    let w = vec![0.0; sampler.d()];
    let up = expected_update(spec, &w, eps, sampler, n, seed)?;
    let m = up.moments.as_ref().expect("set by expected_update");
    Ok((0..sampler.d())
        .map(|i| {
            let a = sampler.a()[i];
            let bound = up.gprimebar.value * a;
            let se = m.se_diff(i + 1, 0, a);
            let estimate = up.delta[i].value;
            TheoremCheckResult {
                label: format!("coordinate {i}"),
                estimate,
                bound,
                standard_error: se,
                passed: (estimate - bound).abs() <= SE_MULTIPLIER * se,
                samples: n,
            }
        })
        .collect())
}

/// `Δ̄ᵂ_S ≤ ḡ′(āᵂ_S − ε)`, with `āᵂ_S` from the sampler's true strengths.
///
/// The verdict uses the per-sample paired statistic
/// `D = g′(m)(Q − āᵂ_S)`, `Q = Σ_S w_i y x_i / Σ_S |w_i|`, whose mean is
/// exactly the empirical gap `Δ̄ᵂ_S − ḡ′(āᵂ_S − ε)`.
pub fn check_theorem1_bound(
    spec: LossSpec,
    wspec: &WeightedAverageSpec,
    eps: f64,
    sampler: &FeatureSampler,
    n: usize,
    seed: u64,
) -> Result<TheoremCheckResult> {
    let (gap, est, bound) = bound_moments(spec, wspec, eps, sampler, n, seed)?;
    Ok(TheoremCheckResult {
        label: "weighted update bound".into(),
        estimate: est,
        bound,
        standard_error: gap.se,
        passed: gap.value <= SE_MULTIPLIER * gap.se,
        samples: n,
    })
}

/// Returns the paired gap estimate, `Δ̄ᵂ_S` and `ḡ′(āᵂ_S − ε)`.
fn bound_moments(
    spec: LossSpec,
    wspec: &WeightedAverageSpec,
    eps: f64,
    sampler: &FeatureSampler,
    n: usize,
    seed: u64,
) -> Result<(Estimate, f64, f64)> {
    let w = wspec.w();
    check_inputs(w, eps, sampler, n)?;
    let mass = wspec.mass();
    if mass <= 0.0 {
        return Err(Error::Config("weights vanish on S".into()));
    }
    let a_bar = wspec.average(sampler.a());
    let subset = wspec.subset();
    let m = monte_carlo(n, seed, 3, |rng, out| {
        let mut x = vec![0.0; sampler.d()];
        let y = sampler.sample(rng, &mut x);
        let gp = spec.g_prime(adversarial_margin(w, &x, y, eps));
        let q = subset.iter().map(|&i| w[i] * y * x[i]).sum::<f64>() / mass;
        out[0] = gp;
        out[1] = gp * (q - eps);
        out[2] = gp * (q - a_bar);
    });
    Ok((
        Estimate {
            value: m.mean[2],
            se: m.se(2),
        },
        m.mean[1],
        m.mean[0] * (a_bar - eps),
    ))
}

/// Residuals along a shrinking weight scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStep {
    pub scale: f64,
    pub estimate: f64,
    pub bound: f64,
    /// `|Δ̄ᵂ_S − ḡ′(āᵂ_S − ε)|` with the true `āᵂ_S`.
    pub residual: f64,
    pub residual_se: f64,
    /// In-sample form `|mean(g′Q) − mean(g′)mean(Q)|`, free of the
    /// sampling error in `āᵂ_S`.
    pub covariance_residual: f64,
    pub covariance_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub steps: Vec<LimitStep>,
    /// The covariance residual never grows by more than 3 SE between scales.
    pub monotone: bool,
    /// At the smallest scale the residual is within 3 SE of zero.
    pub equal_in_limit: bool,
    pub samples: usize,
}

impl LimitCheck {
    pub fn passed(&self) -> bool {
        self.monotone && self.equal_in_limit
    }
}

/// Evaluates the bound at `w·s` for each scale, with common random numbers.
pub fn check_theorem1_limit(
    spec: LossSpec,
    wspec: &WeightedAverageSpec,
    eps: f64,
    sampler: &FeatureSampler,
    n: usize,
    seed: u64,
    scales: &[f64],
) -> Result<LimitCheck> {
    if scales.is_empty() {
        return Err(Error::Empty("weight scales"));
    }
    let mut steps = Vec::with_capacity(scales.len());
    for &s in scales {
        let ws = wspec.scaled(s);
        let (gap, estimate, bound) = bound_moments(spec, &ws, eps, sampler, n, seed)?;
        let (cov, cov_se) = covariance_with_se(spec, &ws, eps, sampler, n, seed)?;
        steps.push(LimitStep {
            scale: s,
            estimate,
            bound,
            residual: gap.value.abs(),
            residual_se: gap.se,
            covariance_residual: cov.abs(),
            covariance_se: cov_se,
        });
    }
    let monotone = steps
        .windows(2)
        .all(|p| p[1].covariance_residual <= p[0].covariance_residual + SE_MULTIPLIER * p[1].covariance_se);
    let last = steps.last().expect("non-empty");
    let equal_in_limit = last.residual <= SE_MULTIPLIER * last.residual_se;
    Ok(LimitCheck {
        steps,
        monotone,
        equal_in_limit,
        samples: n,
    })
}

/// Sample covariance of `g′(m)` and `Q` and its influence-function SE.
fn covariance_with_se(
    spec: LossSpec,
    wspec: &WeightedAverageSpec,
    eps: f64,
    sampler: &FeatureSampler,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let w = wspec.w();
    let mass = wspec.mass();
    let subset = wspec.subset();
    let draw = |rng: &mut ChaCha8Rng| {
        let mut x = vec![0.0; sampler.d()];
        let y = sampler.sample(rng, &mut x);
        let gp = spec.g_prime(adversarial_margin(w, &x, y, eps));
        let q = subset.iter().map(|&i| w[i] * y * x[i]).sum::<f64>() / mass;
        (gp, q)
    };
    let first = monte_carlo(n, seed, 2, |rng, out| {
        let (g, q) = draw(rng);
        out[0] = g;
        out[1] = q;
    });
    let (gm, qm) = (first.mean[0], first.mean[1]);
    let second = monte_carlo(n, seed, 1, |rng, out| {
        let (g, q) = draw(rng);
        out[0] = (g - gm) * (q - qm);
    });
    Ok((second.mean[0], second.se(0)))
}

/// `E[Z f(Z, V)] ≤ E[Z] E[f(Z, V)]` for `f` non-increasing in `Z`,
/// `Z ⊥ V | Y` and `E(Z | Y) = E(Z)`. `draw` returns `(z, v, y)`.
///
/// The gap equals the sample covariance of `Z` and `f`, which is exactly
/// zero when either is constant.
pub fn check_lemma_exp_bound<F, S>(f: F, draw: S, n: usize, seed: u64) -> Result<TheoremCheckResult>
where
    F: Fn(f64, f64) -> f64 + Sync,
    S: Fn(&mut ChaCha8Rng) -> (f64, f64, f64) + Sync,
{
    if n < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    let first = monte_carlo(n, seed, 2, |rng, out| {
        let (z, v, _) = draw(rng);
        out[0] = z;
        out[1] = f(z, v);
    });
    let (zm, fm) = (first.mean[0], first.mean[1]);
    let gap = first.m2[1] / n as f64;
    let second = monte_carlo(n, seed, 1, |rng, out| {
        let (z, v, _) = draw(rng);
        out[0] = (z - zm) * (f(z, v) - fm);
    });
    let se = second.se(0);
    let bound = zm * fm;
    Ok(TheoremCheckResult {
        label: "covariance lemma".into(),
        estimate: bound + gap,
        bound,
        standard_error: se,
        passed: gap <= SE_MULTIPLIER * se,
        samples: n,
    })
}

/// Random instance of the covariance lemma: `Y = ±1` equiprobable,
/// `Z = μ + σ_Y N₁`, `V = bY + N₂`, `f(Z, V) = −σ(αZ + βV)` with `α > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConstruction {
    pub mu: f64,
    pub sd_pos: f64,
    pub sd_neg: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LemmaConstruction {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LemmaConstruction {
            mu: rng.gen_range(-1.0..1.0),
            sd_pos: rng.gen_range(0.1..2.0),
            sd_neg: rng.gen_range(0.1..2.0),
            b: rng.gen_range(-2.0..2.0),
            alpha: rng.gen_range(0.1..3.0),
            beta: rng.gen_range(-3.0..3.0),
        }
    }

    /// Returns `(z, v, y)`.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64, f64) {
        let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let sd = if y > 0.0 { self.sd_pos } else { self.sd_neg };
        let z = self.mu + sd * rng.sample::<f64, _>(StandardNormal);
        let v = self.b * y + rng.sample::<f64, _>(StandardNormal);
        (z, v, y)
    }

    pub fn f(&self, z: f64, v: f64) -> f64 {
        -crate::scalar::sigmoid(self.alpha * z + self.beta * v)
    }

    pub fn check(&self, n: usize, seed: u64) -> Result<TheoremCheckResult> {
        check_lemma_exp_bound(|z, v| self.f(z, v), |rng| self.draw(rng), n, seed)
    }
}

/// A random configuration for the weighted-update bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfiguration {
    pub sampler: FeatureSampler,
    pub wspec: WeightedAverageSpec,
    pub epsilon: f64,
}

/// Draws a configuration with `d` features: strengths in `[−1, 1]`, a
/// random non-empty subset `S`, sometimes a correlated complement, and
/// `ε ∈ [0, 0.5]`. Hinge configurations use two-point noise and are
/// redrawn until every reachable margin stays 0.05 away from the kink.
pub fn draw_bound_configuration(spec: LossSpec, d: usize, seed: u64) -> Result<BoundConfiguration> {
    if d == 0 || d > 12 {
        return Err(Error::Config("configuration dimension must be in 1..=12".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sd: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..1.5)).collect();
        let scale = rng.gen_range(0.2..2.0);
        let w: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let mut subset: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.6)).collect();
        if subset.is_empty() {
            subset.push(rng.gen_range(0..d));
        }
        let epsilon = rng.gen_range(0.0..0.5);
        let balance = rng.gen_range(0.3..0.7);
        let noise = if spec == LossSpec::Hinge {
            NoiseKind::Rademacher
        } else {
            NoiseKind::Gaussian
        };
        let mut sampler = FeatureSampler::new(a, sd, noise, balance)?;
        let complement: Vec<usize> = (0..d).filter(|i| !subset.contains(i)).collect();
        if noise == NoiseKind::Gaussian && complement.len() >= 2 && rng.gen_bool(0.5) {
            let rho = rng.gen_range(0.0..0.8);
            sampler = sampler.with_correlated(CorrelatedGroup {
                features: complement,
                rho,
            })?;
        }
        let wspec = WeightedAverageSpec::new(subset, w)?;
        if wspec.mass() <= 0.0 {
            continue;
        }
        if spec == LossSpec::Hinge {
            let support = sampler.support().expect("two-point noise");
            let near_kink = support
                .iter()
                .any(|(y, _, x)| (adversarial_margin(wspec.w(), x, *y, epsilon) + 1.0).abs() <= 0.05);
            if near_kink {
                continue;
            }
        }
        return Ok(BoundConfiguration {
            sampler,
            wspec,
            epsilon,
        });
    }
    Err(Error::Config("could not draw a configuration away from the hinge kink".into()))
}

/// JSON-ready summary of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub theorem: String,
    pub configuration: serde_json::Value,
    pub checks: Vec<TheoremCheckResult>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn new(theorem: &str, configuration: serde_json::Value, checks: Vec<TheoremCheckResult>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        VerifyReport {
            theorem: theorem.to_string(),
            configuration,
            checks,
            passed,
        }
    }
}
