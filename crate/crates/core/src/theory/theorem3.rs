//! Loss plus the ℓ1 norm of the loss attribution toward the worst-case
//! perturbation equals the adversarial loss for linear models.

use crate::adversarial::{adversarial_loss, closed_form_perturbation, PerturbationBudget};
use crate::attribution::{ig_closed_form, LossSurface};
use crate::error::{check_dim, Error, Result};
use crate::loss::LossSpec;
use crate::model::{loss, LinearModel};
use crate::scalar::Scalar;
use super::TheoremCheckResult;
use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Absolute tolerance for the identity residual and the corner gap.
pub const THEOREM3_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem3Check<T> {
    /// `ℒ(x) + ‖IG^{ℒ_y}(x, x + Δ*)‖₁`.
    pub lhs: T,
    /// `g(ε‖w‖₁ − y⟨w, x⟩)`.
    pub rhs: T,
    pub residual: T,
}

fn validate<T: Scalar>(model: &LinearModel<T>, x: ArrayView1<'_, T>, y: i32, eps: T) -> Result<()> {
    check_dim(model.w().len(), x.len())?;
    if y != 1 && y != -1 {
        return Err(Error::Config(format!("label must be ±1, got {y}")));
    }
    if !(eps.is_finite() && eps >= T::zero()) {
        return Err(Error::Config("epsilon must be finite and ≥ 0".into()));
    }
    Ok(())
}

pub fn check_theorem3_identity<T: Scalar>(
    spec: LossSpec,
    model: &LinearModel<T>,
    x: ArrayView1<'_, T>,
    y: i32,
    eps: T,
) -> Result<Theorem3Check<T>> {
    validate(model, x, y, eps)?;
    let budget = PerturbationBudget::new(eps)?;
    let baseline = &x + &closed_form_perturbation(model, y, budget);
    let surface = LossSurface { spec, model, label: y };
    let ig = ig_closed_form(&surface, x, baseline.view())?;
    let lhs = loss(spec, model, x, y)? + ig.values.iter().map(|v| v.abs()).sum::<T>();
    let rhs = adversarial_loss(spec, model, x, y, budget)?;
    Ok(Theorem3Check {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerSearch<T> {
    /// Largest `‖IG^{ℒ_y}(x, x + Δ)‖₁` over corners of the ε-box.
    pub best_value: T,
    pub best_corner: Array1<T>,
    /// The same quantity at `Δ*`.
    pub closed_form_value: T,
}

/// Largest supported number of active coordinates.
pub const MAX_CORNER_DIM: usize = 16;

/// Enumerates `Δ ∈ {±ε}` on coordinates with `w_i ≠ 0` (zero elsewhere).
/// Ties keep the first corner in enumeration order.
pub fn theorem3_corner_search<T: Scalar>(
    spec: LossSpec,
    model: &LinearModel<T>,
    x: ArrayView1<'_, T>,
    y: i32,
    eps: T,
) -> Result<CornerSearch<T>> {
    validate(model, x, y, eps)?;
    let active: Vec<usize> = (0..x.len()).filter(|&i| model.w()[i] != T::zero()).collect();
    if active.len() > MAX_CORNER_DIM {
        return Err(Error::Unsupported(format!(
            "corner search over {} active coordinates (limit {MAX_CORNER_DIM})",
            active.len()
        )));
    }
    let surface = LossSurface { spec, model, label: y };
    let norm_at = |delta: &Array1<T>| -> Result<T> {
        let u = &x + delta;
        let ig = ig_closed_form(&surface, x, u.view())?;
        Ok(ig.values.iter().map(|v| v.abs()).sum::<T>())
    };
    let star = closed_form_perturbation(model, y, PerturbationBudget::new(eps)?);
    let closed_form_value = norm_at(&star)?;
    let mut best: Option<(T, Array1<T>)> = None;
    let mut delta = Array1::<T>::zeros(x.len());
    for mask in 0u32..(1u32 << active.len()) {
        for (bit, &i) in active.iter().enumerate() {
            delta[i] = if mask >> bit & 1 == 1 { eps } else { -eps };
        }
        let v = norm_at(&delta)?;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, delta.clone()));
        }
    }
    let (best_value, best_corner) = best.expect("at least the empty corner");
    Ok(CornerSearch {
        best_value,
        best_corner,
        closed_form_value,
    })
}

/// Runs the identity on `trials` random draws (`d ∈ 1..=8`, standard
/// normal `w`, `x` and bias on odd draws, `ε ∈ [0, 1)`), plus a corner
/// search on every tenth draw. Returns the identity check and the corner
/// check; each estimate is the worst residual seen.
pub fn check_theorem3_random(spec: LossSpec, trials: usize, seed: u64) -> Result<[TheoremCheckResult; 2]> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng, d: usize| -> Array1<f64> { (0..d).map(|_| rng.sample(StandardNormal)).collect() };
    let (mut worst, mut gap, mut searches) = (0.0f64, 0.0f64, 0usize);
    for trial in 0..trials {
        let d = rng.gen_range(1..=8);
        let w = normal(&mut rng, d);
        let x = normal(&mut rng, d);
        let y = if rng.gen_bool(0.5) { 1 } else { -1 };
        let eps = rng.gen_range(0.0..1.0);
        let mut m = LinearModel::new(w, crate::model::Activation::Sigmoid)?;
        if trial % 2 == 1 {
            m = m.with_bias(rng.sample(StandardNormal))?;
        }
        worst = worst.max(check_theorem3_identity(spec, &m, x.view(), y, eps)?.residual);
        if trial % 10 == 0 {
            let s = theorem3_corner_search(spec, &m, x.view(), y, eps)?;
            gap = gap.max((s.best_value - s.closed_form_value).abs() / s.best_value.max(1.0));
            searches += 1;
        }
    }
    let check = |label: String, estimate: f64, samples: usize| TheoremCheckResult {
        label,
        estimate,
        bound: THEOREM3_TOLERANCE,
        standard_error: 0.0,
        passed: estimate <= THEOREM3_TOLERANCE,
        samples,
    };
    Ok([
        check(format!("{spec} identity residual"), worst, trials),
        check(format!("{spec} corner search gap"), gap, searches),
    ])
}
