//! ℓ∞(ε) adversaries: the exact worst case for linear margin losses and
//! projected gradient ascent for MLPs.

use crate::error::{check_dim, Error, Result};
use crate::loss::LossSpec;
use crate::model::{LinearModel, MlpModel, OneVsAllModel};
use crate::scalar::Scalar;
use ndarray::{Array1, ArrayView1, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Radius of the ℓ∞ ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationBudget<T> {
    epsilon: T,
}

impl<T: Scalar> PerturbationBudget<T> {
    pub fn new(epsilon: T) -> Result<Self> {
        if epsilon.is_finite() && epsilon >= T::zero() {
            Ok(PerturbationBudget { epsilon })
        } else {
            Err(Error::Config(format!("epsilon must be finite and ≥ 0, got {epsilon}")))
        }
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgdConfig {
    pub steps: usize,
    pub step_size: f64,
    pub random_start: bool,
    pub seed: u64,
    /// Keep `x + δ` inside `[0, 1]`, for image-like inputs.
    #[serde(default)]
    pub clamp01: bool,
}

impl PgdConfig {
    /// `⌊100 ε⌋ + 10` steps of size 0.01 from a random start.
    pub fn for_epsilon(epsilon: f64, seed: u64) -> Self {
        PgdConfig {
            steps: (epsilon * 100.0).floor() as usize + 10,
            step_size: 0.01,
            random_start: true,
            seed,
            clamp01: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("PGD needs at least one step".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config("PGD step size must be positive".into()));
        }
        Ok(())
    }
}

/// `δ* = −y sign(w) ε`, with `sign(0) = 0`.
pub fn closed_form_perturbation<T: Scalar>(model: &LinearModel<T>, y: i32, budget: PerturbationBudget<T>) -> Array1<T> {
    let ye = T::lit(y as f64) * budget.epsilon;
    model.w().mapv(|wi| -ye * wi.sign0())
}

/// Adversarial margin argument `ε‖w‖₁ − y(⟨w, x⟩ + b)`.
#[inline]
pub(crate) fn adversarial_argument<T: Scalar>(
    model: &LinearModel<T>,
    x: ArrayView1<'_, T>,
    y: T,
    eps: T,
) -> Result<T> {
    let l1 = model.w().iter().map(|w| w.abs()).sum::<T>();
    Ok(eps * l1 - y * model.margin(x)?)
}

/// `g(ε‖w‖₁ − y⟨w, x⟩)`, the loss at the worst-case perturbation.
pub fn adversarial_loss<T: Scalar>(
    spec: LossSpec,
    model: &LinearModel<T>,
    x: ArrayView1<'_, T>,
    y: i32,
    budget: PerturbationBudget<T>,
) -> Result<T> {
    let z = adversarial_argument(model, x, T::lit(y as f64), budget.epsilon)?;
    Ok(spec.g(z))
}

/// `−g′(ε‖w‖₁ − y⟨w, x⟩)(y x − sign(w) ε)`, the gradient in `w`.
pub fn adversarial_loss_gradient<T: Scalar>(
    spec: LossSpec,
    model: &LinearModel<T>,
    x: ArrayView1<'_, T>,
    y: i32,
    budget: PerturbationBudget<T>,
) -> Result<Array1<T>> {
    Ok(adversarial_parts(spec, model, x, T::lit(y as f64), budget.epsilon)?.1)
}

/// Loss, weight gradient and bias gradient of the adversarial objective.
pub(crate) fn adversarial_parts<T: Scalar>(
    spec: LossSpec,
    model: &LinearModel<T>,
    x: ArrayView1<'_, T>,
    y: T,
    eps: T,
) -> Result<(T, Array1<T>, T)> {
    let z = adversarial_argument(model, x, y, eps)?;
    let gp = spec.g_prime(z);
    let mut grad = Array1::zeros(x.len());
    Zip::from(&mut grad)
        .and(&x)
        .and(model.w())
        .for_each(|g, &xi, &wi| *g = -gp * (y * xi - wi.sign0() * eps));
    Ok((spec.g(z), grad, -gp * y))
}

/// Projected gradient ascent on the loss inside the ℓ∞ ball. Returns the
/// best iterate seen, so the result never scores below the starting point.
pub fn pgd_perturbation<T: Scalar>(
    spec: LossSpec,
    model: &MlpModel<T>,
    x: ArrayView1<'_, T>,
    y: i32,
    budget: PerturbationBudget<T>,
    cfg: &PgdConfig,
) -> Result<Array1<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pgd_with_rng(spec, model, x, y, budget, cfg, &mut rng)
}

pub(crate) fn pgd_with_rng<T: Scalar, R: Rng>(
    spec: LossSpec,
    model: &MlpModel<T>,
    x: ArrayView1<'_, T>,
    y: i32,
    budget: PerturbationBudget<T>,
    cfg: &PgdConfig,
    rng: &mut R,
) -> Result<Array1<T>> {
    cfg.validate()?;
    check_dim(crate::model::Scorer::dim(model), x.len())?;
    let eps = budget.epsilon;
    if eps <= T::zero() {
        return Err(Error::Config("PGD needs epsilon > 0".into()));
    }
    let (lo, hi): (Array1<T>, Array1<T>) = if cfg.clamp01 {
        (
            x.mapv(|xi| (-eps).max(-xi).min(T::zero())),
            x.mapv(|xi| eps.min(T::one() - xi).max(T::zero())),
        )
    } else {
        (Array1::from_elem(x.len(), -eps), Array1::from_elem(x.len(), eps))
    };
    let project = |d: &mut Array1<T>| {
        Zip::from(d).and(&lo).and(&hi).for_each(|v, &l, &h| *v = v.max(l).min(h));
    };

    let mut delta = if cfg.random_start {
        let e = eps.to_f64_lossy();
        Array1::from_shape_simple_fn(x.len(), || T::lit(rng.gen_range(-e..=e)))
    } else {
        Array1::zeros(x.len())
    };
    project(&mut delta);

    let alpha = T::lit(cfg.step_size);
    let mut best: Option<(T, Array1<T>)> = None;
    for _ in 0..cfg.steps {
        let (l, g) = model.loss_input_gradient(spec, (&x + &delta).view(), y)?;
        if best.as_ref().is_none_or(|(b, _)| l >= *b) {
            best = Some((l, delta.clone()));
        }
        Zip::from(&mut delta).and(&g).for_each(|d, &gi| *d += alpha * gi.sign0());
        project(&mut delta);
    }
    let (l, _) = model.loss_input_gradient(spec, (&x + &delta).view(), y)?;
    match best {
        Some((b, d)) if b > l => Ok(d),
        _ => Ok(delta),
    }
}

/// Per-head worst case: head `i` sees label `+1` iff `i == class`.
pub fn one_vs_all_perturbation<T: Scalar>(
    model: &OneVsAllModel<T>,
    class: usize,
    budget: PerturbationBudget<T>,
) -> Result<Vec<Array1<T>>> {
    if class >= model.k() {
        return Err(Error::Config(format!("class {class} outside 0..{}", model.k())));
    }
    Ok(model
        .heads()
        .iter()
        .enumerate()
        .map(|(i, h)| closed_form_perturbation(h, if i == class { 1 } else { -1 }, budget))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{loss, loss_gradient, Activation, Dense, HiddenActivation};
    use ndarray::array;

    fn budget(e: f64) -> PerturbationBudget<f64> {
        PerturbationBudget::new(e).unwrap()
    }

    #[test]
    fn sign_formula() {
        let m = LinearModel::new(array![1.0, -2.0, 0.0], Activation::Sigmoid).unwrap();
        assert_eq!(closed_form_perturbation(&m, 1, budget(0.1)), array![-0.1, 0.1, 0.0]);
        assert_eq!(closed_form_perturbation(&m, -1, budget(0.1)), array![0.1, -0.1, 0.0]);
        assert!(closed_form_perturbation(&m, 1, budget(0.0)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn budget_rejects_negative() {
        assert!(PerturbationBudget::new(-0.1f64).is_err());
        assert!(PerturbationBudget::new(f64::INFINITY).is_err());
    }

    #[test]
    fn hand_evaluated_adversarial_loss() {
        let m = LinearModel::new(array![1.0, -1.0], Activation::Sigmoid).unwrap();
        let v = adversarial_loss(LossSpec::Logistic, &m, array![0.0, 0.0].view(), 1, budget(0.5)).unwrap();
        assert!((v - (1.0 + 1f64.exp()).ln()).abs() < 1e-15);
        assert!((v - 1.3133).abs() < 5e-5);
    }

    #[test]
    fn zero_budget_is_natural() {
        let m = LinearModel::new(array![0.7, -0.2], Activation::Sigmoid).unwrap();
        let x = array![1.5, 2.0];
        for spec in LossSpec::ALL {
            let a = adversarial_loss(spec, &m, x.view(), -1, budget(0.0)).unwrap();
            assert_eq!(a, loss(spec, &m, x.view(), -1).unwrap());
            let ga = adversarial_loss_gradient(spec, &m, x.view(), -1, budget(0.0)).unwrap();
            assert_eq!(ga, loss_gradient(spec, &m, x.view(), -1).unwrap());
        }
    }

    #[test]
    fn zero_weights_gradient_ignores_epsilon() {
        let m = LinearModel::<f64>::zeros(2, Activation::Sigmoid);
        let x = array![1.0, -3.0];
        for e in [0.0, 0.3, 2.0] {
            let g = adversarial_loss_gradient(LossSpec::Logistic, &m, x.view(), -1, budget(e)).unwrap();
            assert_eq!(g, array![0.5, -1.5]);
        }
    }

    #[test]
    fn ova_heads_get_opposite_signs() {
        let w = array![0.5, -1.0, 0.0];
        let heads = (0..3).map(|_| LinearModel::new(w.clone(), Activation::Sigmoid).unwrap()).collect();
        let m = OneVsAllModel::new(heads).unwrap();
        let d = one_vs_all_perturbation(&m, 1, budget(0.2)).unwrap();
        assert_eq!(d[1], -&d[0]);
        assert_eq!(d[0], d[2]);
        assert!(one_vs_all_perturbation(&m, 3, budget(0.2)).is_err());
        assert!(one_vs_all_perturbation(&m, 0, budget(0.0)).unwrap().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn pgd_defaults() {
        let c = PgdConfig::for_epsilon(0.1, 0);
        assert_eq!(c.steps, 20);
        assert_eq!(c.step_size, 0.01);
        assert!(c.random_start);
        assert_eq!(PgdConfig::for_epsilon(0.3, 0).steps, 40);
    }

    #[test]
    fn fgsm_corner_for_single_step() {
        let mut out = Dense::zeros(3, 1);
        out.weights.row_mut(0).assign(&array![2.0, -0.5, 0.0]);
        let mlp = MlpModel::new(vec![out], HiddenActivation::Softplus).unwrap();
        let cfg = PgdConfig {
            steps: 1,
            step_size: 0.5,
            random_start: false,
            seed: 0,
            clamp01: false,
        };
        let d = pgd_perturbation(LossSpec::Logistic, &mlp, array![0.1, 0.2, 0.3].view(), 1, budget(0.2), &cfg).unwrap();
        assert_eq!(d, array![-0.2, 0.2, 0.0]);
    }

    #[test]
    fn clamp_keeps_unit_range() {
        let mlp = MlpModel::<f64>::random(&[4, 3], HiddenActivation::Softplus, 5).unwrap();
        let mut cfg = PgdConfig::for_epsilon(0.3, 2);
        cfg.clamp01 = true;
        let x = array![0.0, 1.0, 0.95, 0.5];
        let d = pgd_perturbation(LossSpec::Logistic, &mlp, x.view(), -1, budget(0.3), &cfg).unwrap();
        for (xi, di) in x.iter().zip(d.iter()) {
            assert!(di.abs() <= 0.3);
            assert!((0.0..=1.0).contains(&(xi + di)));
        }
    }
}
