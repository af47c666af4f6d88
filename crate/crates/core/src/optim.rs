//! First-order optimizers with an optional ℓ1 proximal step.

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}` (expected sgd or adam)"))),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-7;

/// A parameter block and whether it carries the ℓ1 penalty.
pub struct ParamGroup<'a, T> {
    pub values: &'a mut [T],
    pub l1: bool,
}

/// Stateful optimizer over a fixed list of parameter groups.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: T,
    t: i32,
    m: Vec<Array1<T>>,
    v: Vec<Array1<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: T) -> Self {
        Optimizer {
            kind,
            lr: learning_rate,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// One descent step followed by soft-thresholding of ℓ1 groups.
    ///
    /// Under Adam the threshold is scaled by the same diagonal
    /// preconditioner as the step, `lr λ / (sqrt(v̂) + ε)`, i.e. the proximal
    /// operator in Adam's metric. Under SGD it is `lr λ`.
    pub fn step(&mut self, params: Vec<ParamGroup<'_, T>>, grads: &[Array1<T>], lambda: T) -> Result<()> {
        check_dim(params.len(), grads.len())?;
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Array1::zeros(g.len())).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let lr = self.lr;
        let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPSILON));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for (k, (group, g)) in params.into_iter().zip(grads).enumerate() {
            check_dim(group.values.len(), g.len())?;
            let shrink = group.l1 && lambda > T::zero();
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, &gi) in group.values.iter_mut().zip(g) {
                        *p -= lr * gi;
                        if shrink {
                            *p = soft_threshold(*p, lr * lambda);
                        }
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for ((p, &gi), (mi, vi)) in group.values.iter_mut().zip(g).zip(m.iter_mut().zip(v.iter_mut())) {
                        *mi = b1 * *mi + (T::one() - b1) * gi;
                        *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                        let den = (*vi / c2).sqrt() + eps;
                        *p -= lr * (*mi / c1) / den;
                        if shrink {
                            *p = soft_threshold(*p, lr * lambda / den);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `sign(p) max(|p| − τ, 0)`; never flips a sign.
#[inline]
pub fn soft_threshold<T: Scalar>(p: T, tau: T) -> T {
    if p > tau {
        p - tau
    } else if p < -tau {
        p + tau
    } else {
        T::zero()
    }
}
