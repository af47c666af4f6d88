use super::{check_finite, Scorer};
use crate::error::{check_dim, Result};
use crate::loss::LossSpec;
use crate::scalar::{sigmoid, Scalar};
use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
            Activation::Identity => T::one(),
        }
    }
}

/// `F(x) = A(⟨w, x⟩ + b)`; the bias is optional and absent by default.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    w: Array1<T>,
    activation: Activation,
    bias: Option<T>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn new(w: Array1<T>, activation: Activation) -> Result<Self> {
        check_finite(w.iter(), "weight vector")?;
        Ok(LinearModel {
            w,
            activation,
            bias: None,
        })
    }

    pub fn zeros(d: usize, activation: Activation) -> Self {
        LinearModel {
            w: Array1::zeros(d),
            activation,
            bias: None,
        }
    }

    pub fn with_bias(mut self, bias: T) -> Result<Self> {
        check_finite([bias].iter(), "bias")?;
        self.bias = Some(bias);
        Ok(self)
    }

    pub fn w(&self) -> &Array1<T> {
        &self.w
    }

    pub fn bias(&self) -> Option<T> {
        self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Array1<T>, Option<&mut T>) {
        (&mut self.w, self.bias.as_mut())
    }

    /// `⟨w, x⟩ + b`.
    #[inline]
    pub fn margin(&self, x: ArrayView1<'_, T>) -> Result<T> {
        check_dim(self.w.len(), x.len())?;
        Ok(self.w.dot(&x) + self.bias.unwrap_or_else(T::zero))
    }
}

impl<T: Scalar> Scorer<T> for LinearModel<T> {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn logit(&self, x: ArrayView1<'_, T>) -> Result<T> {
        self.margin(x)
    }

    fn logit_and_input_grad(&self, x: ArrayView1<'_, T>) -> Result<(T, Array1<T>)> {
        Ok((self.margin(x)?, self.w.clone()))
    }

    fn output_activation(&self) -> Activation {
        self.activation
    }
}

/// `g(−y(⟨w, x⟩ + b))` for `y ∈ {−1, +1}`.
pub fn loss<T: Scalar>(spec: LossSpec, model: &LinearModel<T>, x: ArrayView1<'_, T>, y: i32) -> Result<T> {
    let y = T::lit(y as f64);
    Ok(spec.g(-y * model.margin(x)?))
}

/// Gradient of [`loss`] in `w`: `−y g′(−y⟨w, x⟩) x`.
pub fn loss_gradient<T: Scalar>(
    spec: LossSpec,
    model: &LinearModel<T>,
    x: ArrayView1<'_, T>,
    y: i32,
) -> Result<Array1<T>> {
    let y = T::lit(y as f64);
    let gp = spec.g_prime(-y * model.margin(x)?);
    Ok(x.mapv(|xi| -y * gp * xi))
}
