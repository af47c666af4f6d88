//! Predictors: sigmoid/identity linear models, small MLPs and one-vs-all
//! composites of linear heads.

mod linear;
mod mlp;
mod ova;
mod persist;

pub use linear::{loss, loss_gradient, Activation, LinearModel};
pub use mlp::{mlp_loss_gradient, Dense, HiddenActivation, MlpModel};
pub use ova::OneVsAllModel;
pub use persist::MODEL_FORMAT_VERSION;

use crate::error::Result;
use crate::scalar::Scalar;
use ndarray::{Array1, ArrayView1};

/// Binary classifier producing a real-valued logit.
pub trait Scorer<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn logit(&self, x: ArrayView1<'_, T>) -> Result<T>;

    /// Logit together with its gradient in `x`.
    fn logit_and_input_grad(&self, x: ArrayView1<'_, T>) -> Result<(T, Array1<T>)>;

    /// Map from logit to model output.
    fn output_activation(&self) -> Activation;

    fn predict(&self, x: ArrayView1<'_, T>) -> Result<T> {
        Ok(self.output_activation().apply(self.logit(x)?))
    }

    /// Predicted label with the 0.5 (logit 0) threshold; ties go to +1.
    fn classify(&self, x: ArrayView1<'_, T>) -> Result<i32> {
        let z = self.logit(x)?;
        Ok(if z >= T::zero() { 1 } else { -1 })
    }
}

/// Output of [`Model::predict`].
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction<T> {
    /// Binary models: `A(logit)`, a probability for sigmoid outputs.
    Binary(T),
    /// One-vs-all: head margins and the argmax class.
    Classes { scores: Vec<T>, class: usize },
}

/// Any model the toolkit can train, save and load.
#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Linear(LinearModel<T>),
    Mlp(MlpModel<T>),
    OneVsAll(OneVsAllModel<T>),
}

impl<T: Scalar> Model<T> {
    pub fn dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim(),
            Model::Mlp(m) => m.dim(),
            Model::OneVsAll(m) => m.dim(),
        }
    }

    pub fn predict(&self, x: ArrayView1<'_, T>) -> Result<Prediction<T>> {
        match self {
            Model::Linear(m) => Ok(Prediction::Binary(Scorer::predict(m, x)?)),
            Model::Mlp(m) => Ok(Prediction::Binary(Scorer::predict(m, x)?)),
            Model::OneVsAll(m) => {
                let scores = m.scores(x)?;
                let class = ova::argmax(&scores);
                Ok(Prediction::Classes { scores, class })
            }
        }
    }

    /// Binary view of the model, if it has one.
    pub fn as_scorer(&self) -> Option<&dyn Scorer<T>> {
        match self {
            Model::Linear(m) => Some(m),
            Model::Mlp(m) => Some(m),
            Model::OneVsAll(_) => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Mlp(_) => "mlp",
            Model::OneVsAll(_) => "one-vs-all",
        }
    }
}

impl<T> From<LinearModel<T>> for Model<T> {
    fn from(m: LinearModel<T>) -> Self {
        Model::Linear(m)
    }
}

impl<T> From<MlpModel<T>> for Model<T> {
    fn from(m: MlpModel<T>) -> Self {
        Model::Mlp(m)
    }
}

impl<T> From<OneVsAllModel<T>> for Model<T> {
    fn from(m: OneVsAllModel<T>) -> Self {
        Model::OneVsAll(m)
    }
}

pub(crate) fn check_finite<'a, T: Scalar>(values: impl IntoIterator<Item = &'a T>, what: &str) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::Error::Config(format!("{what} contains a non-finite value")))
    }
}
