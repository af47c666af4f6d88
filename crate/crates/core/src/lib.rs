//! Attribution sparseness toolkit: linear and small MLP classifiers trained
//! naturally, with ℓ1 regularization or against ℓ∞ adversaries, Integrated
//! Gradients attributions, Gini-based sparseness metrics and Monte-Carlo
//! checks of the expected-update and stable-IG identities.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

pub mod adversarial;
pub mod attribution;
pub mod data;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod sparseness;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
pub use loss::LossSpec;
pub use scalar::Scalar;

pub type DatasetF64 = data::Dataset<f64>;
pub type DatasetF32 = data::Dataset<f32>;
pub type LinearModelF64 = model::LinearModel<f64>;
pub type LinearModelF32 = model::LinearModel<f32>;
pub type MlpModelF64 = model::MlpModel<f64>;
pub type MlpModelF32 = model::MlpModel<f32>;
pub type ModelF64 = model::Model<f64>;
pub type ModelF32 = model::Model<f32>;
pub type AttributionVectorF64 = attribution::AttributionVector<f64>;
pub type AttributionVectorF32 = attribution::AttributionVector<f32>;
