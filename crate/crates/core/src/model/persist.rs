use super::{Activation, Dense, HiddenActivation, LinearModel, MlpModel, Model, OneVsAllModel};
use crate::data::parse_reals;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    scalar: String,
    #[serde(flatten)]
    body: Body,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Body {
    Linear(LinearFile),
    Mlp(MlpFile),
    OneVsAll { heads: Vec<LinearFile> },
}

#[derive(Serialize, Deserialize)]
struct LinearFile {
    activation: Activation,
    d: usize,
    w: Vec<String>,
    bias: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct MlpFile {
    hidden_activation: HiddenActivation,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    inputs: usize,
    outputs: usize,
    weights: Vec<String>,
    bias: Vec<String>,
}

fn strings<'a, T: Scalar>(v: impl IntoIterator<Item = &'a T>) -> Vec<String> {
    v.into_iter().map(|x| x.to_string()).collect()
}

fn parse_one<T: Scalar>(s: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::Format(format!("`{s}` is not a real number")))
}

impl LinearFile {
    fn from_model<T: Scalar>(m: &LinearModel<T>) -> Self {
        LinearFile {
            activation: m.activation(),
            d: m.w().len(),
            w: strings(m.w().iter()),
            bias: m.bias().map(|b| b.to_string()),
        }
    }

    fn into_model<T: Scalar>(self) -> Result<LinearModel<T>> {
        if self.w.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: self.w.len(),
            });
        }
        let m = LinearModel::new(Array1::from(parse_reals::<T>(&self.w)?), self.activation)?;
        match self.bias {
            Some(b) => m.with_bias(parse_one(&b)?),
            None => Ok(m),
        }
    }
}

impl<T: Scalar> Model<T> {
    /// Canonical JSON: reals are shortest round-trip decimal strings, so a
    /// save/load cycle is bit-exact and re-saving yields identical bytes.
    pub fn to_json_string(&self) -> Result<String> {
        let body = match self {
            Model::Linear(m) => Body::Linear(LinearFile::from_model(m)),
            Model::Mlp(m) => Body::Mlp(MlpFile {
                hidden_activation: m.hidden_activation(),
                layers: m
                    .layers()
                    .iter()
                    .map(|l| LayerFile {
                        inputs: l.inputs(),
                        outputs: l.outputs(),
                        weights: strings(l.weights.iter()),
                        bias: strings(l.bias.iter()),
                    })
                    .collect(),
            }),
            Model::OneVsAll(m) => Body::OneVsAll {
                heads: m.heads().iter().map(LinearFile::from_model).collect(),
            },
        };
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            scalar: T::NAME.to_string(),
            body,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        // Decimal strings written for one precision do not reproduce the
        // same values when parsed at another.
        if file.scalar != T::NAME {
            return Err(Error::Format(format!("model was saved as {}, not {}", file.scalar, T::NAME)));
        }
        match file.body {
            Body::Linear(l) => Ok(Model::Linear(l.into_model()?)),
            Body::OneVsAll { heads } => {
                let heads = heads.into_iter().map(LinearFile::into_model).collect::<Result<Vec<_>>>()?;
                Ok(Model::OneVsAll(OneVsAllModel::new(heads)?))
            }
            Body::Mlp(m) => {
                let layers = m
                    .layers
                    .into_iter()
                    .map(|l| {
                        let weights = Array2::from_shape_vec((l.outputs, l.inputs), parse_reals::<T>(&l.weights)?)
                            .map_err(|e| Error::Format(e.to_string()))?;
                        Ok(Dense {
                            weights,
                            bias: Array1::from(parse_reals::<T>(&l.bias)?),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Mlp(MlpModel::new(layers, m.hidden_activation)?))
            }
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}
