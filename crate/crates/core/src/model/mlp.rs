use super::{check_finite, Activation, Scorer};
use crate::error::{check_dim, Error, Result};
use crate::loss::LossSpec;
use crate::scalar::{sigmoid, softplus, Scalar};
use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    #[default]
    Softplus,
    Tanh,
    /// Not differentiable at 0; excluded from gradient checks.
    Relu,
}

impl HiddenActivation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            HiddenActivation::Softplus => softplus(z),
            HiddenActivation::Tanh => z.tanh(),
            HiddenActivation::Relu => z.max(T::zero()),
        }
    }

    #[inline]
    fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            HiddenActivation::Softplus => sigmoid(z),
            HiddenActivation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
            HiddenActivation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Fully connected layer; `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Multilayer perceptron with smooth hidden activations and a single
/// sigmoid output unit. With no hidden layers it is a biased logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    layers: Vec<Dense<T>>,
    hidden: HiddenActivation,
}

struct Cache<T> {
    /// Input followed by each hidden layer's post-activation.
    activations: Vec<Array1<T>>,
    /// Hidden pre-activations.
    pre: Vec<Array1<T>>,
    logit: T,
}

impl<T: Scalar> MlpModel<T> {
    pub fn new(layers: Vec<Dense<T>>, hidden: HiddenActivation) -> Result<Self> {
        let last = layers.last().ok_or(Error::Empty("an MLP needs an output layer"))?;
        if last.outputs() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: last.outputs(),
            });
        }
        for l in &layers {
            check_dim(l.outputs(), l.bias.len())?;
            check_finite(l.weights.iter().chain(l.bias.iter()), "MLP parameters")?;
        }
        for pair in layers.windows(2) {
            check_dim(pair[0].outputs(), pair[1].inputs())?;
        }
        Ok(MlpModel { layers, hidden })
    }

    /// Seeded initialization: weights `N(0, 1/fan_in)`, zero biases.
    /// `sizes` lists the input width and every hidden width; the single
    /// output unit is appended.
    pub fn random(sizes: &[usize], hidden: HiddenActivation, seed: u64) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config("MLP layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths: Vec<usize> = sizes.iter().copied().chain(std::iter::once(1)).collect();
        let layers = widths
            .windows(2)
            .map(|p| {
                let sd = 1.0 / (p[0] as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((p[1], p[0]), || {
                    T::lit(sd * rng.sample::<f64, _>(StandardNormal))
                });
                Dense {
                    weights,
                    bias: Array1::zeros(p[1]),
                }
            })
            .collect();
        MlpModel::new(layers, hidden)
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden
    }

    /// Widths from input to output, e.g. `[64, 16, 1]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs())
            .chain(self.layers.iter().map(Dense::outputs))
            .collect()
    }

    /// Zero-valued parameter set of matching shape.
    pub fn zeros_like(&self) -> Vec<Dense<T>> {
        self.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect()
    }

    fn forward(&self, x: ArrayView1<'_, T>) -> Result<Cache<T>> {
        check_dim(self.layers[0].inputs(), x.len())?;
        let n_hidden = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(n_hidden + 1);
        let mut pre = Vec::with_capacity(n_hidden);
        activations.push(x.to_owned());
        for layer in &self.layers[..n_hidden] {
            let z = layer.weights.dot(activations.last().expect("input pushed")) + &layer.bias;
            activations.push(z.mapv(|v| self.hidden.apply(v)));
            pre.push(z);
        }
        let out = &self.layers[n_hidden];
        let logit = out.weights.row(0).dot(activations.last().expect("non-empty")) + out.bias[0];
        Ok(Cache {
            activations,
            pre,
            logit,
        })
    }

    /// Reverse pass from `d_logit = ∂ℒ/∂logit`. Parameter gradients are only
    /// materialized when requested.
    fn backward(&self, cache: &Cache<T>, d_logit: T, want_params: bool) -> (Option<Vec<Dense<T>>>, Array1<T>) {
        let n = self.layers.len();
        let mut grads = want_params.then(|| self.zeros_like());
        let mut delta = Array1::from_elem(1, d_logit);
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            if let Some(g) = grads.as_mut() {
                let a_prev = &cache.activations[l];
                for (o, &dv) in delta.iter().enumerate() {
                    g[l].weights.row_mut(o).scaled_add(dv, a_prev);
                }
                g[l].bias.assign(&delta);
            }
            let mut back = layer.weights.t().dot(&delta);
            if l > 0 {
                let z = &cache.pre[l - 1];
                back.zip_mut_with(z, |b, &zv| *b *= self.hidden.derivative(zv));
            }
            delta = back;
        }
        (grads, delta)
    }
}

impl<T: Scalar> Scorer<T> for MlpModel<T> {
    fn dim(&self) -> usize {
        self.layers[0].inputs()
    }

    fn logit(&self, x: ArrayView1<'_, T>) -> Result<T> {
        Ok(self.forward(x)?.logit)
    }

    fn logit_and_input_grad(&self, x: ArrayView1<'_, T>) -> Result<(T, Array1<T>)> {
        let cache = self.forward(x)?;
        let (_, gx) = self.backward(&cache, T::one(), false);
        Ok((cache.logit, gx))
    }

    fn output_activation(&self) -> Activation {
        Activation::Sigmoid
    }
}

/// Loss `g(−y·logit)` with its gradients in every parameter and in `x`.
pub fn mlp_loss_gradient<T: Scalar>(
    spec: LossSpec,
    model: &MlpModel<T>,
    x: ArrayView1<'_, T>,
    y: i32,
) -> Result<(T, Vec<Dense<T>>, Array1<T>)> {
    let cache = model.forward(x)?;
    let y = T::lit(y as f64);
    let z = -y * cache.logit;
    let d_logit = -y * spec.g_prime(z);
    let (grads, gx) = model.backward(&cache, d_logit, true);
    Ok((spec.g(z), grads.expect("requested"), gx))
}

impl<T: Scalar> MlpModel<T> {
    /// Loss gradient in the input only; cheaper than [`mlp_loss_gradient`].
    pub fn loss_input_gradient(&self, spec: LossSpec, x: ArrayView1<'_, T>, y: i32) -> Result<(T, Array1<T>)> {
        let cache = self.forward(x)?;
        let y = T::lit(y as f64);
        let z = -y * cache.logit;
        let (_, gx) = self.backward(&cache, -y * spec.g_prime(z), false);
        Ok((spec.g(z), gx))
    }
}
