use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// `±sd` with equal probability; gives margins with finite support.
    Rademacher,
}

/// Shared latent factor added to a group of features, making them
/// dependent on each other given `y` while leaving the rest untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedGroup {
    pub features: Vec<usize>,
    /// Correlation of the group's noise terms, in `[0, 1)`.
    pub rho: f64,
}

/// Draws `(x, y)` with `E(x_i | y) = a_i y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSampler {
    a: Vec<f64>,
    noise_sd: Vec<f64>,
    noise: NoiseKind,
    class_balance: f64,
    correlated: Option<CorrelatedGroup>,
}

impl FeatureSampler {
    pub fn new(a: Vec<f64>, noise_sd: Vec<f64>, noise: NoiseKind, class_balance: f64) -> Result<Self> {
        if a.is_empty() || a.len() != noise_sd.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: noise_sd.len(),
            });
        }
        if noise_sd.iter().any(|&s| !(s > 0.0 && s.is_finite())) || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("strengths must be finite and noise_sd positive".into()));
        }
        if !(class_balance > 0.0 && class_balance < 1.0) {
            return Err(Error::Config("class_balance outside (0, 1)".into()));
        }
        Ok(FeatureSampler {
            a,
            noise_sd,
            noise,
            class_balance,
            correlated: None,
        })
    }

    /// Couples the noise of `group` through a shared factor. Features in
    /// the group stay conditionally independent of those outside it.
    pub fn with_correlated(mut self, group: CorrelatedGroup) -> Result<Self> {
        if group.features.iter().any(|&i| i >= self.a.len()) || !(0.0..1.0).contains(&group.rho) {
            return Err(Error::Config("invalid correlated group".into()));
        }
        self.correlated = Some(group);
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn noise_sd(&self) -> &[f64] {
        &self.noise_sd
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }

    pub fn class_balance(&self) -> f64 {
        self.class_balance
    }

    fn unit_noise<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.noise {
            NoiseKind::Gaussian => rng.sample(StandardNormal),
            NoiseKind::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Fills `x` and returns `y`.
    pub fn sample<R: Rng>(&self, rng: &mut R, x: &mut [f64]) -> f64 {
        let y = if rng.gen::<f64>() < self.class_balance { 1.0 } else { -1.0 };
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = self.a[i] * y + self.noise_sd[i] * self.unit_noise(rng);
        }
        if let Some(g) = &self.correlated {
            let shared: f64 = rng.sample(StandardNormal);
            let keep = (1.0 - g.rho * g.rho).sqrt();
            for &i in &g.features {
                let own = (x[i] - self.a[i] * y) / self.noise_sd[i];
                x[i] = self.a[i] * y + self.noise_sd[i] * (keep * own + g.rho * shared);
            }
        }
        y
    }

    /// Every `(y, x)` the sampler can produce, with probabilities. Only for
    /// Rademacher noise without a correlated group, and small `d`.
    pub fn support(&self) -> Option<Vec<(f64, f64, Vec<f64>)>> {
        if self.noise != NoiseKind::Rademacher || self.correlated.is_some() || self.d() > 16 {
            return None;
        }
        let d = self.d();
        let mut out = Vec::with_capacity(2 << d);
        for (y, py) in [(1.0, self.class_balance), (-1.0, 1.0 - self.class_balance)] {
            for mask in 0u32..(1 << d) {
                let x = (0..d)
                    .map(|i| {
                        let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                        self.a[i] * y + self.noise_sd[i] * s
                    })
                    .collect();
                out.push((y, py / (1u64 << d) as f64, x));
            }
        }
        Some(out)
    }
}
