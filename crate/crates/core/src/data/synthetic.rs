use super::{numeric_encoding, Dataset, DatasetParts, LabelKind, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Class-conditional Gaussian features with `E(x_i | y) = a_i y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    a: Vec<f64>,
    noise_sd: Vec<f64>,
    class_balance: f64,
    seed: u64,
}

impl SyntheticSpec {
    pub fn new(a: Vec<f64>, noise_sd: Vec<f64>, class_balance: f64, seed: u64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Empty("synthetic spec needs d ≥ 1"));
        }
        if a.len() != noise_sd.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: noise_sd.len(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("directed strengths must be finite".into()));
        }
        if noise_sd.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config("noise_sd must be positive".into()));
        }
        if !(class_balance > 0.0 && class_balance < 1.0) {
            return Err(Error::Config(format!("class_balance {class_balance} outside (0, 1)")));
        }
        Ok(SyntheticSpec {
            a,
            noise_sd,
            class_balance,
            seed,
        })
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

    pub fn class_balance(&self) -> f64 {
        self.class_balance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws `n` examples; the same spec always yields the same dataset.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec, n: usize) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::Empty("generate_synthetic needs n ≥ 1"));
    }
    let d = spec.d();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Array2::<T>::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for mut row in features.outer_iter_mut() {
        let y = if rng.gen::<f64>() < spec.class_balance { 1 } else { -1 };
        for (i, v) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = T::lit(spec.a[i] * y as f64 + spec.noise_sd[i] * z);
        }
        labels.push(y);
    }
    let (feature_names, encoding_map) = numeric_encoding(d);
    Dataset::new(DatasetParts {
        features,
        labels,
        label_kind: LabelKind::Binary,
        label_map: vec![("-1".into(), -1), ("1".into(), 1)],
        feature_names,
        encoding_map,
        split: Split::seeded(n, spec.seed),
        split_seed: spec.seed,
        shift: None,
        image_shape: None,
    })
}

/// Small grayscale images holding one Gaussian blob. Class +1 places the
/// blob in the upper part of the image and class −1 in the lower part; the
/// horizontal position is uniform, so informative pixels form two bands.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub height: usize,
    pub width: usize,
    pub sigma: f64,
    pub amplitude: f64,
    pub noise_sd: f64,
    pub class_balance: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            height: 8,
            width: 8,
            sigma: 0.7,
            amplitude: 1.0,
            noise_sd: 0.1,
            class_balance: 0.5,
            seed: 0,
        }
    }
}

/// Pixel values are clipped to `[0, 1]`.
pub fn generate_blobs<T: Scalar>(spec: &BlobSpec, n: usize) -> Result<Dataset<T>> {
    if n == 0 || spec.height < 2 || spec.width == 0 {
        return Err(Error::Empty("blob images need n ≥ 1 and at least 2×1 pixels"));
    }
    if !(spec.sigma > 0.0) || spec.noise_sd < 0.0 {
        return Err(Error::Config("blob sigma must be positive and noise_sd non-negative".into()));
    }
    if !(spec.class_balance > 0.0 && spec.class_balance < 1.0) {
        return Err(Error::Config("class_balance outside (0, 1)".into()));
    }
    let (h, w) = (spec.height, spec.width);
    let hf = h as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Array2::<T>::zeros((n, h * w));
    let mut labels = Vec::with_capacity(n);
    for mut row in features.outer_iter_mut() {
        let y = if rng.gen::<f64>() < spec.class_balance { 1 } else { -1 };
        let (lo, hi) = if y == 1 {
            (0.0625 * hf, 0.375 * hf)
        } else {
            (0.5 * hf, 0.8125 * hf)
        };
        let r0 = rng.gen_range(lo..=hi);
        let c0 = rng.gen_range(0.0..=(w - 1) as f64);
        for r in 0..h {
            for c in 0..w {
                let d2 = (r as f64 - r0).powi(2) + (c as f64 - c0).powi(2);
                let noise: f64 = rng.sample(StandardNormal);
                let v = spec.amplitude * (-d2 / (2.0 * spec.sigma * spec.sigma)).exp() + spec.noise_sd * noise;
                row[r * w + c] = T::lit(v.clamp(0.0, 1.0));
            }
        }
        labels.push(y);
    }
    let (_, encoding_map) = numeric_encoding(h * w);
    let feature_names = (0..h * w).map(|p| format!("px_{}_{}", p / w, p % w)).collect();
    Dataset::new(DatasetParts {
        features,
        labels,
        label_kind: LabelKind::Binary,
        label_map: vec![("-1".into(), -1), ("1".into(), 1)],
        feature_names,
        encoding_map,
        split: Split::seeded(n, spec.seed),
        split_seed: spec.seed,
        shift: None,
        image_shape: Some((h, w)),
    })
}
