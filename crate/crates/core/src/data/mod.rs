//! Datasets: dense feature matrices with label mapping, one-hot encoding
//! metadata and a seeded 70/30 train/test split.

mod csv_loader;
mod synthetic;
mod transform;

pub use csv_loader::{load_csv, ColumnKind, ColumnSpec, Preprocess, Schema};
pub use synthetic::{generate_blobs, generate_synthetic, BlobSpec, SyntheticSpec};
pub use transform::{translate_features, FeatureStrengths};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Fraction of examples assigned to the training split.
pub const TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelKind {
    /// Labels are −1 / +1.
    Binary,
    /// Labels are class indices `0..k`.
    MultiClass(usize),
}

/// Where an original column lives in the exploded feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Span {
    Numeric { position: usize },
    Categorical { start: usize, categories: Vec<String> },
}

impl Span {
    pub fn positions(&self) -> std::ops::Range<usize> {
        match self {
            Span::Numeric { position } => *position..*position + 1,
            Span::Categorical { start, categories } => *start..*start + categories.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnEncoding {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Seeded shuffle; the first `round(0.7 n)` shuffled indices form the
    /// training split. Both index lists are returned in ascending order.
    pub fn seeded(n: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        let n_train = ((n as f64) * TRAIN_FRACTION).round() as usize;
        let n_train = n_train.clamp(1.min(n), n);
        let mut train = idx[..n_train].to_vec();
        let mut test = idx[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Split { train, test }
    }

    pub fn indices(&self, which: SplitKind) -> &[usize] {
        match which {
            SplitKind::Train => &self.train,
            SplitKind::Test => &self.test,
        }
    }

    /// Order-sensitive FNV-1a fingerprint of the test indices.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for &i in self.train.iter().chain(&[usize::MAX]).chain(&self.test) {
            for b in (i as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

/// Immutable labeled dataset.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    features: Array2<T>,
    labels: Vec<i32>,
    label_kind: LabelKind,
    label_map: Vec<(String, i32)>,
    feature_names: Vec<String>,
    encoding_map: Vec<ColumnEncoding>,
    split: Split,
    split_seed: u64,
    shift: Option<Array1<T>>,
    image_shape: Option<(usize, usize)>,
}

/// Everything needed to build a [`Dataset`]; validated by [`Dataset::new`].
#[derive(Debug, Clone)]
pub struct DatasetParts<T> {
    pub features: Array2<T>,
    pub labels: Vec<i32>,
    pub label_kind: LabelKind,
    pub label_map: Vec<(String, i32)>,
    pub feature_names: Vec<String>,
    pub encoding_map: Vec<ColumnEncoding>,
    pub split: Split,
    pub split_seed: u64,
    pub shift: Option<Array1<T>>,
    pub image_shape: Option<(usize, usize)>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(parts: DatasetParts<T>) -> Result<Self> {
        let (n, d) = parts.features.dim();
        if n == 0 || d == 0 {
            return Err(Error::Empty("dataset needs at least one example and one feature"));
        }
        if parts.labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: parts.labels.len(),
            });
        }
        if parts.feature_names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: parts.feature_names.len(),
            });
        }
        match parts.label_kind {
            LabelKind::Binary => {
                if let Some(bad) = parts.labels.iter().find(|&&y| y != 1 && y != -1) {
                    return Err(Error::Schema(format!("binary label {bad} outside {{-1, +1}}")));
                }
            }
            LabelKind::MultiClass(k) => {
                if let Some(bad) = parts.labels.iter().find(|&&y| y < 0 || y as usize >= k) {
                    return Err(Error::Schema(format!("class index {bad} outside 0..{k}")));
                }
            }
        }
        let mut covered = vec![false; d];
        for col in &parts.encoding_map {
            for p in col.span.positions() {
                if p >= d || covered[p] {
                    return Err(Error::Schema(format!(
                        "encoding of `{}` overlaps or exceeds the feature range",
                        col.name
                    )));
                }
                covered[p] = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::Schema("encoding map does not cover every feature".into()));
        }
        if let Some(s) = &parts.shift {
            if s.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: s.len() });
            }
        }
        if parts.split.train.iter().chain(&parts.split.test).any(|&i| i >= n)
            || parts.split.train.len() + parts.split.test.len() != n
        {
            return Err(Error::Schema("split does not partition the examples".into()));
        }
        if let Some((h, w)) = parts.image_shape {
            if h * w != d {
                return Err(Error::DimensionMismatch { expected: d, got: h * w });
            }
        }
        let ds = Dataset {
            features: parts.features,
            labels: parts.labels,
            label_kind: parts.label_kind,
            label_map: parts.label_map,
            feature_names: parts.feature_names,
            encoding_map: parts.encoding_map,
            split: parts.split,
            split_seed: parts.split_seed,
            shift: parts.shift,
            image_shape: parts.image_shape,
        };
        ds.check_one_hot()?;
        Ok(ds)
    }

    fn check_one_hot(&self) -> Result<()> {
        let half = T::lit(0.5);
        for col in &self.encoding_map {
            if let Span::Categorical { start, categories } = &col.span {
                for (r, row) in self.features.outer_iter().enumerate() {
                    let mut ones = 0;
                    for p in *start..*start + categories.len() {
                        let v = self.raw_value(row, p);
                        if (v - T::one()).abs() < half {
                            ones += 1;
                        } else if v.abs() >= half {
                            ones += 2;
                        }
                    }
                    if ones != 1 {
                        return Err(Error::Schema(format!(
                            "row {r}: one-hot group `{}` does not hold exactly one 1",
                            col.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn raw_value(&self, row: ArrayView1<'_, T>, p: usize) -> T {
        match &self.shift {
            Some(s) => row[p] + s[p],
            None => row[p],
        }
    }

    /// Rebuilds a dataset from `self`, replacing the feature matrix.
    pub(crate) fn with_features(&self, features: Array2<T>, shift: Option<Array1<T>>) -> Result<Self> {
        let mut parts = self.to_parts();
        parts.features = features;
        parts.shift = shift;
        Dataset::new(parts)
    }

    pub fn to_parts(&self) -> DatasetParts<T> {
        DatasetParts {
            features: self.features.clone(),
            labels: self.labels.clone(),
            label_kind: self.label_kind,
            label_map: self.label_map.clone(),
            feature_names: self.feature_names.clone(),
            encoding_map: self.encoding_map.clone(),
            split: self.split.clone(),
            split_seed: self.split_seed,
            shift: self.shift.clone(),
            image_shape: self.image_shape,
        }
    }

    pub fn n_examples(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> i32 {
        self.labels[i]
    }

    pub fn label_kind(&self) -> LabelKind {
        self.label_kind
    }

    pub fn label_map(&self) -> &[(String, i32)] {
        &self.label_map
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn encoding_map(&self) -> &[ColumnEncoding] {
        &self.encoding_map
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed
    }

    pub fn indices(&self, which: SplitKind) -> &[usize] {
        self.split.indices(which)
    }

    /// Offset subtracted by feature translation, if any.
    pub fn shift(&self) -> Option<&Array1<T>> {
        self.shift.as_ref()
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    pub fn is_binary(&self) -> bool {
        self.label_kind == LabelKind::Binary
    }

    /// Signed label as a scalar (binary datasets only).
    pub fn signed_label(&self, i: usize) -> T {
        T::lit(self.labels[i] as f64)
    }

    /// Recovers the categorical value of each column for one row; numeric
    /// columns yield `None`.
    pub fn decode_row(&self, i: usize) -> Vec<Option<String>> {
        let row = self.features.row(i);
        self.encoding_map
            .iter()
            .map(|col| match &col.span {
                Span::Numeric { .. } => None,
                Span::Categorical { start, categories } => categories
                    .iter()
                    .enumerate()
                    .find(|(j, _)| self.raw_value(row, start + j) > T::lit(0.5))
                    .map(|(_, c)| c.clone()),
            })
            .collect()
    }

    /// Restriction to a subset of rows, re-split as all-train. Used by the
    /// one-vs-all trainer and tests.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut features = Array2::zeros((rows.len(), d));
        for (k, &i) in rows.iter().enumerate() {
            features.row_mut(k).assign(&self.features.row(i));
        }
        let mut parts = self.to_parts();
        parts.features = features;
        parts.labels = rows.iter().map(|&i| self.labels[i]).collect();
        parts.split = Split {
            train: (0..rows.len()).collect(),
            test: Vec::new(),
        };
        Dataset::new(parts)
    }

    /// Same examples with a relabeling; used to build one-vs-all heads.
    pub fn relabel(&self, labels: Vec<i32>, kind: LabelKind, label_map: Vec<(String, i32)>) -> Result<Self> {
        let mut parts = self.to_parts();
        parts.labels = labels;
        parts.label_kind = kind;
        parts.label_map = label_map;
        Dataset::new(parts)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = DatasetFile::from_dataset(self);
        let text = serde_json::to_string(&file)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: DatasetFile = serde_json::from_str(&text)?;
        file.into_dataset()
    }
}

/// Versioned JSON sidecar. Reals are written as decimal strings so that a
/// save/load cycle reproduces the matrix bit for bit.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetFile {
    format_version: u32,
    scalar: String,
    n_examples: usize,
    dim: usize,
    features: Vec<String>,
    labels: Vec<i32>,
    label_kind: LabelKind,
    label_map: Vec<(String, i32)>,
    feature_names: Vec<String>,
    encoding_map: Vec<ColumnEncoding>,
    split: Split,
    split_seed: u64,
    shift: Option<Vec<String>>,
    image_shape: Option<(usize, usize)>,
}

const DATASET_FORMAT_VERSION: u32 = 1;

impl DatasetFile {
    fn from_dataset<T: Scalar>(ds: &Dataset<T>) -> Self {
        DatasetFile {
            format_version: DATASET_FORMAT_VERSION,
            scalar: T::NAME.to_string(),
            n_examples: ds.n_examples(),
            dim: ds.dim(),
            features: ds.features.iter().map(|v| v.to_string()).collect(),
            labels: ds.labels.clone(),
            label_kind: ds.label_kind,
            label_map: ds.label_map.clone(),
            feature_names: ds.feature_names.clone(),
            encoding_map: ds.encoding_map.clone(),
            split: ds.split.clone(),
            split_seed: ds.split_seed,
            shift: ds.shift.as_ref().map(|s| s.iter().map(|v| v.to_string()).collect()),
            image_shape: ds.image_shape,
        }
    }

    fn into_dataset<T: Scalar>(self) -> Result<Dataset<T>> {
        if self.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset format version {}",
                self.format_version
            )));
        }
        let values = parse_reals::<T>(&self.features)?;
        let features = Array2::from_shape_vec((self.n_examples, self.dim), values)
            .map_err(|e| Error::Format(e.to_string()))?;
        let shift = match self.shift {
            Some(s) => Some(Array1::from(parse_reals::<T>(&s)?)),
            None => None,
        };
        Dataset::new(DatasetParts {
            features,
            labels: self.labels,
            label_kind: self.label_kind,
            label_map: self.label_map,
            feature_names: self.feature_names,
            encoding_map: self.encoding_map,
            split: self.split,
            split_seed: self.split_seed,
            shift,
            image_shape: self.image_shape,
        })
    }
}

pub(crate) fn parse_reals<T: Scalar>(values: &[String]) -> Result<Vec<T>> {
    values
        .iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Format(format!("`{s}` is not a real number")))
        })
        .collect()
}

/// All-numeric encoding map for `d` features named `x1..xd`.
pub(crate) fn numeric_encoding(d: usize) -> (Vec<String>, Vec<ColumnEncoding>) {
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let enc = names
        .iter()
        .enumerate()
        .map(|(i, n)| ColumnEncoding {
            name: n.clone(),
            span: Span::Numeric { position: i },
        })
        .collect();
    (names, enc)
}
