//! Gini index of attribution magnitudes and sparseness-improvement metrics.

use crate::attribution::AttributionVector;
use crate::data::Split;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Gini index with a flag raised for the all-zero vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GiniValue<T> {
    pub value: T,
    pub degenerate: bool,
}

/// `G(v) = 1 − 2 Σ_k (v_(k)/‖v‖₁)((d − k + ½)/d)` over the ascending sort.
/// The zero vector maps to 0 with `degenerate` set.
pub fn gini<T: Scalar>(v: &[T]) -> Result<GiniValue<T>> {
    if v.is_empty() {
        return Err(Error::Empty("gini of an empty vector"));
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(**x >= T::zero())) {
        return Err(Error::NegativeEntry {
            index,
            value: value.to_f64_lossy(),
        });
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("entries are ordered"));
    Ok(gini_sorted(&sorted))
}

/// Gini of `|v|`, the form used for attribution vectors.
pub fn gini_abs<T: Scalar>(v: impl IntoIterator<Item = T>) -> Result<GiniValue<T>> {
    let abs: Vec<T> = v.into_iter().map(|x| x.abs()).collect();
    gini(&abs)
}

fn gini_sorted<T: Scalar>(sorted: &[T]) -> GiniValue<T> {
    let total: T = sorted.iter().copied().sum();
    if total == T::zero() {
        return GiniValue {
            value: T::zero(),
            degenerate: true,
        };
    }
    if sorted[0] == sorted[sorted.len() - 1] {
        // Perfect equality; the sum below may leave rounding residue.
        return GiniValue {
            value: T::zero(),
            degenerate: false,
        };
    }
    let d = T::lit(sorted.len() as f64);
    let half = T::lit(0.5);
    let weighted: T = sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| x * (d - T::lit((k + 1) as f64) + half))
        .sum();
    let g = T::one() - (weighted + weighted) / (total * d);
    GiniValue {
        value: g.max(T::zero()).min(T::one()),
        degenerate: false,
    }
}

/// Gini index of `|IG|`.
pub fn gini_of_attribution<T: Scalar>(attr: &AttributionVector<T>) -> Result<GiniValue<T>> {
    gini_abs(attr.values.iter().copied())
}

/// Per-example Gini values of one model's attributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiniReport {
    /// Regime tag, e.g. `n`, `a(0.1)`, `l(0.02)`.
    pub regime: String,
    pub per_example: Vec<f64>,
    pub mean: f64,
    /// Number of all-zero attribution vectors (counted as Gini 0).
    pub degenerate: usize,
    /// Accuracy of the attributed model on the same split, if known.
    pub accuracy: Option<f64>,
    pub split_fingerprint: u64,
    pub baseline_fingerprint: u64,
}

impl GiniReport {
    pub fn new<T: Scalar>(regime: impl Into<String>, attribs: &[AttributionVector<T>], split: &Split) -> Result<Self> {
        let first = attribs.first().ok_or(Error::Empty("no attributions"))?;
        let baseline_fingerprint = fingerprint_values(first.baseline.iter().copied());
        if attribs
            .iter()
            .any(|a| fingerprint_values(a.baseline.iter().copied()) != baseline_fingerprint)
        {
            return Err(Error::MismatchedSplits);
        }
        let mut per_example = Vec::with_capacity(attribs.len());
        let mut degenerate = 0;
        for a in attribs {
            let g = gini_of_attribution(a)?;
            degenerate += usize::from(g.degenerate);
            per_example.push(g.value.to_f64_lossy());
        }
        let mean = per_example.iter().sum::<f64>() / per_example.len() as f64;
        Ok(GiniReport {
            regime: regime.into(),
            per_example,
            mean,
            degenerate,
            accuracy: None,
            split_fingerprint: split.fingerprint(),
            baseline_fingerprint,
        })
    }

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = Some(accuracy);
        self
    }
}

fn fingerprint_values<T: Scalar>(values: impl Iterator<Item = T>) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in values {
        for b in v.to_f64_lossy().to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub regime: String,
    pub mean_gini: f64,
    /// Mean Gini improvement over the natural model.
    pub dg: f64,
    pub accuracy: Option<f64>,
    /// Natural accuracy minus this model's accuracy.
    pub accuracy_drop: Option<f64>,
    /// Paired per-example Gini differences against the natural model.
    pub per_example_dg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsenessComparison {
    pub natural: RegimeRow,
    pub adversarial: Vec<RegimeRow>,
    pub l1: Vec<RegimeRow>,
}

/// `dGᵃ = Ḡᵃ − Ḡⁿ` and `dGˡ = Ḡˡ − Ḡⁿ`, with accuracy drops. All reports
/// must come from the same split and baseline.
pub fn compare_regimes(
    natural: &GiniReport,
    adversarial: &[GiniReport],
    l1: &[GiniReport],
) -> Result<SparsenessComparison> {
    let row = |r: &GiniReport| -> Result<RegimeRow> {
        if r.split_fingerprint != natural.split_fingerprint
            || r.baseline_fingerprint != natural.baseline_fingerprint
            || r.per_example.len() != natural.per_example.len()
        {
            return Err(Error::MismatchedSplits);
        }
        let dg = r.mean - natural.mean;
        if !dg.is_finite() {
            return Err(Error::Format(format!("non-finite dG for {}", r.regime)));
        }
        Ok(RegimeRow {
            regime: r.regime.clone(),
            mean_gini: r.mean,
            dg,
            accuracy: r.accuracy,
            accuracy_drop: natural.accuracy.zip(r.accuracy).map(|(n, a)| n - a),
            per_example_dg: r
                .per_example
                .iter()
                .zip(&natural.per_example)
                .map(|(a, n)| a - n)
                .collect(),
        })
    };
    let mut natural_row = row(natural)?;
    natural_row.dg = 0.0;
    Ok(SparsenessComparison {
        natural: natural_row,
        adversarial: adversarial.iter().map(row).collect::<Result<_>>()?,
        l1: l1.iter().map(row).collect::<Result<_>>()?,
    })
}

impl SparsenessComparison {
    pub fn rows(&self) -> impl Iterator<Item = &RegimeRow> {
        std::iter::once(&self.natural).chain(&self.adversarial).chain(&self.l1)
    }

    /// Table with columns `dataset,attr,model,dG,AcDrop`; the drop is a
    /// percentage.
    pub fn to_table_csv(&self, dataset: &str, attr: &str) -> String {
        let mut out = String::from("dataset,attr,model,dG,AcDrop\n");
        for r in self.rows() {
            let drop = r.accuracy_drop.map(|d| format!("{:.2}", 100.0 * d)).unwrap_or_default();
            let _ = writeln!(out, "{dataset},{attr},{},{:.4},{drop}", r.regime, r.dg);
        }
        out
    }

    pub fn write_table_csv(&self, path: &Path, dataset: &str, attr: &str) -> Result<()> {
        std::fs::write(path, self.to_table_csv(dataset, attr)).map_err(|e| Error::io(path, e))
    }

    /// Long-format per-example dG values: `model,example,dG`.
    pub fn to_distribution_csv(&self) -> String {
        let mut out = String::from("model,example,dG\n");
        for r in self.adversarial.iter().chain(&self.l1) {
            for (i, v) in r.per_example_dg.iter().enumerate() {
                let _ = writeln!(out, "{},{i},{v}", r.regime);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(gini(&[0.0, 0.0, 0.0, 1.0]).unwrap().value, 0.75);
        assert_eq!(gini(&[2.0f64; 7]).unwrap().value, 0.0);
        let mut v = vec![0.0f64; 100];
        v[37] = 4.0;
        assert!((gini(&v).unwrap().value - 0.99).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_is_flagged() {
        let g = gini(&[0.0f64; 5]).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.degenerate);
    }

    fn report(tag: &str, ginis: &[f64], acc: f64, split: &Split) -> GiniReport {
        let attribs: Vec<AttributionVector<f64>> = ginis
            .iter()
            .map(|&g| {
                // Two-entry vector (1 - g, 1 + g) has Gini g / 2.
                let values = ndarray::array![1.0 - g, 1.0 + g];
                AttributionVector {
                    values,
                    baseline: ndarray::array![0.0, 0.0],
                    target: crate::attribution::Target::Output,
                    method: crate::attribution::Method::Closed,
                    completeness_residual: 0.0,
                    degenerate: false,
                    example: None,
                }
            })
            .collect();
        GiniReport::new(tag, &attribs, split).unwrap().with_accuracy(acc)
    }

    #[test]
    fn comparison_rows() {
        let split = Split::seeded(10, 0);
        let n = report("n", &[0.2, 0.4], 0.9, &split);
        let a = report("a(0.1)", &[0.6, 0.4], 0.88, &split);
        let cmp = compare_regimes(&n, &[a.clone(), n.clone()], &[]).unwrap();
        assert_eq!(cmp.natural.dg, 0.0);
        assert!((cmp.adversarial[0].dg - 0.1).abs() < 1e-12);
        assert!((cmp.adversarial[0].accuracy_drop.unwrap() - 0.02).abs() < 1e-12);
        assert_eq!(cmp.adversarial[1].dg, 0.0);
        let csv = cmp.to_table_csv("toy", "IG");
        assert!(csv.starts_with("dataset,attr,model,dG,AcDrop\ntoy,IG,n,0.0000,0.00\n"));
        let other = report("a", &[0.6, 0.4], 0.9, &Split::seeded(10, 1));
        assert!(matches!(compare_regimes(&n, &[other], &[]), Err(Error::MismatchedSplits)));
    }

    #[test]
    fn negative_entry_is_error() {
        assert!(matches!(gini(&[1.0, -0.5]), Err(Error::NegativeEntry { index: 1, .. })));
        assert!(gini(&[f64::NAN]).is_err());
        assert!(gini::<f64>(&[]).is_err());
    }
}
