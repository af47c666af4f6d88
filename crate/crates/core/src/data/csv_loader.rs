use super::{ColumnEncoding, Dataset, DatasetParts, LabelKind, Span, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::Array2;
use serde::Deserialize;
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    Ignore,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Declared category order. When absent, categories are taken in
    /// first-seen order over the training rows.
    #[serde(default)]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocess {
    /// Numeric columns become `ln(x + log_offset)`.
    #[serde(default)]
    pub log_offset: Option<f64>,
    /// Standardize numeric columns with training-split mean and sd.
    #[serde(default)]
    pub standardize: bool,
}

/// Column typing for a CSV file, normally read from TOML.
#[derive(Debug, Clone, Deserialize)]
pub struct Schema {
    /// Default label column.
    #[serde(default)]
    pub label: Option<String>,
    /// Raw label value mapped to +1 in a binary problem.
    #[serde(default)]
    pub positive: Option<String>,
    /// Treat the label as multi-class (k ≥ 3).
    #[serde(default)]
    pub multiclass: bool,
    #[serde(default)]
    pub delimiter: Option<char>,
    #[serde(default)]
    pub preprocess: Preprocess,
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// Reads a headed CSV file into a [`Dataset`].
///
/// Row indices in errors count data rows from 0, excluding the header. The
/// split is drawn first so that category discovery and preprocessing
/// statistics only see training rows.
pub fn load_csv<T: Scalar>(path: &Path, schema: &Schema, label_column: &str, split_seed: u64) -> Result<Dataset<T>> {
    let delimiter = schema.delimiter.unwrap_or(',');
    if !delimiter.is_ascii() {
        return Err(Error::Schema(format!("delimiter `{delimiter}` is not ASCII")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Csv {
                row: 0,
                message: format!("{other:?}"),
            },
        })?;

    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv { row: 0, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let specs = align_schema(schema, &header, label_column)?;

    let mut raw: Vec<Vec<String>> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv { row, message: e.to_string() })?;
        if rec.len() != header.len() {
            return Err(Error::Csv {
                row,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        raw.push(rec.iter().map(str::to_string).collect());
    }
    if raw.is_empty() {
        return Err(Error::Empty("CSV file has no data rows"));
    }
    let n = raw.len();
    let split = Split::seeded(n, split_seed);
    let label_idx = header.iter().position(|h| h == label_column).expect("checked by align_schema");

    let (labels, label_kind, label_map) = map_labels(&raw, label_idx, schema, &split)?;

    // Resolve category lists and feature layout.
    let mut encoding_map = Vec::new();
    let mut feature_names = Vec::new();
    let mut plan: Vec<(usize, Option<HashMap<String, usize>>)> = Vec::new();
    for (col, spec) in specs.iter().enumerate() {
        match spec.kind {
            ColumnKind::Label | ColumnKind::Ignore => {}
            ColumnKind::Numeric => {
                encoding_map.push(ColumnEncoding {
                    name: spec.name.clone(),
                    span: Span::Numeric {
                        position: feature_names.len(),
                    },
                });
                plan.push((col, None));
                feature_names.push(spec.name.clone());
            }
            ColumnKind::Categorical => {
                let categories = match &spec.categories {
                    Some(c) => c.clone(),
                    None => {
                        let mut seen: Vec<String> = Vec::new();
                        for &i in &split.train {
                            if !seen.contains(&raw[i][col]) {
                                seen.push(raw[i][col].clone());
                            }
                        }
                        seen
                    }
                };
                if categories.is_empty() {
                    return Err(Error::Schema(format!("column `{}` has no categories", spec.name)));
                }
                let lookup: HashMap<String, usize> =
                    categories.iter().enumerate().map(|(j, c)| (c.clone(), j)).collect();
                if lookup.len() != categories.len() {
                    return Err(Error::Schema(format!("column `{}` repeats a category", spec.name)));
                }
                encoding_map.push(ColumnEncoding {
                    name: spec.name.clone(),
                    span: Span::Categorical {
                        start: feature_names.len(),
                        categories: categories.clone(),
                    },
                });
                feature_names.extend(categories.iter().map(|c| format!("{}={}", spec.name, c)));
                plan.push((col, Some(lookup)));
            }
        }
    }
    let d = feature_names.len();
    if d == 0 {
        return Err(Error::Schema("schema declares no feature columns".into()));
    }

    let mut features = Array2::<T>::zeros((n, d));
    let mut numeric_positions = Vec::new();
    for ((col, lookup), enc) in plan.iter().zip(&encoding_map) {
        let name = &specs[*col].name;
        match (lookup, &enc.span) {
            (None, Span::Numeric { position }) => {
                numeric_positions.push(*position);
                for (row, rec) in raw.iter().enumerate() {
                    let value = &rec[*col];
                    let v: f64 = value.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                        Error::NotNumeric {
                            row,
                            column: name.clone(),
                            value: value.clone(),
                        }
                    })?;
                    features[[row, *position]] = T::lit(v);
                }
            }
            (Some(lookup), Span::Categorical { start, .. }) => {
                for (row, rec) in raw.iter().enumerate() {
                    let j = lookup.get(&rec[*col]).ok_or_else(|| Error::UnknownCategory {
                        row,
                        column: name.clone(),
                        value: rec[*col].clone(),
                    })?;
                    features[[row, start + j]] = T::one();
                }
            }
            _ => unreachable!("plan and encoding map are built together"),
        }
    }

    preprocess(&mut features, &numeric_positions, &schema.preprocess, &split.train)?;

    Dataset::new(DatasetParts {
        features,
        labels,
        label_kind,
        label_map,
        feature_names,
        encoding_map,
        split,
        split_seed,
        shift: None,
        image_shape: None,
    })
}

/// Orders schema entries by header position and checks both name sets agree.
fn align_schema<'a>(schema: &'a Schema, header: &[String], label_column: &str) -> Result<Vec<ColumnSpec>> {
    let by_name: HashMap<&str, &'a ColumnSpec> = schema.columns.iter().map(|c| (c.name.as_str(), c)).collect();
    if by_name.len() != schema.columns.len() {
        return Err(Error::Schema("a column is declared twice".into()));
    }
    if !header.iter().any(|h| h == label_column) {
        return Err(Error::Schema(format!("label column `{label_column}` not in header")));
    }
    let mut out = Vec::with_capacity(header.len());
    for h in header {
        let spec = by_name
            .get(h.as_str())
            .ok_or_else(|| Error::Schema(format!("column `{h}` is not described by the schema")))?;
        let mut spec = (*spec).clone();
        if h == label_column {
            spec.kind = ColumnKind::Label;
        } else if spec.kind == ColumnKind::Label {
            spec.kind = ColumnKind::Ignore;
        }
        out.push(spec);
    }
    if let Some(missing) = schema.columns.iter().find(|c| !header.contains(&c.name)) {
        return Err(Error::Schema(format!("schema column `{}` missing from file", missing.name)));
    }
    Ok(out)
}

type LabelMapping = (Vec<i32>, LabelKind, Vec<(String, i32)>);

fn map_labels(raw: &[Vec<String>], col: usize, schema: &Schema, split: &Split) -> Result<LabelMapping> {
    let mut distinct: Vec<String> = raw.iter().map(|r| r[col].clone()).collect();
    distinct.sort();
    distinct.dedup();

    let map: Vec<(String, i32)> = if schema.multiclass {
        if distinct.len() < 3 {
            return Err(Error::LabelCount {
                expected: "at least 3".into(),
                found: distinct.len(),
            });
        }
        // Class indices follow first appearance, training rows before test rows.
        let mut order: Vec<String> = Vec::new();
        for &i in split.train.iter().chain(&split.test) {
            if !order.contains(&raw[i][col]) {
                order.push(raw[i][col].clone());
            }
        }
        order.into_iter().enumerate().map(|(k, v)| (v, k as i32)).collect()
    } else {
        if distinct.len() != 2 {
            return Err(Error::LabelCount {
                expected: "2".into(),
                found: distinct.len(),
            });
        }
        let positive = match &schema.positive {
            Some(p) if distinct.contains(p) => p.clone(),
            Some(p) => return Err(Error::Schema(format!("positive label `{p}` never occurs"))),
            None => distinct[1].clone(),
        };
        distinct
            .into_iter()
            .map(|v| {
                let y = if v == positive { 1 } else { -1 };
                (v, y)
            })
            .collect()
    };
    let lookup: HashMap<&str, i32> = map.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let labels = raw.iter().map(|r| lookup[r[col].as_str()]).collect();
    let kind = if schema.multiclass {
        LabelKind::MultiClass(map.len())
    } else {
        LabelKind::Binary
    };
    Ok((labels, kind, map))
}

fn preprocess<T: Scalar>(features: &mut Array2<T>, positions: &[usize], cfg: &Preprocess, train: &[usize]) -> Result<()> {
    if let Some(c) = cfg.log_offset {
        let c = T::lit(c);
        for &p in positions {
            for (row, v) in features.column_mut(p).iter_mut().enumerate() {
                if *v + c <= T::zero() {
                    return Err(Error::Schema(format!(
                        "row {row}: log transform undefined for value {v} in feature {p}"
                    )));
                }
                *v = (*v + c).ln();
            }
        }
    }
    if cfg.standardize && !train.is_empty() {
        let m = T::lit(train.len() as f64);
        for &p in positions {
            let mut col = features.column_mut(p);
            let mean = train.iter().map(|&i| col[i]).sum::<T>() / m;
            let var = train.iter().map(|&i| (col[i] - mean).powi(2)).sum::<T>() / m;
            let sd = var.sqrt();
            let scale = if sd > T::zero() { sd } else { T::one() };
            col.mapv_inplace(|v| (v - mean) / scale);
        }
    }
    Ok(())
}
