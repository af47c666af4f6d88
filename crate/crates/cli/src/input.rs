//! Shared argument groups and file helpers.

use anyhow::{anyhow, Context, Result};
use attrsparse::data::{load_csv, Dataset, Schema};
use attrsparse::Scalar;
use clap::{Args, ValueEnum};
use std::path::{Path, PathBuf};

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV file described by a schema, or a dataset JSON written by `synth`.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema TOML. Defaults to `<name>.schema.toml` next to the CSV.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Label column, if the schema does not name one.
    #[arg(long)]
    pub label: Option<String>,
    /// Seed of the 70/30 train/test split (CSV input only; dataset JSON
    /// files carry their own split).
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

impl DataArgs {
    pub fn is_json(&self) -> bool {
        self.data.extension().is_some_and(|e| e == "json")
    }

    /// File stem, used as the dataset name in reports.
    pub fn name(&self) -> String {
        self.data
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }

    pub fn load<T: Scalar>(&self) -> Result<Dataset<T>> {
        if self.is_json() {
            return Dataset::load_json(&self.data).with_context(|| format!("loading {}", self.data.display()));
        }
        let schema_path = self.schema.clone().unwrap_or_else(|| self.data.with_extension("schema.toml"));
        let schema = Schema::load(&schema_path).with_context(|| format!("loading schema {}", schema_path.display()))?;
        let label = self
            .label
            .clone()
            .or_else(|| schema.label.clone())
            .ok_or_else(|| anyhow!("the schema names no label column; pass --label"))?;
        load_csv(&self.data, &schema, &label, self.split_seed).with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Reads a TOML or (by extension) JSON file into a JSON value.
pub fn read_config(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        serde_json::to_value(table)?
    };
    if !value.is_object() {
        return Err(anyhow!("{}: expected a table at the top level", path.display()));
    }
    Ok(value)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

pub fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| anyhow!("`{t}` is not a number")))
        .collect()
}
