use crate::input::{emit, parse_reals};
use anyhow::{anyhow, Context, Result};
use attrsparse::sparseness::gini_abs;
use clap::Args;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args, Debug)]
pub struct GiniArgs {
    /// Long-format attributions CSV (example_id,feature,value) as written
    /// by `attribute`; prints one Gini index per example.
    #[arg(long, required_unless_present = "values", conflicts_with = "values")]
    attributions: Option<PathBuf>,
    /// Comma-separated values; prints the Gini index of their magnitudes.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Groups values by example id, keeping first-appearance order.
fn read_long_csv(path: &PathBuf) -> Result<Vec<(String, Vec<f64>)>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing `{name}` column", path.display()))
    };
    let (id_col, value_col) = (col("example_id")?, col("value")?);
    let mut order: Vec<(String, Vec<f64>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or_default().to_string();
        let raw = rec.get(value_col).unwrap_or_default();
        let v: f64 = raw
            .parse()
            .map_err(|_| anyhow!("{} row {}: `{raw}` is not a number", path.display(), row + 2))?;
        let k = *index.entry(id.clone()).or_insert_with(|| {
            order.push((id, Vec::new()));
            order.len() - 1
        });
        order[k].1.push(v);
    }
    if order.is_empty() {
        return Err(anyhow!("{}: no attribution rows", path.display()));
    }
    Ok(order)
}

pub fn run(args: GiniArgs) -> Result<ExitCode> {
    if let Some(values) = &args.values {
        let g = gini_abs(parse_reals(values)?)?;
        if g.degenerate {
            eprintln!("all-zero vector");
        }
        emit(args.out.as_deref(), &format!("{}\n", g.value))?;
        return Ok(ExitCode::SUCCESS);
    }
    let path = args.attributions.as_ref().expect("clap enforces one input");
    let mut out = String::from("example_id,gini,degenerate\n");
    let mut total = 0.0;
    let groups = read_long_csv(path)?;
    for (id, values) in &groups {
        let g = gini_abs(values.iter().copied())?;
        total += g.value;
        let _ = writeln!(out, "{id},{},{}", g.value, g.degenerate);
    }
    emit(args.out.as_deref(), &out)?;
    eprintln!("mean gini over {} examples: {}", groups.len(), total / groups.len() as f64);
    Ok(ExitCode::SUCCESS)
}
