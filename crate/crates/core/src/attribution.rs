//! Integrated Gradients: midpoint-rule path integration for differentiable
//! models and the exact form for functions of a single projection `⟨w, x⟩`.

use crate::data::{Dataset, Span, SplitKind};
use crate::error::{check_dim, Error, Result};
use crate::loss::LossSpec;
use crate::model::{Activation, LinearModel, Model, Scorer};
use crate::scalar::{sigmoid, Scalar};
use ndarray::{Array1, ArrayView1, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Which scalar function was attributed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    /// Raw model output `A(logit)`.
    Output,
    /// Output probability of the given (true) class.
    TrueClass { label: i32 },
    /// The loss surface `x ↦ ℒ(x, label; w)`.
    Loss { label: i32, spec: LossSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Closed,
    Numeric { steps: usize },
}

impl Method {
    pub const REPORT_STEPS: usize = 256;
    pub const ORACLE_STEPS: usize = 4096;
}

/// Scalar function of the input with a gradient.
pub trait Attributable<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: ArrayView1<'_, T>) -> Result<T>;
    fn value_and_grad(&self, x: ArrayView1<'_, T>) -> Result<(T, Array1<T>)>;
    fn target(&self) -> Target;
}

/// Function of the form `F(x) = φ(⟨w, x⟩)`, for which IG has a closed form.
pub trait Ridge<T: Scalar> {
    fn direction(&self) -> ArrayView1<'_, T>;
    fn profile(&self, t: T) -> T;
    fn target(&self) -> Target;
}

#[derive(Debug, Clone)]
pub struct AttributionVector<T> {
    pub values: Array1<T>,
    pub baseline: Array1<T>,
    pub target: Target,
    pub method: Method,
    /// `|Σ IG_i − (F(x) − F(u))|`.
    pub completeness_residual: T,
    /// Set when the closed form met `⟨x − u, w⟩ = 0` and returned zeros.
    pub degenerate: bool,
    /// Row index in the source dataset, when attributed from one.
    pub example: Option<usize>,
}

/// The model's own output.
pub struct Output<'a, M: ?Sized>(pub &'a M);

/// Probability the model assigns to class `label ∈ {−1, +1}`: `σ(y·z)`
/// for sigmoid outputs and `y·z` for identity outputs.
pub struct TrueClass<'a, M: ?Sized> {
    pub model: &'a M,
    pub label: i32,
}

/// `x ↦ g(−y(⟨w, x⟩ + b))`.
pub struct LossSurface<'a, T> {
    pub spec: LossSpec,
    pub model: &'a LinearModel<T>,
    pub label: i32,
}

impl<T: Scalar, M: Scorer<T> + ?Sized> Attributable<T> for Output<'_, M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: ArrayView1<'_, T>) -> Result<T> {
        self.0.predict(x)
    }

    fn value_and_grad(&self, x: ArrayView1<'_, T>) -> Result<(T, Array1<T>)> {
        let (z, g) = self.0.logit_and_input_grad(x)?;
        let a = self.0.output_activation();
        let s = a.derivative(z);
        Ok((a.apply(z), g * s))
    }

    fn target(&self) -> Target {
        Target::Output
    }
}

fn class_profile<T: Scalar>(activation: Activation, y: T, z: T) -> (T, T) {
    match activation {
        Activation::Sigmoid => {
            let p = sigmoid(y * z);
            (p, y * p * (T::one() - p))
        }
        Activation::Identity => (y * z, y),
    }
}

impl<T: Scalar, M: Scorer<T> + ?Sized> Attributable<T> for TrueClass<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, x: ArrayView1<'_, T>) -> Result<T> {
        let z = self.model.logit(x)?;
        Ok(class_profile(self.model.output_activation(), T::lit(self.label as f64), z).0)
    }

    fn value_and_grad(&self, x: ArrayView1<'_, T>) -> Result<(T, Array1<T>)> {
        let (z, g) = self.model.logit_and_input_grad(x)?;
        let (f, df) = class_profile(self.model.output_activation(), T::lit(self.label as f64), z);
        Ok((f, g * df))
    }

    fn target(&self) -> Target {
        Target::TrueClass { label: self.label }
    }
}

impl<T: Scalar> Attributable<T> for LossSurface<'_, T> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, x: ArrayView1<'_, T>) -> Result<T> {
        crate::model::loss(self.spec, self.model, x, self.label)
    }

    fn value_and_grad(&self, x: ArrayView1<'_, T>) -> Result<(T, Array1<T>)> {
        let y = T::lit(self.label as f64);
        let z = -y * self.model.margin(x)?;
        let s = -y * self.spec.g_prime(z);
        Ok((self.spec.g(z), self.model.w() * s))
    }

    fn target(&self) -> Target {
        Target::Loss {
            label: self.label,
            spec: self.spec,
        }
    }
}

impl<T: Scalar> Ridge<T> for Output<'_, LinearModel<T>> {
    fn direction(&self) -> ArrayView1<'_, T> {
        self.0.w().view()
    }

    fn profile(&self, t: T) -> T {
        self.0.activation().apply(t + self.0.bias().unwrap_or_else(T::zero))
    }

    fn target(&self) -> Target {
        Target::Output
    }
}

impl<T: Scalar> Ridge<T> for TrueClass<'_, LinearModel<T>> {
    fn direction(&self) -> ArrayView1<'_, T> {
        self.model.w().view()
    }

    fn profile(&self, t: T) -> T {
        let z = t + self.model.bias().unwrap_or_else(T::zero);
        class_profile(self.model.activation(), T::lit(self.label as f64), z).0
    }

    fn target(&self) -> Target {
        Target::TrueClass { label: self.label }
    }
}

impl<T: Scalar> Ridge<T> for LossSurface<'_, T> {
    fn direction(&self) -> ArrayView1<'_, T> {
        self.model.w().view()
    }

    fn profile(&self, t: T) -> T {
        let y = T::lit(self.label as f64);
        self.spec.g(-y * (t + self.model.bias().unwrap_or_else(T::zero)))
    }

    fn target(&self) -> Target {
        Target::Loss {
            label: self.label,
            spec: self.spec,
        }
    }
}

/// Midpoint rule: `IG_i ≈ (x_i − u_i)(1/m) Σ_k ∂_i F(u + ((k − ½)/m)(x − u))`.
pub fn ig_numeric<T: Scalar, F: Attributable<T> + ?Sized>(
    f: &F,
    x: ArrayView1<'_, T>,
    u: ArrayView1<'_, T>,
    steps: usize,
) -> Result<AttributionVector<T>> {
    if steps == 0 {
        return Err(Error::Config("IG needs at least one step".into()));
    }
    check_dim(f.dim(), x.len())?;
    check_dim(f.dim(), u.len())?;
    let diff = &x - &u;
    let m = T::lit(steps as f64);
    let mut grad_sum = Array1::<T>::zeros(x.len());
    let mut point = Array1::<T>::zeros(x.len());
    for k in 0..steps {
        let alpha = (T::lit(k as f64) + T::lit(0.5)) / m;
        Zip::from(&mut point)
            .and(&u)
            .and(&diff)
            .for_each(|p, &ui, &di| *p = ui + alpha * di);
        let (_, g) = f.value_and_grad(point.view())?;
        grad_sum += &g;
    }
    let values = &diff * &(grad_sum / m);
    let change = f.value(x)? - f.value(u)?;
    Ok(AttributionVector {
        completeness_residual: (values.sum() - change).abs(),
        values,
        baseline: u.to_owned(),
        target: f.target(),
        method: Method::Numeric { steps },
        degenerate: false,
        example: None,
    })
}

/// `IG = [F(x) − F(u)] ((x − u) ⊙ w) / ⟨x − u, w⟩`.
///
/// When `⟨x − u, w⟩ = 0` the output cannot change along the path, so the
/// zero vector is returned and flagged; a nonzero output change there
/// means `F` is not a function of `⟨w, x⟩` and is reported as an error.
pub fn ig_closed_form<T: Scalar, R: Ridge<T> + ?Sized>(
    f: &R,
    x: ArrayView1<'_, T>,
    u: ArrayView1<'_, T>,
) -> Result<AttributionVector<T>> {
    let w = f.direction();
    check_dim(w.len(), x.len())?;
    check_dim(w.len(), u.len())?;
    let fx = f.profile(w.dot(&x));
    let fu = f.profile(w.dot(&u));
    let change = fx - fu;
    let mut values: Array1<T> = (&x - &u) * &w;
    let denom = values.sum();
    let mut degenerate = false;
    if denom == T::zero() {
        let tol = T::epsilon().sqrt() * T::one().max(fx.abs()).max(fu.abs());
        if change.abs() > tol {
            return Err(Error::ActivationContract(change.to_f64_lossy()));
        }
        values.fill(T::zero());
        degenerate = true;
    } else {
        let c = change / denom;
        values.mapv_inplace(|v| v * c);
    }
    Ok(AttributionVector {
        completeness_residual: (values.sum() - change).abs(),
        values,
        baseline: u.to_owned(),
        target: f.target(),
        method: Method::Closed,
        degenerate,
        example: None,
    })
}

/// Attributes the true-class probability of every test example, in split
/// order. Examples are processed in parallel.
pub fn attribute_dataset<T: Scalar>(
    model: &Model<T>,
    ds: &Dataset<T>,
    baseline: ArrayView1<'_, T>,
    method: Method,
) -> Result<Vec<AttributionVector<T>>> {
    attribute_split(model, ds, SplitKind::Test, baseline, method)
}

pub fn attribute_split<T: Scalar>(
    model: &Model<T>,
    ds: &Dataset<T>,
    split: SplitKind,
    baseline: ArrayView1<'_, T>,
    method: Method,
) -> Result<Vec<AttributionVector<T>>> {
    check_dim(ds.dim(), baseline.len())?;
    check_dim(ds.dim(), model.dim())?;
    if !ds.is_binary() {
        return Err(Error::Unsupported("attribution needs a binary dataset".into()));
    }
    let one = |i: usize| -> Result<AttributionVector<T>> {
        let x = ds.row(i);
        let label = ds.label(i);
        let mut a = match (model, method) {
            (Model::Linear(m), Method::Closed) => ig_closed_form(&TrueClass { model: m, label }, x, baseline)?,
            (Model::Linear(m), Method::Numeric { steps }) => {
                ig_numeric(&TrueClass { model: m, label }, x, baseline, steps)?
            }
            (Model::Mlp(m), Method::Numeric { steps }) => ig_numeric(&TrueClass { model: m, label }, x, baseline, steps)?,
            (Model::Mlp(_), Method::Closed) => {
                return Err(Error::Unsupported("closed-form IG needs a linear model".into()))
            }
            (Model::OneVsAll(_), _) => return Err(Error::Unsupported("attribution of one-vs-all models".into())),
        };
        a.example = Some(i);
        Ok(a)
    };
    ds.indices(split).par_iter().map(|&i| one(i)).collect()
}

/// Mean absolute attribution per exploded feature (FV) and per original
/// column (FI, summed over one-hot spans).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub feature_values: Vec<(String, f64)>,
    pub feature_impacts: Vec<(String, f64)>,
}

pub fn impact_report<T: Scalar>(attribs: &[AttributionVector<T>], ds: &Dataset<T>) -> Result<ImpactReport> {
    if attribs.is_empty() {
        return Err(Error::Empty("no attributions to aggregate"));
    }
    let d = ds.dim();
    let mut fv = vec![0.0f64; d];
    for a in attribs {
        check_dim(d, a.values.len())?;
        for (s, v) in fv.iter_mut().zip(a.values.iter()) {
            *s += v.abs().to_f64_lossy();
        }
    }
    let n = attribs.len() as f64;
    fv.iter_mut().for_each(|v| *v /= n);
    let feature_values = ds.feature_names().iter().cloned().zip(fv.iter().copied()).collect();
    let feature_impacts = ds
        .encoding_map()
        .iter()
        .map(|col| {
            let total = match &col.span {
                Span::Numeric { position } => fv[*position],
                span => span.positions().map(|p| fv[p]).sum(),
            };
            (col.name.clone(), total)
        })
        .collect();
    Ok(ImpactReport {
        feature_values,
        feature_impacts,
    })
}

/// Long-format CSV: `example_id,feature,value`.
pub fn write_attributions_csv<T: Scalar>(path: &Path, attribs: &[AttributionVector<T>], feature_names: &[String]) -> Result<()> {
    let mut out = String::from("example_id,feature,value\n");
    for (k, a) in attribs.iter().enumerate() {
        let id = a.example.unwrap_or(k);
        for (name, v) in feature_names.iter().zip(a.values.iter()) {
            let _ = writeln!(out, "{id},{},{v}", csv_field(name));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// `feature,fv` and `feature,fi` tables.
pub fn write_impact_csv(fv_path: &Path, fi_path: &Path, report: &ImpactReport) -> Result<()> {
    let table = |header: &str, rows: &[(String, f64)]| {
        let mut out = format!("feature,{header}\n");
        for (name, v) in rows {
            let _ = writeln!(out, "{},{v}", csv_field(name));
        }
        out
    };
    std::fs::write(fv_path, table("fv", &report.feature_values)).map_err(|e| Error::io(fv_path, e))?;
    std::fs::write(fi_path, table("fi", &report.feature_impacts)).map_err(|e| Error::io(fi_path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Plain (P2) graymap of `|values|`, scaled so the largest magnitude is 255.
pub fn write_pgm<T: Scalar>(path: &Path, values: ArrayView1<'_, T>, shape: (usize, usize)) -> Result<()> {
    let (h, w) = shape;
    check_dim(h * w, values.len())?;
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs().to_f64_lossy()));
    let mut out = format!("P2\n{w} {h}\n255\n");
    for r in 0..h {
        let row: Vec<String> = (0..w)
            .map(|c| {
                let v = values[r * w + c].abs().to_f64_lossy();
                let level = if max > 0.0 { (255.0 * v / max).round() } else { 0.0 };
                (level as u32).to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sig_model(w: Array1<f64>) -> LinearModel<f64> {
        LinearModel::new(w, Activation::Sigmoid).unwrap()
    }

    #[test]
    fn hand_evaluated_closed_form() {
        let m = sig_model(array![1.0, 2.0]);
        let a = ig_closed_form(&Output(&m), array![1.0, 1.0].view(), array![0.0, 0.0].view()).unwrap();
        let change = sigmoid(3.0f64) - 0.5;
        assert!((change - 0.45257).abs() < 1e-5);
        assert!((a.values[0] - change / 3.0).abs() < 1e-15);
        assert!((a.values[1] - 2.0 * change / 3.0).abs() < 1e-15);
        assert!(a.completeness_residual <= 1e-12);
    }

    #[test]
    fn numeric_matches_closed_form() {
        let m = sig_model(array![1.0, 2.0]);
        let x = array![1.0, 1.0];
        let u = array![0.0, 0.0];
        let n = ig_numeric(&Output(&m), x.view(), u.view(), 4096).unwrap();
        assert!((n.values[0] - 0.1509).abs() < 1e-4);
        assert!((n.values[1] - 0.3017).abs() < 1e-4);
        let c = ig_closed_form(&Output(&m), x.view(), u.view()).unwrap();
        assert!((&n.values - &c.values).iter().all(|d| d.abs() < 1e-6));
    }

    #[test]
    fn zero_path_and_identity_model() {
        let m = sig_model(array![0.4, -1.0]);
        let x = array![0.3, 0.7];
        let a = ig_numeric(&Output(&m), x.view(), x.view(), 16).unwrap();
        assert!(a.values.iter().all(|&v| v == 0.0));

        let lin = LinearModel::new(array![0.5, -2.0, 3.0], Activation::Identity).unwrap();
        let x = array![1.0, 2.0, -1.0];
        let u = array![0.5, 0.0, 1.0];
        let a = ig_numeric(&Output(&lin), x.view(), u.view(), 1).unwrap();
        assert_eq!(a.values, (&x - &u) * lin.w());
    }

    #[test]
    fn zero_weight_gets_zero_attribution() {
        let m = sig_model(array![1.5, 0.0, -0.5]);
        let a = ig_closed_form(&Output(&m), array![1.0, 4.0, 2.0].view(), array![0.0, 0.0, 0.0].view()).unwrap();
        assert_eq!(a.values[1], 0.0);
    }

    #[test]
    fn degenerate_denominator() {
        let m = sig_model(array![1.0, -1.0]);
        let a = ig_closed_form(&Output(&m), array![1.0, 1.0].view(), array![0.0, 0.0].view()).unwrap();
        assert!(a.degenerate);
        assert!(a.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn true_class_of_negative_label() {
        let m = sig_model(array![2.0]);
        let f = TrueClass { model: &m, label: -1 };
        let v = Attributable::value(&f, array![1.0].view()).unwrap();
        assert!((v - (1.0 - sigmoid(2.0f64))).abs() < 1e-15);
        let a = ig_closed_form(&f, array![1.0].view(), array![0.0].view()).unwrap();
        assert!((a.values[0] - (v - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn pgm_header_and_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        write_pgm(&p, array![0.0, -2.0, 1.0, 0.5].view(), (2, 2)).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text, "P2\n2 2\n255\n0 255\n128 64\n");
    }
}
