use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::Array1;

/// Estimated directed strength of each feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStrengths<T> {
    pub a: Array1<T>,
}

/// Centers every feature on the midpoint of its two class-conditional means
/// and returns half their difference as the directed strength. Means are
/// estimated on the training split only.
pub fn translate_features<T: Scalar>(ds: &Dataset<T>) -> Result<(Dataset<T>, FeatureStrengths<T>)> {
    if !ds.is_binary() {
        return Err(Error::Unsupported("feature translation needs binary labels".into()));
    }
    let d = ds.dim();
    let mut sum_pos = Array1::<T>::zeros(d);
    let mut sum_neg = Array1::<T>::zeros(d);
    let (mut n_pos, mut n_neg) = (0usize, 0usize);
    for &i in &ds.split().train {
        if ds.label(i) == 1 {
            sum_pos += &ds.row(i);
            n_pos += 1;
        } else {
            sum_neg += &ds.row(i);
            n_neg += 1;
        }
    }
    if n_pos == 0 {
        return Err(Error::ClassAbsent(1));
    }
    if n_neg == 0 {
        return Err(Error::ClassAbsent(-1));
    }
    let mean_pos = sum_pos / T::lit(n_pos as f64);
    let mean_neg = sum_neg / T::lit(n_neg as f64);
    let half = T::lit(0.5);
    let shift = (&mean_pos + &mean_neg) * half;
    let a = (&mean_pos - &mean_neg) * half;

    let features = ds.features() - &shift.view().insert_axis(ndarray::Axis(0));
    let total_shift = match ds.shift() {
        Some(prev) => prev + &shift,
        None => shift,
    };
    let out = ds.with_features(features, Some(total_shift))?;
    Ok((out, FeatureStrengths { a }))
}
