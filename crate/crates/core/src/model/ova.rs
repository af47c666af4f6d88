use super::{LinearModel, Scorer};
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;
use ndarray::ArrayView1;

/// `k ≥ 3` linear heads, head `i` separating class `i` from the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsAllModel<T> {
    heads: Vec<LinearModel<T>>,
}

impl<T: Scalar> OneVsAllModel<T> {
    pub fn new(heads: Vec<LinearModel<T>>) -> Result<Self> {
        if heads.len() < 3 {
            return Err(Error::Config(format!(
                "one-vs-all needs at least 3 heads, got {}",
                heads.len()
            )));
        }
        let d = heads[0].dim();
        for h in &heads {
            check_dim(d, h.dim())?;
        }
        Ok(OneVsAllModel { heads })
    }

    pub fn heads(&self) -> &[LinearModel<T>] {
        &self.heads
    }

    pub fn k(&self) -> usize {
        self.heads.len()
    }

    pub fn dim(&self) -> usize {
        self.heads[0].dim()
    }

    /// Margin of every head.
    pub fn scores(&self, x: ArrayView1<'_, T>) -> Result<Vec<T>> {
        self.heads.iter().map(|h| h.margin(x)).collect()
    }

    pub fn predict_class(&self, x: ArrayView1<'_, T>) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}

/// Index of the largest score; the first one wins ties.
pub(crate) fn argmax<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
