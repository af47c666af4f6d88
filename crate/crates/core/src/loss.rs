//! Margin losses `ℒ(x, y; w) = g(−y⟨w, x⟩)` with non-decreasing convex `g`.

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, softplus, Scalar};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossSpec {
    /// `g(z) = ln(1 + e^z)`, the negative log-likelihood of a sigmoid model.
    #[default]
    Logistic,
    /// `g(z) = max(0, 1 + z)`; `g′(−1)` is taken as 0.
    Hinge,
    /// `g(z) = ln(1 + e^{1+z})`.
    SoftplusHinge,
}

impl LossSpec {
    pub const ALL: [LossSpec; 3] = [LossSpec::Logistic, LossSpec::Hinge, LossSpec::SoftplusHinge];

    #[inline]
    pub fn g<T: Scalar>(self, z: T) -> T {
        match self {
            LossSpec::Logistic => softplus(z),
            LossSpec::Hinge => (T::one() + z).max(T::zero()),
            LossSpec::SoftplusHinge => softplus(T::one() + z),
        }
    }

    #[inline]
    pub fn g_prime<T: Scalar>(self, z: T) -> T {
        match self {
            LossSpec::Logistic => sigmoid(z),
            LossSpec::Hinge => {
                if z > -T::one() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            LossSpec::SoftplusHinge => sigmoid(T::one() + z),
        }
    }

    /// Whether `g` is differentiable at `z`.
    pub fn is_smooth_at<T: Scalar>(self, z: T) -> bool {
        self != LossSpec::Hinge || z != -T::one()
    }

    pub fn name(self) -> &'static str {
        match self {
            LossSpec::Logistic => "logistic",
            LossSpec::Hinge => "hinge",
            LossSpec::SoftplusHinge => "softplus-hinge",
        }
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" | "logistic-nll" => Ok(LossSpec::Logistic),
            "hinge" => Ok(LossSpec::Hinge),
            "softplus-hinge" => Ok(LossSpec::SoftplusHinge),
            other => Err(Error::Config(format!(
                "unknown loss `{other}` (expected logistic, hinge or softplus-hinge)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_at_zero_is_ln2() {
        assert!((LossSpec::Logistic.g(0.0f64) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(LossSpec::Logistic.g_prime(0.0f64), 0.5);
    }

    #[test]
    fn hinge_flat_beyond_margin() {
        assert_eq!(LossSpec::Hinge.g(-2.0f64), 0.0);
        assert_eq!(LossSpec::Hinge.g_prime(-1.0f64), 0.0);
        assert_eq!(LossSpec::Hinge.g_prime(-0.999f64), 1.0);
    }

    #[test]
    fn monotone_and_convex_on_grid() {
        for spec in LossSpec::ALL {
            let grid: Vec<f64> = (0..=4000).map(|k| -10.0 + k as f64 * 0.005).collect();
            for p in grid.windows(2) {
                assert!(spec.g(p[0]) <= spec.g(p[1]), "{spec} g at {}", p[0]);
                assert!(spec.g_prime(p[0]) <= spec.g_prime(p[1]), "{spec} g' at {}", p[0]);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-5;
        for spec in LossSpec::ALL {
            for &z in &[-3.0f64, -1.5, -0.5, 0.0, 0.7, 4.0] {
                let fd = (spec.g(z + h) - spec.g(z - h)) / (2.0 * h);
                assert!((fd - spec.g_prime(z)).abs() < 1e-8, "{spec} at {z}");
            }
        }
    }

    #[test]
    fn parse_names() {
        for spec in LossSpec::ALL {
            assert_eq!(spec.name().parse::<LossSpec>().unwrap(), spec);
        }
        assert!("squared".parse::<LossSpec>().is_err());
    }
}
