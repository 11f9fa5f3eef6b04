use std::fmt;

use serde::{Deserialize, Serialize};

use super::{check_dimension, dot, ClassifierError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
    Poly { gamma: f64, degree: u32, coef0: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } => check_gamma(gamma),
            KernelSpec::Poly {
                gamma,
                degree,
                coef0,
            } => {
                check_gamma(gamma)?;
                if degree == 0 {
                    return Err(ClassifierError::InvalidHyper(
                        "polynomial degree must be at least 1".into(),
                    ));
                }
                if !coef0.is_finite() {
                    return Err(ClassifierError::InvalidHyper("coef0 must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Kernel value without dimension checks; callers guarantee equal lengths.
    pub(crate) fn eval_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(u, v),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Poly {
                gamma,
                degree,
                coef0,
            } => (gamma * dot(u, v) + coef0).powi(degree as i32),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(ClassifierError::InvalidHyper(format!(
            "gamma must be positive, got {gamma}"
        )))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => f.write_str("linear"),
            KernelSpec::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
            KernelSpec::Poly {
                gamma,
                degree,
                coef0,
            } => {
                write!(f, "poly(gamma={gamma},degree={degree},coef0={coef0})")
            }
        }
    }
}

/// `linear`: u·v; `rbf`: exp(-gamma ‖u-v‖²); `poly`: (gamma u·v + coef0)^degree.
pub fn kernel_eval(u: &[f64], v: &[f64], spec: &KernelSpec) -> Result<f64> {
    check_dimension(u.len(), v)?;
    Ok(spec.eval_unchecked(u, v))
}
