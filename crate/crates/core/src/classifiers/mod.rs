//! Binary classifiers over averaged embeddings: logistic regression, a kernel
//! SVM trained with SMO, and Gaussian naive Bayes.
//!
//! Every classifier produces a [`Prediction`] whose score lies in `[0, 1]`
//! and is monotone in the model's evidence for `paraphrased`. A score of
//! exactly `0.5` is labeled `original`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::embeddings::FeatureVector;

pub mod gnb;
pub mod kernel;
pub mod logreg;
pub mod model_file;
pub mod svm;

pub use gnb::{GnbHyper, GnbModel};
pub use kernel::KernelSpec;
pub use logreg::{LogRegHyper, LogRegModel, LrSolver, MultiClass};
pub use svm::{SvmHyper, SvmModel};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("training data needs both classes, found only {0}")]
    SingleClass(Label),
    #[error("training data is empty")]
    Empty,
    #[error("non-finite feature value in row {0}")]
    NonFinite(usize),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("SMO did not converge after {iterations} iterations (violation gap {gap:.3e}, dual objective {objective:.6})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        objective: f64,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub score: f64,
}

impl Prediction {
    pub fn from_score(score: f64) -> Self {
        let label = if score > 0.5 {
            Label::Paraphrased
        } else {
            Label::Original
        };
        Prediction { label, score }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Checks shapes and classes of a training set; returns the dimension.
pub(crate) fn validate_training<X: AsRef<[f64]>>(xs: &[X], ys: &[Label]) -> Result<usize> {
    if xs.len() != ys.len() {
        return Err(ClassifierError::LengthMismatch {
            features: xs.len(),
            labels: ys.len(),
        });
    }
    let first = xs.first().ok_or(ClassifierError::Empty)?;
    let dim = first.as_ref().len();
    for (i, x) in xs.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != dim {
            return Err(ClassifierError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFinite(i));
        }
    }
    if ys.iter().all(|y| *y == ys[0]) {
        return Err(ClassifierError::SingleClass(ys[0]));
    }
    Ok(dim)
}

pub(crate) fn check_dimension(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(ClassifierError::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    LogReg,
    Svm,
    Gnb,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::LogReg => "logreg",
            Algorithm::Svm => "svm",
            Algorithm::Gnb => "gnb",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "logreg" | "lr" => Ok(Algorithm::LogReg),
            "svm" => Ok(Algorithm::Svm),
            "gnb" | "nb" => Ok(Algorithm::Gnb),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

/// Hyperparameters of one trainable configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Hyper {
    LogReg(LogRegHyper),
    Svm(SvmHyper),
    Gnb(GnbHyper),
}

impl Hyper {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Hyper::LogReg(_) => Algorithm::LogReg,
            Hyper::Svm(_) => Algorithm::Svm,
            Hyper::Gnb(_) => Algorithm::Gnb,
        }
    }
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyper::LogReg(h) => write!(
                f,
                "logreg solver={} max_iter={} multi_class={} tol={:e}",
                h.solver, h.max_iter, h.multi_class, h.tolerance
            ),
            Hyper::Svm(h) => write!(f, "svm kernel={} C={}", h.kernel, h.c),
            Hyper::Gnb(h) => write!(f, "gnb var_smoothing={:e}", h.var_smoothing),
        }
    }
}

/// Per-feature z-scoring learned from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Constant features get scale 1.
    pub fn fit<X: AsRef<[f64]>>(xs: &[X]) -> Self {
        let dim = xs.first().map_or(0, |x| x.as_ref().len());
        let n = xs.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for x in xs {
            for ((s, v), m) in var.iter_mut().zip(x.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    LogReg(LogRegModel),
    Svm(SvmModel),
    Gnb(GnbModel),
}

/// A trained model plus the optional input standardization it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub model: Model,
    pub scaler: Option<Standardizer>,
}

impl Classifier {
    /// Trains the configuration described by `hyper`. With `standardize`,
    /// features are z-scored with statistics from `xs` first.
    pub fn train<X: AsRef<[f64]>>(
        hyper: &Hyper,
        xs: &[X],
        ys: &[Label],
        standardize: bool,
    ) -> Result<Classifier> {
        validate_training(xs, ys)?;
        let scaler = standardize.then(|| Standardizer::fit(xs));
        let scaled: Vec<Vec<f64>>;
        let rows: Vec<&[f64]> = match &scaler {
            Some(s) => {
                scaled = xs.iter().map(|x| s.transform(x.as_ref())).collect();
                scaled.iter().map(Vec::as_slice).collect()
            }
            None => xs.iter().map(AsRef::as_ref).collect(),
        };
        let model = match hyper {
            Hyper::LogReg(h) => Model::LogReg(logreg::train_logreg(&rows, ys, h)?.model),
            Hyper::Svm(h) => Model::Svm(svm::train_svm(&rows, ys, h)?.model),
            Hyper::Gnb(h) => Model::Gnb(gnb::train_gnb(&rows, ys, h)?),
        };
        Ok(Classifier { model, scaler })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self.model {
            Model::LogReg(_) => Algorithm::LogReg,
            Model::Svm(_) => Algorithm::Svm,
            Model::Gnb(_) => Algorithm::Gnb,
        }
    }

    pub fn dimension(&self) -> usize {
        match &self.model {
            Model::LogReg(m) => m.weights.len(),
            Model::Svm(m) => m.dimension,
            Model::Gnb(m) => m.dimension(),
        }
    }

    /// One-line summary of the model and its hyperparameters.
    pub fn describe(&self) -> String {
        let model = match &self.model {
            Model::LogReg(m) => Hyper::LogReg(m.hyper).to_string(),
            Model::Svm(m) => format!(
                "svm kernel={} C={} support_vectors={}",
                m.kernel,
                m.c,
                m.support_vectors.len()
            ),
            Model::Gnb(m) => format!("gnb var_floor={:.6e}", m.var_floor),
        };
        format!("{model} standardized={}", self.scaler.is_some())
    }

    /// LR: sigmoid of the linear score. SVM: sigmoid of the decision value.
    /// GNB: posterior probability of `paraphrased`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dimension(self.dimension(), x)?;
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.transform(x);
                &scaled[..]
            }
            None => x,
        };
        let score = match &self.model {
            Model::LogReg(m) => m.probability(x)?,
            Model::Svm(m) => sigmoid(m.decision_value(x)?),
            Model::Gnb(m) => m.posterior(x)?[1],
        };
        Ok(Prediction::from_score(score))
    }

    pub fn predict_batch<X: AsRef<[f64]> + Sync>(
        &self,
        xs: &[X],
        exec: crate::Execution,
    ) -> Result<Vec<Prediction>> {
        exec.map(xs, |x| self.predict(x.as_ref()))
            .into_iter()
            .collect()
    }
}
