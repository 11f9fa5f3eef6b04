//! Gaussian naive Bayes with empirical priors and per-class diagonal Gaussians.
//!
//! Variances are the population (ddof = 0) class moments, floored at
//! `var_smoothing · max_j Var(x_j)` over the whole training set (or at
//! `var_smoothing` itself when every feature is constant).

use serde::{Deserialize, Serialize};

use super::{check_dimension, validate_training, ClassifierError, Result};
use crate::corpus::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnbHyper {
    pub var_smoothing: f64,
}

impl Default for GnbHyper {
    fn default() -> Self {
        GnbHyper {
            var_smoothing: 1e-9,
        }
    }
}

/// Index 0 holds the `original` class, index 1 `paraphrased`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub var_floor: f64,
}

fn class_index(label: Label) -> usize {
    match label {
        Label::Original => 0,
        Label::Paraphrased => 1,
    }
}

pub fn train_gnb<X: AsRef<[f64]>>(xs: &[X], ys: &[Label], hyper: &GnbHyper) -> Result<GnbModel> {
    if !(hyper.var_smoothing > 0.0 && hyper.var_smoothing.is_finite()) {
        return Err(ClassifierError::InvalidHyper(
            "var_smoothing must be positive".into(),
        ));
    }
    let dim = validate_training(xs, ys)?;
    let n = xs.len() as f64;

    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    let mut total = vec![0.0; dim];
    for (x, y) in xs.iter().zip(ys) {
        let c = class_index(*y);
        counts[c] += 1;
        for (j, v) in x.as_ref().iter().enumerate() {
            sums[c][j] += v;
            total[j] += v;
        }
    }
    let means = [0, 1].map(|c| {
        sums[c]
            .iter()
            .map(|s| s / counts[c] as f64)
            .collect::<Vec<_>>()
    });
    let overall_mean: Vec<f64> = total.iter().map(|s| s / n).collect();

    let mut sq = [vec![0.0; dim], vec![0.0; dim]];
    let mut overall_sq = vec![0.0; dim];
    for (x, y) in xs.iter().zip(ys) {
        let c = class_index(*y);
        for (j, v) in x.as_ref().iter().enumerate() {
            let d = v - means[c][j];
            sq[c][j] += d * d;
            let o = v - overall_mean[j];
            overall_sq[j] += o * o;
        }
    }
    let max_var = overall_sq.iter().map(|s| s / n).fold(0.0f64, f64::max);
    let var_floor = if max_var > 0.0 {
        hyper.var_smoothing * max_var
    } else {
        hyper.var_smoothing
    };
    let variances = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| (s / counts[c] as f64).max(var_floor))
            .collect::<Vec<_>>()
    });
    Ok(GnbModel {
        priors: [counts[0] as f64 / n, counts[1] as f64 / n],
        means,
        variances,
        var_floor,
    })
}

impl GnbModel {
    pub fn dimension(&self) -> usize {
        self.means[0].len()
    }

    /// Log of prior times class-conditional density, per class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Result<[f64; 2]> {
        check_dimension(self.dimension(), x)?;
        Ok([0, 1].map(|c| {
            let mut ll = self.priors[c].ln();
            for ((v, m), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                ll -=
                    0.5 * (2.0 * std::f64::consts::PI * var).ln() + (v - m) * (v - m) / (2.0 * var);
            }
            ll
        }))
    }

    /// Normalized posterior `[P(original | x), P(paraphrased | x)]`.
    pub fn posterior(&self, x: &[f64]) -> Result<[f64; 2]> {
        let jll = self.joint_log_likelihood(x)?;
        let m = jll[0].max(jll[1]);
        let e = [(jll[0] - m).exp(), (jll[1] - m).exp()];
        let z = e[0] + e[1];
        Ok([e[0] / z, e[1] / z])
    }
}
