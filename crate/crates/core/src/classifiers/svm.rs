//! Soft-margin kernel SVM trained by sequential minimal optimization.
//!
//! The solver works on the dual in minimization form
//!
//! ```text
//! min_α  ½ αᵀQα − Σα    s.t.  0 ≤ αᵢ ≤ C,  Σ yᵢαᵢ = 0,   Qᵢⱼ = yᵢyⱼK(xᵢ, xⱼ)
//! ```
//!
//! choosing the working pair by maximal violation for the first index and
//! second-order gain for the second (Fan, Chen and Lin, 2005). It stops when
//! the maximal violating-pair gap is below `tol`, which bounds the KKT
//! violation of every point by `tol` under the returned bias.
//!
//! Kernel rows are computed on demand, in parallel under
//! [`Execution::Parallel`], and kept in a bounded cache.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::{check_dimension, validate_training, ClassifierError, Result};
use crate::corpus::Label;
use crate::Execution;

const TAU: f64 = 1e-12;
const CACHE_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmHyper {
    pub kernel: KernelSpec,
    pub c: f64,
    /// Stopping tolerance on the maximal violating-pair gap.
    pub tol: f64,
    /// Iteration cap; `0` means `max(10_000_000, 100 n)`.
    pub max_iter: usize,
}

impl Default for SvmHyper {
    fn default() -> Self {
        SvmHyper {
            kernel: KernelSpec::Linear,
            c: 1.0,
            tol: 1e-3,
            max_iter: 0,
        }
    }
}

impl SvmHyper {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ClassifierError::InvalidHyper(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ClassifierError::InvalidHyper(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub dimension: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢ yᵢ` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
    pub tol: f64,
}

impl SvmModel {
    /// `Σ coefᵢ K(svᵢ, x) + bias`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        check_dimension(self.dimension, x)?;
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * self.kernel.eval_unchecked(sv, x))
            .sum::<f64>()
            + self.bias)
    }
}

#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: SvmModel,
    /// All dual variables, in training order.
    pub alphas: Vec<f64>,
    /// `Σα − ½ αᵀQα` at the solution.
    pub dual_objective: f64,
    pub iterations: usize,
    /// Final maximal violating-pair gap.
    pub gap: f64,
}

struct KernelRows<'a> {
    rows: &'a [&'a [f64]],
    kernel: KernelSpec,
    exec: Execution,
    cache: HashMap<usize, (Arc<[f64]>, u64)>,
    capacity: usize,
    clock: u64,
}

impl<'a> KernelRows<'a> {
    fn new(rows: &'a [&'a [f64]], kernel: KernelSpec, exec: Execution) -> Self {
        let n = rows.len().max(1);
        let capacity = (CACHE_BYTES / (8 * n)).max(2);
        KernelRows {
            rows,
            kernel,
            exec,
            cache: HashMap::new(),
            capacity,
            clock: 0,
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        self.clock += 1;
        let clock = self.clock;
        if let Some((row, used)) = self.cache.get_mut(&i) {
            *used = clock;
            return Arc::clone(row);
        }
        if self.cache.len() >= self.capacity {
            let oldest = self
                .cache
                .iter()
                .min_by_key(|(_, (_, used))| *used)
                .map(|(k, _)| *k)
                .expect("cache is full");
            self.cache.remove(&oldest);
        }
        let xi = self.rows[i];
        let kernel = self.kernel;
        let rows = self.rows;
        let values = self.exec.map(rows, |xj| kernel.eval_unchecked(xi, xj));
        let row: Arc<[f64]> = values.into();
        self.cache.insert(i, (Arc::clone(&row), clock));
        row
    }
}

pub fn train_svm<X: AsRef<[f64]>>(xs: &[X], ys: &[Label], hyper: &SvmHyper) -> Result<SvmFit> {
    train_svm_with(xs, ys, hyper, Execution::Sequential)
}

/// [`train_svm`] with kernel rows computed under `exec`.
pub fn train_svm_with<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[Label],
    hyper: &SvmHyper,
    exec: Execution,
) -> Result<SvmFit> {
    hyper.validate()?;
    let dim = validate_training(xs, ys)?;
    let rows: Vec<&[f64]> = xs.iter().map(AsRef::as_ref).collect();
    let n = rows.len();
    let c = hyper.c;
    let y: Vec<f64> = ys.iter().map(|l| l.sign()).collect();
    let diag: Vec<f64> = rows
        .iter()
        .map(|x| hyper.kernel.eval_unchecked(x, x))
        .collect();
    let mut kernel = KernelRows::new(&rows, hyper.kernel, exec);

    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let max_iter = if hyper.max_iter == 0 {
        (100 * n).max(10_000_000)
    } else {
        hyper.max_iter
    };

    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let gap = loop {
        // First index: maximal violation over I_up.
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v >= g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t]) {
                g_min = g_min.min(-y[t] * grad[t]);
            }
        }
        let gap = g_max - g_min;
        let Some(i) = i_sel else { break 0.0 };
        if gap < hyper.tol {
            break gap.max(0.0);
        }
        if iterations >= max_iter {
            let objective = dual_objective_from_grad(&alpha, &grad);
            return Err(ClassifierError::NotConverged {
                iterations,
                gap,
                objective,
            });
        }
        iterations += 1;

        // Second index: largest second-order decrease over I_low.
        let k_i = kernel.row(i);
        let mut best = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            let b = g_max - v;
            if b > 0.0 {
                let mut a = diag[i] + diag[t] - 2.0 * k_i[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj <= best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else { break gap };
        let k_j = kernel.row(j);

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let mut quad = diag[i] + diag[j] - 2.0 * k_i[j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_ai;
        let d_j = alpha[j] - old_aj;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k_i[t] * d_i + y[j] * k_j[t] * d_j);
        }
    };

    let bias = -compute_rho(&alpha, &grad, &y, c);
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(rows[t].to_vec());
            dual_coefs.push(alpha[t] * y[t]);
        }
    }
    Ok(SvmFit {
        dual_objective: dual_objective_from_grad(&alpha, &grad),
        model: SvmModel {
            dimension: dim,
            support_vectors,
            dual_coefs,
            bias,
            kernel: hyper.kernel,
            c,
            tol: hyper.tol,
        },
        alphas: alpha,
        iterations,
        gap,
    })
}

/// With `G = Qα − e`: `Σα − ½αᵀQα = −½ Σ αᵢ (Gᵢ − 1)`.
fn dual_objective_from_grad(alpha: &[f64], grad: &[f64]) -> f64 {
    -0.5 * alpha
        .iter()
        .zip(grad)
        .map(|(a, g)| a * (g - 1.0))
        .sum::<f64>()
}

/// Offset `ρ` of the decision function `Σ αᵢyᵢK(xᵢ, x) − ρ`: the mean of
/// `yᵢGᵢ` over free variables, or the midpoint of the feasible interval when
/// every variable is at a bound.
fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Largest KKT violation of `model` on a training set given its dual variables:
/// for `α = 0` the margin `y f(x)` must be at least 1, for `α = C` at most 1,
/// and exactly 1 in between.
pub fn max_kkt_violation<X: AsRef<[f64]>>(
    model: &SvmModel,
    alphas: &[f64],
    xs: &[X],
    ys: &[Label],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for ((x, y), a) in xs.iter().zip(ys).zip(alphas) {
        let margin = y.sign() * model.decision_value(x.as_ref())?;
        let violation = if *a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if *a >= model.c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}
