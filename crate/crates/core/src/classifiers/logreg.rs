//! Unregularized binary logistic regression minimizing the mean
//! cross-entropy.
//!
//! The four solver names of the usual grid map onto two regimes:
//! `newton-cg` and `lbfgs` use a damped Newton method with backtracking line
//! search; `sag` and `saga` use averaged stochastic gradient descent with a
//! constant step `1 / (2 max‖x̃‖²)` and Polyak averaging of the iterates.
//! Both stop when the ∞-norm of the full gradient drops below the tolerance.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dimension, dot, sigmoid, validate_training, ClassifierError, Result};
use crate::corpus::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSolver {
    NewtonCg,
    Lbfgs,
    Sag,
    Saga,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverRegime {
    Newton,
    AveragedSgd,
}

impl LrSolver {
    pub const ALL: [LrSolver; 4] = [
        LrSolver::NewtonCg,
        LrSolver::Lbfgs,
        LrSolver::Sag,
        LrSolver::Saga,
    ];

    pub fn regime(self) -> SolverRegime {
        match self {
            LrSolver::NewtonCg | LrSolver::Lbfgs => SolverRegime::Newton,
            LrSolver::Sag | LrSolver::Saga => SolverRegime::AveragedSgd,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LrSolver::NewtonCg => "newton-cg",
            LrSolver::Lbfgs => "lbfgs",
            LrSolver::Sag => "sag",
            LrSolver::Saga => "saga",
        }
    }
}

impl fmt::Display for LrSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LrSolver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        LrSolver::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown solver {s:?}"))
    }
}

/// Accepted for grid compatibility; both settings give the same binary model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiClass {
    Ovr,
    Multinomial,
}

impl fmt::Display for MultiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MultiClass::Ovr => "ovr",
            MultiClass::Multinomial => "multinomial",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegHyper {
    pub solver: LrSolver,
    pub max_iter: u32,
    pub multi_class: MultiClass,
    pub tolerance: f64,
    /// Shuffling seed for the stochastic regime.
    pub seed: u64,
}

impl Default for LogRegHyper {
    fn default() -> Self {
        LogRegHyper {
            solver: LrSolver::NewtonCg,
            max_iter: 500,
            multi_class: MultiClass::Ovr,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

impl LogRegHyper {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(ClassifierError::InvalidHyper(
                "max_iter must be positive".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(ClassifierError::InvalidHyper(
                "tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper: LogRegHyper,
}

impl LogRegModel {
    pub fn linear_score(&self, x: &[f64]) -> Result<f64> {
        check_dimension(self.weights.len(), x)?;
        Ok(dot(&self.weights, x) + self.bias)
    }

    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.linear_score(x)?))
    }
}

#[derive(Debug, Clone)]
pub struct LogRegFit {
    pub model: LogRegModel,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Mean loss before the first iteration and after each one.
    pub loss_history: Vec<f64>,
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn mean_loss(rows: &[&[f64]], signs: &[f64], w: &[f64], b: f64) -> f64 {
    let total: f64 = rows
        .iter()
        .zip(signs)
        .map(|(x, y)| softplus(-y * (dot(w, x) + b)))
        .sum();
    total / rows.len() as f64
}

/// Mean cross-entropy and its gradient with respect to `(weights, bias)`.
/// Labels map to `y = ±1`, so the per-example loss is `log(1 + exp(-y z))`.
pub fn loss_and_gradient<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[Label],
    weights: &[f64],
    bias: f64,
) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let x = x.as_ref();
        let s = y.sign();
        let z = dot(weights, x) + bias;
        loss += softplus(-s * z);
        // d/dz log(1+exp(-s z)) = -s σ(-s z)
        let g = -s * sigmoid(-s * z);
        for (gw, xi) in grad_w.iter_mut().zip(x) {
            *gw += g * xi;
        }
        grad_b += g;
    }
    grad_w.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad_w, grad_b / n)
}

fn inf_norm(grad_w: &[f64], grad_b: f64) -> f64 {
    grad_w.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()))
}

pub fn train_logreg<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[Label],
    hyper: &LogRegHyper,
) -> Result<LogRegFit> {
    hyper.validate()?;
    let dim = validate_training(xs, ys)?;
    let rows: Vec<&[f64]> = xs.iter().map(AsRef::as_ref).collect();
    match hyper.solver.regime() {
        SolverRegime::Newton => newton(&rows, ys, dim, hyper),
        SolverRegime::AveragedSgd => averaged_sgd(&rows, ys, dim, hyper),
    }
}

fn newton(rows: &[&[f64]], ys: &[Label], dim: usize, hyper: &LogRegHyper) -> Result<LogRegFit> {
    let n = rows.len() as f64;
    let p = dim + 1;
    let signs: Vec<f64> = ys.iter().map(|y| y.sign()).collect();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let (mut loss, mut gw, mut gb) = loss_and_gradient(rows, ys, &w, b);
    let mut history = vec![loss];
    let mut iterations = 0;
    let mut converged = inf_norm(&gw, gb) < hyper.tolerance;

    while !converged && iterations < hyper.max_iter as usize {
        iterations += 1;
        let mut hessian = DMatrix::<f64>::zeros(p, p);
        for x in rows {
            let z = dot(&w, x) + b;
            let s = sigmoid(z);
            let weight = s * (1.0 - s);
            if weight == 0.0 {
                continue;
            }
            for i in 0..p {
                let xi = if i < dim { x[i] } else { 1.0 };
                let wxi = weight * xi;
                for j in 0..=i {
                    let xj = if j < dim { x[j] } else { 1.0 };
                    hessian[(i, j)] += wxi * xj;
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                hessian[(j, i)] = hessian[(i, j)];
            }
        }
        hessian /= n;
        let grad = DVector::from_iterator(p, gw.iter().copied().chain(std::iter::once(gb)));
        let scale = (hessian.trace() / p as f64).max(f64::MIN_POSITIVE);
        let mut damping = 1e-10 * scale;
        let direction = loop {
            let mut damped = hessian.clone();
            for i in 0..p {
                damped[(i, i)] += damping;
            }
            if let Some(chol) = damped.cholesky() {
                break -chol.solve(&grad);
            }
            damping *= 100.0;
            if damping > 1e12 * scale.max(1.0) {
                return Err(ClassifierError::Numerical(
                    "Newton system is not positive definite".into(),
                ));
            }
        };
        let slope = grad.dot(&direction);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let w_new: Vec<f64> = w
                .iter()
                .zip(direction.iter())
                .map(|(a, d)| a + step * d)
                .collect();
            let b_new = b + step * direction[dim];
            let l_new = mean_loss(rows, &signs, &w_new, b_new);
            if l_new <= loss + 1e-4 * step * slope {
                accepted = Some((w_new, b_new));
                break;
            }
            step *= 0.5;
        }
        let Some((w_new, b_new)) = accepted else {
            break;
        };
        w = w_new;
        b = b_new;
        (loss, gw, gb) = loss_and_gradient(rows, ys, &w, b);
        history.push(loss);
        converged = inf_norm(&gw, gb) < hyper.tolerance;
    }
    Ok(LogRegFit {
        gradient_norm: inf_norm(&gw, gb),
        model: LogRegModel {
            weights: w,
            bias: b,
            hyper: *hyper,
        },
        converged,
        iterations,
        loss_history: history,
    })
}

fn averaged_sgd(
    rows: &[&[f64]],
    ys: &[Label],
    dim: usize,
    hyper: &LogRegHyper,
) -> Result<LogRegFit> {
    let radius_sq = rows.iter().map(|x| dot(x, x) + 1.0).fold(0.0f64, f64::max);
    let step = 1.0 / (2.0 * radius_sq);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut avg_w = vec![0.0; dim];
    let mut avg_b = 0.0;
    let mut steps = 0usize;

    let (loss, gw, gb) = loss_and_gradient(rows, ys, &avg_w, avg_b);
    let mut history = vec![loss];
    let mut grad_norm = inf_norm(&gw, gb);
    let mut converged = grad_norm < hyper.tolerance;
    let mut epochs = 0;
    while !converged && epochs < hyper.max_iter as usize {
        epochs += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            let x = rows[i];
            let s = ys[i].sign();
            let z = dot(&w, x) + b;
            let g = -s * sigmoid(-s * z);
            for (wj, xj) in w.iter_mut().zip(x) {
                *wj -= step * g * xj;
            }
            b -= step * g;
            steps += 1;
            let t = steps as f64;
            for (a, wj) in avg_w.iter_mut().zip(&w) {
                *a += (wj - *a) / t;
            }
            avg_b += (b - avg_b) / t;
        }
        let (loss, gw, gb) = loss_and_gradient(rows, ys, &avg_w, avg_b);
        history.push(loss);
        grad_norm = inf_norm(&gw, gb);
        converged = grad_norm < hyper.tolerance;
    }
    Ok(LogRegFit {
        model: LogRegModel {
            weights: avg_w,
            bias: avg_b,
            hyper: *hyper,
        },
        converged,
        iterations: epochs,
        gradient_norm: grad_norm,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn labels(v: &[i32]) -> Vec<Label> {
        v.iter()
            .map(|&s| {
                if s > 0 {
                    Label::Paraphrased
                } else {
                    Label::Original
                }
            })
            .collect()
    }

    #[test]
    fn separable_1d() {
        let xs = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let ys = labels(&[-1, -1, 1, 1]);
        for solver in LrSolver::ALL {
            let hyper = LogRegHyper {
                solver,
                max_iter: 200,
                tolerance: 1e-3,
                ..Default::default()
            };
            let fit = train_logreg(&xs, &ys, &hyper).unwrap();
            assert!(fit.model.weights[0] > 0.0, "{solver}");
            for (x, y) in xs.iter().zip(&ys) {
                let p = fit.model.probability(x).unwrap();
                assert_eq!(p > 0.5, y.is_positive(), "{solver}");
            }
        }
    }

    #[test]
    fn newton_loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys: Vec<Label> = xs
            .iter()
            .map(|x| {
                if x[0] - 0.5 * x[2] + rng.random_range(-1.0..1.0) > 0.0 {
                    Label::Paraphrased
                } else {
                    Label::Original
                }
            })
            .collect();
        let fit = train_logreg(
            &xs,
            &ys,
            &LogRegHyper {
                tolerance: 1e-10,
                max_iter: 100,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.loss_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.gradient_norm < 1e-10);

        let sgd = train_logreg(
            &xs,
            &ys,
            &LogRegHyper {
                solver: LrSolver::Saga,
                tolerance: 1e-3,
                max_iter: 1500,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(sgd.converged);
        let newton_loss = *fit.loss_history.last().unwrap();
        assert!(sgd.loss_history.last().unwrap() - newton_loss < 1e-3);
    }

    #[test]
    fn duplicating_data_keeps_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<Label> = xs
            .iter()
            .map(|x| {
                if x[1] + rng.random_range(-0.8..0.8) > 0.0 {
                    Label::Paraphrased
                } else {
                    Label::Original
                }
            })
            .collect();
        let hyper = LogRegHyper {
            tolerance: 1e-12,
            max_iter: 100,
            ..Default::default()
        };
        let once = train_logreg(&xs, &ys, &hyper).unwrap().model;
        let xs2: Vec<Vec<f64>> = xs.iter().flat_map(|x| [x.clone(), x.clone()]).collect();
        let ys2: Vec<Label> = ys.iter().flat_map(|y| [*y, *y]).collect();
        let twice = train_logreg(&xs2, &ys2, &hyper).unwrap().model;
        for (a, b) in once.weights.iter().zip(&twice.weights) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!((once.bias - twice.bias).abs() < 1e-9);
    }

    #[test]
    fn hyper_validation_and_single_class() {
        let xs = vec![vec![0.0], vec![1.0]];
        let ys = labels(&[1, 1]);
        assert!(matches!(
            train_logreg(&xs, &ys, &LogRegHyper::default()),
            Err(ClassifierError::SingleClass(_))
        ));
        let bad = LogRegHyper {
            max_iter: 0,
            ..Default::default()
        };
        assert!(train_logreg(&xs, &labels(&[1, -1]), &bad).is_err());
        let bad = LogRegHyper {
            tolerance: 0.0,
            ..Default::default()
        };
        assert!(train_logreg(&xs, &labels(&[1, -1]), &bad).is_err());
    }

    #[test]
    fn zero_model_scores_half() {
        let m = LogRegModel {
            weights: vec![0.0; 3],
            bias: 0.0,
            hyper: LogRegHyper::default(),
        };
        assert_eq!(m.probability(&[1.0, -4.0, 9.0]).unwrap(), 0.5);
        assert!(m.probability(&[1.0]).is_err());
    }

    #[test]
    fn solver_names_parse() {
        for s in LrSolver::ALL {
            assert_eq!(s.as_str().parse::<LrSolver>().unwrap(), s);
        }
        assert!("liblinear".parse::<LrSolver>().is_err());
    }
}
