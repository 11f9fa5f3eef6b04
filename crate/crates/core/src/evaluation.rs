//! Metrics, grid search and transfer evaluation.
//!
//! `paraphrased` is the positive class of [`ConfusionCounts`]. F1-micro pools
//! the per-class counts of both classes, which for a binary task makes it
//! equal to accuracy.
//!
//! Reports are written in two forms. [`format_report`] produces a TOML
//! document with scores rounded to four decimals:
//!
//! ```text
//! [model]        algorithm, description, model_id
//! [[testset]]    name, examples, tp, fp, fn, tn, f1_micro, accuracy
//! [grid]         algorithm, winner, winner_params
//! [[grid.cell]]  id, params, validation_f1 | error
//! ```
//!
//! [`format_table`] produces a tab-separated table at full precision with
//! the header `section id params tp fp fn tn f1_micro accuracy winner error`;
//! `section` is `testset` or `grid` and fields that do not apply are empty.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{
    Algorithm, Classifier, ClassifierError, GnbHyper, Hyper, KernelSpec, LogRegHyper, LrSolver,
    MultiClass, SvmHyper,
};
use crate::corpus::Label;
use crate::Execution;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no examples to score")]
    Empty,
    #[error("test set {0:?} is empty")]
    EmptyTestset(String),
    #[error("grid axis {0:?} has no values")]
    EmptyAxis(&'static str),
    #[error("every grid cell failed; first error: {0}")]
    AllCellsFailed(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn from_labels(predictions: &[Label], labels: &[Label]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                predictions: predictions.len(),
                labels: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut c = ConfusionCounts::default();
        for (p, l) in predictions.iter().zip(labels) {
            match (p.is_positive(), l.is_positive()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Micro-averaged F1 over both classes from pooled true positives,
    /// false positives and false negatives.
    pub fn f1_micro(&self) -> f64 {
        // Per class: paraphrased (tp, fp, fn), original (tn, fn, fp).
        let tp = (self.tp + self.tn) as f64;
        let fp = (self.fp + self.fn_) as f64;
        let fn_ = (self.fn_ + self.fp) as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        }
    }
}

pub fn f1_micro(predictions: &[Label], labels: &[Label]) -> Result<f64> {
    Ok(ConfusionCounts::from_labels(predictions, labels)?.f1_micro())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
    Poly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegGrid {
    pub solver: Vec<LrSolver>,
    pub max_iter: Vec<u32>,
    pub multi_class: Vec<MultiClass>,
    pub tolerance: Vec<f64>,
}

impl Default for LogRegGrid {
    fn default() -> Self {
        LogRegGrid {
            solver: LrSolver::ALL.to_vec(),
            max_iter: vec![500, 1000, 1500],
            multi_class: vec![MultiClass::Ovr, MultiClass::Multinomial],
            tolerance: vec![1e-2, 1e-3, 1e-4, 1e-5],
        }
    }
}

/// Kernel-irrelevant axes are not expanded: linear cells vary only `c`, rbf
/// cells vary `gamma` and `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmGrid {
    pub kernel: Vec<KernelKind>,
    pub gamma: Vec<f64>,
    pub degree: Vec<u32>,
    pub c: Vec<f64>,
    pub coef0: f64,
    pub tol: f64,
}

impl Default for SvmGrid {
    fn default() -> Self {
        SvmGrid {
            kernel: vec![KernelKind::Linear, KernelKind::Rbf, KernelKind::Poly],
            gamma: vec![1e-2, 1e-3, 1e-4],
            degree: (1..=9).collect(),
            c: vec![1.0, 10.0, 100.0],
            coef0: 0.0,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnbGrid {
    pub var_smoothing: Vec<f64>,
}

impl Default for GnbGrid {
    fn default() -> Self {
        GnbGrid {
            var_smoothing: vec![GnbHyper::default().var_smoothing],
        }
    }
}

/// Hyperparameter values per classifier. Defaults are the standard grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub logreg: LogRegGrid,
    pub svm: SvmGrid,
    pub gnb: GnbGrid,
}

fn non_empty<T>(axis: &'static str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(EvalError::EmptyAxis(axis))
    } else {
        Ok(())
    }
}

impl GridSpec {
    /// Cartesian product in declared axis order, first axis outermost.
    pub fn cells(&self, algorithm: Algorithm, seed: u64) -> Result<Vec<Hyper>> {
        let mut cells = Vec::new();
        match algorithm {
            Algorithm::LogReg => {
                let g = &self.logreg;
                non_empty("logreg.solver", &g.solver)?;
                non_empty("logreg.max_iter", &g.max_iter)?;
                non_empty("logreg.multi_class", &g.multi_class)?;
                non_empty("logreg.tolerance", &g.tolerance)?;
                for &solver in &g.solver {
                    for &max_iter in &g.max_iter {
                        for &multi_class in &g.multi_class {
                            for &tolerance in &g.tolerance {
                                cells.push(Hyper::LogReg(LogRegHyper {
                                    solver,
                                    max_iter,
                                    multi_class,
                                    tolerance,
                                    seed,
                                }));
                            }
                        }
                    }
                }
            }
            Algorithm::Svm => {
                let g = &self.svm;
                non_empty("svm.kernel", &g.kernel)?;
                non_empty("svm.c", &g.c)?;
                let svm = |kernel, c| {
                    Hyper::Svm(SvmHyper {
                        kernel,
                        c,
                        tol: g.tol,
                        max_iter: 0,
                    })
                };
                for &kind in &g.kernel {
                    match kind {
                        KernelKind::Linear => {
                            cells.extend(g.c.iter().map(|&c| svm(KernelSpec::Linear, c)));
                        }
                        KernelKind::Rbf => {
                            non_empty("svm.gamma", &g.gamma)?;
                            for &gamma in &g.gamma {
                                cells
                                    .extend(g.c.iter().map(|&c| svm(KernelSpec::Rbf { gamma }, c)));
                            }
                        }
                        KernelKind::Poly => {
                            non_empty("svm.gamma", &g.gamma)?;
                            non_empty("svm.degree", &g.degree)?;
                            for &gamma in &g.gamma {
                                for &degree in &g.degree {
                                    let kernel = KernelSpec::Poly {
                                        gamma,
                                        degree,
                                        coef0: g.coef0,
                                    };
                                    cells.extend(g.c.iter().map(|&c| svm(kernel, c)));
                                }
                            }
                        }
                    }
                }
            }
            Algorithm::Gnb => {
                non_empty("gnb.var_smoothing", &self.gnb.var_smoothing)?;
                cells.extend(
                    self.gnb
                        .var_smoothing
                        .iter()
                        .map(|&var_smoothing| Hyper::Gnb(GnbHyper { var_smoothing })),
                );
            }
        }
        Ok(cells)
    }
}

/// Row-index sets of a stratified split; both sorted ascending. Each class
/// contributes `round(val_fraction · count)` rows to validation, but never
/// all of them.
pub fn stratified_split(
    labels: &[Label],
    val_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [Label::Original, Label::Paraphrased] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let mut n_val = (val_fraction * idx.len() as f64).round() as usize;
        if n_val >= idx.len() {
            n_val = idx.len().saturating_sub(1);
        }
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub id: usize,
    pub hyper: Hyper,
    pub validation_f1: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub algorithm: Algorithm,
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the best validation score; ties go to the
    /// earliest cell.
    pub winner: usize,
}

impl GridReport {
    pub fn winner_hyper(&self) -> &Hyper {
        &self.rows[self.winner].hyper
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GridOptions {
    pub standardize: bool,
    pub exec: Execution,
}

/// Trains every cell on the training rows and scores F1-micro on the
/// validation rows. Failed cells stay in the table with their error.
pub fn grid_search<X: AsRef<[f64]> + Sync>(
    cells: &[Hyper],
    train: (&[X], &[Label]),
    val: (&[X], &[Label]),
    opts: GridOptions,
) -> Result<GridReport> {
    let algorithm = cells
        .first()
        .ok_or(EvalError::EmptyAxis("cells"))?
        .algorithm();
    let score_cell = |hyper: &Hyper| -> std::result::Result<f64, String> {
        let clf = Classifier::train(hyper, train.0, train.1, opts.standardize)
            .map_err(|e| e.to_string())?;
        let preds =
            predict_labels(&clf, val.0, Execution::Sequential).map_err(|e| e.to_string())?;
        f1_micro(&preds, val.1).map_err(|e| e.to_string())
    };
    let scores = opts.exec.map(cells, score_cell);
    let rows: Vec<GridRow> = cells
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(id, (hyper, score))| {
            let (validation_f1, error) = match score {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e)),
            };
            GridRow {
                id,
                hyper: *hyper,
                validation_f1,
                error,
            }
        })
        .collect();
    let mut winner: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(s) = row.validation_f1 {
            if winner.is_none_or(|w| s > rows[w].validation_f1.expect("scored")) {
                winner = Some(i);
            }
        }
    }
    let winner = winner.ok_or_else(|| {
        EvalError::AllCellsFailed(
            rows.first()
                .and_then(|r| r.error.clone())
                .unwrap_or_default(),
        )
    })?;
    Ok(GridReport {
        algorithm,
        rows,
        winner,
    })
}

pub fn predict_labels<X: AsRef<[f64]> + Sync>(
    clf: &Classifier,
    xs: &[X],
    exec: Execution,
) -> Result<Vec<Label>> {
    Ok(clf
        .predict_batch(xs, exec)?
        .into_iter()
        .map(|p| p.label)
        .collect())
}

/// A featurized, labeled test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Testset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestsetResult {
    pub name: String,
    pub counts: ConfusionCounts,
    pub f1_micro: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: Algorithm,
    pub description: String,
    pub model_id: String,
    pub testsets: Vec<TestsetResult>,
    pub grid: Option<GridReport>,
}

pub fn score_testset(
    clf: &Classifier,
    testset: &Testset,
    exec: Execution,
) -> Result<TestsetResult> {
    if testset.labels.is_empty() {
        return Err(EvalError::EmptyTestset(testset.name.clone()));
    }
    let preds = predict_labels(clf, &testset.features, exec)?;
    let counts = ConfusionCounts::from_labels(&preds, &testset.labels)?;
    Ok(TestsetResult {
        name: testset.name.clone(),
        f1_micro: counts.f1_micro(),
        accuracy: counts.accuracy(),
        counts,
    })
}

/// Scores a fixed model on each test set independently.
pub fn transfer_eval(
    clf: &Classifier,
    testsets: &[Testset],
    exec: Execution,
) -> Result<Vec<TestsetResult>> {
    testsets
        .iter()
        .map(|t| score_testset(clf, t, exec))
        .collect()
}

fn hyper_params(hyper: &Hyper) -> String {
    hyper.to_string()
}

pub fn format_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let q = |s: &str| format!("{s:?}");
    writeln!(out, "[model]").unwrap();
    writeln!(out, "algorithm = {}", q(report.algorithm.as_str())).unwrap();
    writeln!(out, "description = {}", q(&report.description)).unwrap();
    writeln!(out, "model_id = {}", q(&report.model_id)).unwrap();
    for t in &report.testsets {
        writeln!(out, "\n[[testset]]").unwrap();
        writeln!(out, "name = {}", q(&t.name)).unwrap();
        writeln!(out, "examples = {}", t.counts.total()).unwrap();
        writeln!(out, "tp = {}", t.counts.tp).unwrap();
        writeln!(out, "fp = {}", t.counts.fp).unwrap();
        writeln!(out, "fn = {}", t.counts.fn_).unwrap();
        writeln!(out, "tn = {}", t.counts.tn).unwrap();
        writeln!(out, "f1_micro = {:.4}", t.f1_micro).unwrap();
        writeln!(out, "accuracy = {:.4}", t.accuracy).unwrap();
    }
    if let Some(grid) = &report.grid {
        writeln!(out, "\n[grid]").unwrap();
        writeln!(out, "algorithm = {}", q(grid.algorithm.as_str())).unwrap();
        writeln!(out, "winner = {}", grid.winner).unwrap();
        writeln!(
            out,
            "winner_params = {}",
            q(&hyper_params(grid.winner_hyper()))
        )
        .unwrap();
        for row in &grid.rows {
            writeln!(out, "\n[[grid.cell]]").unwrap();
            writeln!(out, "id = {}", row.id).unwrap();
            writeln!(out, "params = {}", q(&hyper_params(&row.hyper))).unwrap();
            if let Some(s) = row.validation_f1 {
                writeln!(out, "validation_f1 = {s:.4}").unwrap();
            }
            if let Some(e) = &row.error {
                writeln!(out, "error = {}", q(e)).unwrap();
            }
        }
    }
    out
}

fn tsv_clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn format_table(report: &EvalReport) -> String {
    let mut out =
        String::from("section\tid\tparams\ttp\tfp\tfn\ttn\tf1_micro\taccuracy\twinner\terror\n");
    for t in &report.testsets {
        let c = &t.counts;
        writeln!(
            out,
            "testset\t{}\t\t{}\t{}\t{}\t{}\t{}\t{}\t\t",
            tsv_clean(&t.name),
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            t.f1_micro,
            t.accuracy
        )
        .unwrap();
    }
    if let Some(grid) = &report.grid {
        for row in &grid.rows {
            writeln!(
                out,
                "grid\t{}\t{}\t\t\t\t\t{}\t\t{}\t{}",
                row.id,
                tsv_clean(&hyper_params(&row.hyper)),
                row.validation_f1.map(|s| s.to_string()).unwrap_or_default(),
                u8::from(row.id == grid.winner),
                row.error.as_deref().map(tsv_clean).unwrap_or_default()
            )
            .unwrap();
        }
    }
    out
}
