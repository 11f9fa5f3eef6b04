//! Train on one spinner frequency, test on others.
//!
//! A run generates a [`World`], draws `paragraphs` paragraphs, and splits
//! them in half. The first half plus its spun copies at `train_k` form the
//! training set. Each test set holds the second half plus its spun copies at
//! one of `test_ks`. Paragraph spin seeds come from
//! [`paragraph_seed`](crate::spinner::paragraph_seed), so every run is a pure
//! function of its seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{Classifier, ClassifierError, Hyper, LogRegHyper};
use crate::corpus::{tokenize, Label};
use crate::embeddings::{average_batch, EmbeddingError, OovPolicy};
use crate::evaluation::{transfer_eval, EvalError, Testset, TestsetResult};
use crate::spinner::{paragraph_seed, spin_text, SpinConfig, SpinError, SynonymChoice};
use crate::synthetic::{World, WorldConfig};
use crate::Execution;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("need at least 4 paragraphs, got {0}")]
    TooFewParagraphs(usize),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub world: WorldConfig,
    pub paragraphs: usize,
    pub train_k: u32,
    pub test_ks: Vec<u32>,
    pub hyper: Hyper,
    pub standardize: bool,
    pub choice: SynonymChoice,
    pub policy: OovPolicy,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            world: WorldConfig::default(),
            paragraphs: 2000,
            train_k: 2,
            test_ks: vec![2, 4],
            hyper: Hyper::LogReg(LogRegHyper {
                max_iter: 100,
                tolerance: 1e-6,
                ..Default::default()
            }),
            standardize: true,
            choice: SynonymChoice::UniformRandom,
            policy: OovPolicy::Skip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub seed: u64,
    /// One entry per `test_ks` value, named `k<k>`.
    pub results: Vec<TestsetResult>,
    /// Mean replaced/total over the spun test paragraphs, per `test_ks` value.
    pub replacement_ratios: Vec<f64>,
}

impl TransferOutcome {
    pub fn f1(&self, k: u32) -> Option<f64> {
        let name = format!("k{k}");
        self.results
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.f1_micro)
    }
}

struct SpunSet {
    tokens: Vec<Vec<String>>,
    labels: Vec<Label>,
    mean_ratio: f64,
}

fn build_set(
    world: &World,
    texts: &[String],
    offset: usize,
    k: u32,
    seed: u64,
    choice: SynonymChoice,
) -> Result<SpunSet> {
    let mut tokens = Vec::with_capacity(2 * texts.len());
    let mut labels = Vec::with_capacity(2 * texts.len());
    let mut ratio_sum = 0.0;
    for (i, text) in texts.iter().enumerate() {
        let cfg = SpinConfig::new(k, paragraph_seed(seed, "synthetic", offset + i), choice)?;
        let spun = spin_text(text, &world.synonyms, &cfg);
        let original = tokenize(text);
        ratio_sum += spun.replaced as f64 / original.len() as f64;
        tokens.push(original);
        labels.push(Label::Original);
        tokens.push(tokenize(&spun.spun_text));
        labels.push(Label::Paraphrased);
    }
    Ok(SpunSet {
        tokens,
        labels,
        mean_ratio: ratio_sum / texts.len() as f64,
    })
}

fn features(
    world: &World,
    set: &SpunSet,
    policy: OovPolicy,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    Ok(average_batch(&world.embeddings, &set.tokens, policy, exec)?
        .into_iter()
        .map(|f| f.values)
        .collect())
}

/// One complete transfer run. `exec` parallelizes featurization and
/// prediction inside the run.
pub fn run_transfer(cfg: &TransferConfig, seed: u64, exec: Execution) -> Result<TransferOutcome> {
    if cfg.paragraphs < 4 {
        return Err(ExperimentError::TooFewParagraphs(cfg.paragraphs));
    }
    let world = World::generate(cfg.world.clone(), seed);
    let texts = world.paragraphs(cfg.paragraphs, seed.wrapping_add(1));
    let (train_texts, test_texts) = texts.split_at(cfg.paragraphs / 2);

    let train = build_set(&world, train_texts, 0, cfg.train_k, seed, cfg.choice)?;
    let xs = features(&world, &train, cfg.policy, exec)?;
    let clf = Classifier::train(&cfg.hyper, &xs, &train.labels, cfg.standardize)?;

    let mut testsets = Vec::with_capacity(cfg.test_ks.len());
    let mut replacement_ratios = Vec::with_capacity(cfg.test_ks.len());
    for &k in &cfg.test_ks {
        let set = build_set(&world, test_texts, train_texts.len(), k, seed, cfg.choice)?;
        replacement_ratios.push(set.mean_ratio);
        testsets.push(Testset {
            name: format!("k{k}"),
            features: features(&world, &set, cfg.policy, exec)?,
            labels: set.labels,
        });
    }
    Ok(TransferOutcome {
        seed,
        results: transfer_eval(&clf, &testsets, exec)?,
        replacement_ratios,
    })
}

/// Independent runs, one per seed, in seed order. With parallel execution
/// the runs themselves are distributed and each runs sequentially inside.
pub fn run_transfer_seeds(
    cfg: &TransferConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<TransferOutcome>> {
    exec.map(seeds, |&s| run_transfer(cfg, s, Execution::Sequential))
        .into_iter()
        .collect()
}
