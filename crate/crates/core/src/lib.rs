//! Detection of machine-paraphrased ("spun") paragraphs.
//!
//! Paragraphs are embedded as the mean of their pre-trained word vectors and
//! classified with logistic regression, a kernel SVM trained by SMO, or
//! Gaussian naive Bayes. A deterministic synonym spinner produces paraphrased
//! training and test data with a controllable replacement frequency, so that
//! transfer between spinner settings can be measured end to end.
//!
//! Module map:
//!
//! * [`corpus`]: tokenization, sentence and paragraph segmentation, dataset files
//! * [`spinner`]: every-k-th-word synonym replacement
//! * [`embeddings`]: text/binary vector files, subword composition, averaging
//! * [`classifiers`]: logistic regression, SMO SVM, Gaussian NB, model files
//! * [`evaluation`]: F1-micro, grid search, transfer evaluation, reports
//! * [`synthetic`]: a generated vocabulary/embedding/thesaurus world for
//!   reproducible experiments
//! * [`experiment`]: the train-on-k, test-on-k' transfer harness
//!
//! Batch operations take an [`Execution`] argument. With the `parallel`
//! feature (default) [`Execution::Parallel`] runs on the rayon pool; without
//! it every batch operation runs sequentially.

pub mod classifiers;
pub mod corpus;
pub mod embeddings;
pub mod evaluation;
mod exec;
pub mod experiment;
pub mod spinner;
pub mod synthetic;

pub use exec::Execution;

pub use classifiers::{Classifier, Prediction};
pub use corpus::{Document, Label, LabeledExample, Paragraph, Source, Tool};
pub use embeddings::{EmbeddingModel, FeatureVector, OovPolicy};
pub use spinner::{SpinConfig, SpinResult, SynonymDict};

/// A loaded value together with the non-fatal problems found while loading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}
