//! Pipeline commands behind the `spindetect` binary, plus the HTTP service.
//!
//! Each command validates every input path before starting work and writes
//! its outputs deterministically: the same inputs and seed give byte-identical
//! dataset, model and report files.

pub mod cli;
pub mod commands;
pub mod server;

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use spindetect::classifiers::model_file;
use spindetect::corpus::split_text_paragraphs;
use spindetect::embeddings::{self, average_embedding, load_subword_table};
use spindetect::{Classifier, EmbeddingModel, Label, OovPolicy};

/// A loaded model with the vectors and policy used to featurize its input.
#[derive(Debug)]
pub struct Detector {
    pub classifier: Classifier,
    pub vectors: EmbeddingModel,
    pub policy: OovPolicy,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphPrediction {
    pub index: usize,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub paragraphs: Vec<ParagraphPrediction>,
    pub model_id: String,
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    ensure!(
        path.is_file(),
        "{what} {} does not exist or is not a file",
        path.display()
    );
    Ok(())
}

pub fn require_output(path: &Path) -> Result<()> {
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    ensure!(
        parent.is_dir(),
        "output directory {} does not exist",
        parent.display()
    );
    Ok(())
}

pub fn load_embeddings(vectors: &Path, subwords: Option<&Path>) -> Result<EmbeddingModel> {
    let loaded = embeddings::load_vectors(vectors)
        .with_context(|| format!("loading vectors {}", vectors.display()))?;
    for w in &loaded.warnings {
        log::warn!("{}: {w}", vectors.display());
    }
    let mut model = loaded.value;
    if let Some(path) = subwords {
        let table = load_subword_table(path)
            .with_context(|| format!("loading subwords {}", path.display()))?;
        model = model.with_subwords(table)?;
    }
    Ok(model)
}

impl Detector {
    pub fn load(
        model: &Path,
        vectors: &Path,
        subwords: Option<&Path>,
        policy: OovPolicy,
    ) -> Result<Detector> {
        require_file(model, "model")?;
        require_file(vectors, "vectors")?;
        if let Some(s) = subwords {
            require_file(s, "subword table")?;
        }
        let classifier = model_file::load_model(model)
            .with_context(|| format!("loading model {}", model.display()))?;
        let vectors = load_embeddings(vectors, subwords)?;
        ensure!(
            classifier.dimension() == vectors.dimension(),
            "model expects {}-dimensional features but the vectors have dimension {}",
            classifier.dimension(),
            vectors.dimension()
        );
        let model_id = model_file::model_id(&classifier);
        Ok(Detector {
            classifier,
            vectors,
            policy,
            model_id,
        })
    }

    /// Splits `text` into paragraphs and classifies each one that passes
    /// the three-sentence filter.
    pub fn classify_text(&self, text: &str) -> Result<Classification> {
        let paragraphs = split_text_paragraphs("input", text);
        if paragraphs.is_empty() {
            bail!("no qualifying paragraph: every paragraph needs at least 3 sentences");
        }
        let mut out = Vec::with_capacity(paragraphs.len());
        for p in &paragraphs {
            let tokens: Vec<&str> = p.tokens().collect();
            let features = average_embedding(&self.vectors, &tokens, self.policy)?;
            let prediction = self.classifier.predict(&features.values)?;
            out.push(ParagraphPrediction {
                index: p.index,
                label: prediction.label,
                score: prediction.score,
            });
        }
        Ok(Classification {
            paragraphs: out,
            model_id: self.model_id.clone(),
        })
    }
}
