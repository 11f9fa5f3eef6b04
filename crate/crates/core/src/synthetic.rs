//! A generated language for reproducible end-to-end runs.
//!
//! A world holds a pseudo-word vocabulary with Zipf-distributed frequencies,
//! an embedding for every word, and a thesaurus mapping some vocabulary words
//! to synonyms outside the vocabulary. A synonym's vector is its headword's
//! vector plus a shared offset `shift · u` and isotropic noise, so replacing
//! words moves the paragraph mean along `u` in proportion to the number of
//! replacements.

use std::collections::HashSet;

use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Source};
use crate::embeddings::EmbeddingModel;
use crate::spinner::SynonymDict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub dimension: usize,
    pub vocab_size: usize,
    pub zipf_exponent: f64,
    /// Fraction of the vocabulary that has synonyms.
    pub coverage: f64,
    pub synonyms_per_word: usize,
    pub shift: f64,
    pub synonym_noise: f64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            dimension: 50,
            vocab_size: 1000,
            zipf_exponent: 1.0,
            coverage: 1.0,
            synonyms_per_word: 2,
            shift: 0.12,
            synonym_noise: 0.3,
            min_sentences: 3,
            max_sentences: 6,
            min_words: 6,
            max_words: 14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    /// Ordered by frequency rank.
    pub vocabulary: Vec<String>,
    pub embeddings: EmbeddingModel,
    pub synonyms: SynonymDict,
    /// Unit vector along which synonyms are offset.
    pub direction: Vec<f64>,
}

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br",
    "st", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("non-empty"));
        w.push_str(VOWELS.choose(rng).expect("non-empty"));
    }
    w
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

impl World {
    /// # Panics
    /// If the configuration is degenerate (zero dimension or vocabulary,
    /// empty sentence or word ranges).
    pub fn generate(config: WorldConfig, seed: u64) -> World {
        assert!(config.dimension > 0 && config.vocab_size > 0, "empty world");
        assert!(config.min_sentences >= 1 && config.min_sentences <= config.max_sentences);
        assert!(config.min_words >= 1 && config.min_words <= config.max_words);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = config.dimension;
        let unit = 1.0 / (dim as f64).sqrt();

        let n_covered =
            ((config.coverage.clamp(0.0, 1.0) * config.vocab_size as f64).round()) as usize;
        let n_words = config.vocab_size + n_covered * config.synonyms_per_word;
        let mut seen = HashSet::new();
        let mut words = Vec::with_capacity(n_words);
        while words.len() < n_words {
            let w = pseudo_word(&mut rng);
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        let synonym_words = words.split_off(config.vocab_size);
        let vocabulary = words;

        let mut direction = gaussian_vector(&mut rng, dim, 1.0);
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        direction.iter_mut().for_each(|x| *x /= norm);

        let mut embeddings = EmbeddingModel::new(dim);
        let mut head_vectors = Vec::with_capacity(vocabulary.len());
        for w in &vocabulary {
            let v = gaussian_vector(&mut rng, dim, unit);
            embeddings
                .insert(w.clone(), to_f32(&v))
                .expect("finite vector");
            head_vectors.push(v);
        }

        let mut covered: Vec<usize> = (0..vocabulary.len()).collect();
        covered.shuffle(&mut rng);
        covered.truncate(n_covered);
        covered.sort_unstable();
        let mut entries = Vec::with_capacity(n_covered);
        let mut syn_iter = synonym_words.into_iter();
        for &h in &covered {
            let mut syns = Vec::with_capacity(config.synonyms_per_word);
            for _ in 0..config.synonyms_per_word {
                let s = syn_iter.next().expect("enough synonym words");
                let noise = gaussian_vector(&mut rng, dim, config.synonym_noise * unit);
                let v: Vec<f64> = head_vectors[h]
                    .iter()
                    .zip(&direction)
                    .zip(&noise)
                    .map(|((x, u), e)| x + config.shift * u + e)
                    .collect();
                embeddings
                    .insert(s.clone(), to_f32(&v))
                    .expect("finite vector");
                syns.push(s);
            }
            entries.push((vocabulary[h].clone(), syns));
        }
        let synonyms = SynonymDict::from_entries(entries).value;
        World {
            config,
            vocabulary,
            embeddings,
            synonyms,
            direction,
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, zipf: &Zipf<f64>) -> String {
        let n = rng.random_range(self.config.min_words..=self.config.max_words);
        let mut s = String::new();
        for i in 0..n {
            let rank = zipf.sample(rng) as usize - 1;
            let w = &self.vocabulary[rank.min(self.vocabulary.len() - 1)];
            if i == 0 {
                let mut c = w.chars();
                let first = c.next().expect("non-empty word");
                s.extend(first.to_uppercase());
                s.push_str(c.as_str());
            } else {
                s.push(' ');
                s.push_str(w);
            }
            if i + 1 < n && i > 1 && rng.random_bool(0.08) {
                s.push(',');
            }
        }
        s.push('.');
        s
    }

    fn zipf(&self) -> Zipf<f64> {
        Zipf::new(self.vocabulary.len() as f64, self.config.zipf_exponent)
            .expect("valid zipf parameters")
    }

    /// One paragraph of `min_sentences..=max_sentences` sentences.
    pub fn paragraph(&self, rng: &mut ChaCha8Rng) -> String {
        let zipf = self.zipf();
        let n = rng.random_range(self.config.min_sentences..=self.config.max_sentences);
        (0..n)
            .map(|_| self.sentence(rng, &zipf))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn paragraphs(&self, n: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.paragraph(&mut rng)).collect()
    }

    /// Documents of blank-line separated paragraphs. Each document starts
    /// with a one-line title and has a two-sentence block after its first
    /// paragraph; neither passes the paragraph filter.
    pub fn documents(&self, n_docs: usize, paragraphs_per_doc: usize, seed: u64) -> Vec<Document> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zipf = self.zipf();
        (0..n_docs)
            .map(|d| {
                let mut blocks = vec![self
                    .sentence(&mut rng, &zipf)
                    .trim_end_matches('.')
                    .to_string()];
                for p in 0..paragraphs_per_doc {
                    blocks.push(self.paragraph(&mut rng));
                    if p == 0 {
                        blocks.push(format!(
                            "{} {}",
                            self.sentence(&mut rng, &zipf),
                            self.sentence(&mut rng, &zipf)
                        ));
                    }
                }
                Document::new(
                    format!("doc{d:04}"),
                    Source::Synthetic,
                    &blocks.join("\n\n"),
                )
                .expect("non-empty document")
            })
            .collect()
    }
}
