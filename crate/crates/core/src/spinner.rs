//! A deterministic synonym spinner.
//!
//! Every `k`-th token (1-indexed positions `k, 2k, ...`) is an attempted
//! replacement. The attempt succeeds when the token is a headword of the
//! [`SynonymDict`]; the substitute is either the first listed synonym or one
//! drawn uniformly with a ChaCha8 generator (`rand_chacha`) seeded from
//! [`SpinConfig::seed`] through `SeedableRng::seed_from_u64`. Positions count
//! all tokens, so the realized replacement ratio never exceeds `1/k`.
//!
//! Synonym files hold one entry per line: a lowercase headword, a TAB, then
//! comma-separated single-token synonyms. Blank lines and lines starting
//! with `#` are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{token_spans, tokenize};
use crate::Loaded;

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("spin frequency must be at least 1")]
    ZeroFrequency,
    #[error("replacement ratio needs at least one token")]
    NoTokens,
    #[error("synonym file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SpinError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynonymChoice {
    #[default]
    First,
    UniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinConfig {
    frequency_k: u32,
    pub seed: u64,
    pub choice: SynonymChoice,
}

impl SpinConfig {
    pub fn new(frequency_k: u32, seed: u64, choice: SynonymChoice) -> Result<Self> {
        if frequency_k == 0 {
            return Err(SpinError::ZeroFrequency);
        }
        Ok(SpinConfig {
            frequency_k,
            seed,
            choice,
        })
    }

    pub fn frequency_k(&self) -> u32 {
        self.frequency_k
    }

    /// The same configuration with a different seed.
    pub fn with_seed(self, seed: u64) -> Self {
        SpinConfig { seed, ..self }
    }
}

/// Headword to ordered synonym list. Keys are lowercase, lists are
/// non-empty and never contain their own headword.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymDict {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymDict {
    /// Builds a dictionary, lowercasing everything, dropping self-synonyms
    /// and repeated synonyms, and merging repeated headwords. Every dropped
    /// item is reported as a warning; entries left empty are removed.
    pub fn from_entries<I, K, V>(entries: I) -> Loaded<SynonymDict>
    where
        I: IntoIterator<Item = (K, Vec<V>)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut dict = SynonymDict::default();
        let mut warnings = Vec::new();
        for (head, synonyms) in entries {
            let head = head.as_ref().to_lowercase();
            let list = dict.entries.entry(head.clone()).or_default();
            for syn in synonyms {
                let syn = syn.as_ref().to_lowercase();
                if syn == head {
                    warnings.push(format!("dropped self-synonym {head:?}"));
                } else if list.contains(&syn) {
                    warnings.push(format!("dropped repeated synonym {syn:?} for {head:?}"));
                } else {
                    list.push(syn);
                }
            }
            if list.is_empty() {
                dict.entries.remove(&head);
            }
        }
        Loaded {
            value: dict,
            warnings,
        }
    }

    pub fn get(&self, token: &str) -> Option<&[String]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Serializes in the synonym file format, sorted by headword.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (head, syns) in &self.entries {
            out.push_str(head);
            out.push('\t');
            out.push_str(&syns.join(","));
            out.push('\n');
        }
        out
    }
}

fn is_single_token(word: &str) -> bool {
    tokenize(word) == [word]
}

pub fn parse_synonyms(content: &str) -> Result<Loaded<SynonymDict>> {
    let mut raw = Vec::new();
    for (n, line) in content.lines().enumerate() {
        let line_no = n + 1;
        let malformed = |reason: String| SpinError::Malformed {
            line: line_no,
            reason,
        };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (head, rest) = line
            .split_once('\t')
            .ok_or_else(|| malformed("missing TAB after headword".into()))?;
        if rest.contains('\t') {
            return Err(malformed("more than one TAB".into()));
        }
        let head = head.to_lowercase();
        if !is_single_token(&head) {
            return Err(malformed(format!(
                "headword {head:?} is not a single token"
            )));
        }
        let mut synonyms = Vec::new();
        for syn in rest.split(',') {
            let syn = syn.trim().to_lowercase();
            if !is_single_token(&syn) {
                return Err(malformed(format!("synonym {syn:?} is not a single token")));
            }
            synonyms.push(syn);
        }
        raw.push((head, synonyms));
    }
    Ok(SynonymDict::from_entries(raw))
}

pub fn load_synonyms(path: impl AsRef<Path>) -> Result<Loaded<SynonymDict>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| SpinError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let loaded = parse_synonyms(&content)?;
    for w in &loaded.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(loaded)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub token_index: usize,
    pub original: String,
    pub substitute: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinResult {
    pub spun_text: String,
    pub replacements: Vec<Replacement>,
    pub attempted: usize,
    pub replaced: usize,
}

fn plan(tokens: &[&str], dict: &SynonymDict, cfg: &SpinConfig) -> (Vec<Replacement>, usize) {
    let k = cfg.frequency_k as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut replacements = Vec::new();
    let mut attempted = 0;
    for index in (k - 1..tokens.len()).step_by(k) {
        attempted += 1;
        let token = tokens[index];
        if let Some(synonyms) = dict.get(token) {
            let substitute = match cfg.choice {
                SynonymChoice::First => &synonyms[0],
                SynonymChoice::UniformRandom => &synonyms[rng.random_range(0..synonyms.len())],
            };
            replacements.push(Replacement {
                token_index: index,
                original: token.to_string(),
                substitute: substitute.clone(),
            });
        }
    }
    (replacements, attempted)
}

/// Spins a token sequence. The output text is the spun tokens joined by
/// single spaces.
pub fn spin<S: AsRef<str>>(tokens: &[S], dict: &SynonymDict, cfg: &SpinConfig) -> SpinResult {
    let refs: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    let (replacements, attempted) = plan(&refs, dict, cfg);
    let mut spun: Vec<&str> = refs.clone();
    for r in &replacements {
        spun[r.token_index] = &r.substitute;
    }
    SpinResult {
        spun_text: spun.join(" "),
        replaced: replacements.len(),
        replacements,
        attempted,
    }
}

/// Spins running text in place: the same replacements [`spin`] would make on
/// `tokenize(text)`, but punctuation, spacing and line breaks are kept and a
/// capitalized word gets a capitalized substitute.
pub fn spin_text(text: &str, dict: &SynonymDict, cfg: &SpinConfig) -> SpinResult {
    let spans = token_spans(text);
    let refs: Vec<&str> = spans.iter().map(|(_, t)| t.as_str()).collect();
    let (replacements, attempted) = plan(&refs, dict, cfg);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for r in &replacements {
        let range = spans[r.token_index].0.clone();
        out.push_str(&text[cursor..range.start]);
        let original = &text[range.clone()];
        if original.chars().next().is_some_and(char::is_uppercase) {
            let mut chars = r.substitute.chars();
            if let Some(first) = chars.next() {
                out.extend(first.to_uppercase());
                out.push_str(chars.as_str());
            }
        } else {
            out.push_str(&r.substitute);
        }
        cursor = range.end;
    }
    out.push_str(&text[cursor..]);
    SpinResult {
        spun_text: out,
        replaced: replacements.len(),
        replacements,
        attempted,
    }
}

pub fn replacement_ratio(result: &SpinResult, total_tokens: usize) -> Result<f64> {
    if total_tokens == 0 {
        return Err(SpinError::NoTokens);
    }
    Ok(result.replaced as f64 / total_tokens as f64)
}

/// Seed for one paragraph, derived from the run seed and the paragraph's
/// identity with SHA-256 so that it is stable across platforms and runs.
pub fn paragraph_seed(base_seed: u64, doc_id: &str, index: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update((doc_id.len() as u64).to_le_bytes());
    hasher.update(doc_id.as_bytes());
    hasher.update((index as u64).to_le_bytes());
    let digest = hasher.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}
