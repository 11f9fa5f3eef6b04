//! Pre-trained word vectors and averaged paragraph features.
//!
//! Three file formats are supported:
//!
//! * text vectors: `token f1 ... fD` per line, optionally preceded by a
//!   `count D` header line (GloVe files have none, fastText `.vec` files do);
//! * binary vectors: an ASCII header `count D\n`, then per entry the token
//!   bytes, one space, and `D` little-endian `f32` values (newlines before a
//!   token are skipped when reading, as written by the original word2vec tool);
//! * subword tables: a `min_n max_n D` header, then `ngram f1 ... fD` lines.
//!
//! Vectors are stored as `f32` and accumulated in `f64`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Execution, Loaded};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error(
        "truncated binary vectors at entry {entry}: expected {expected} more bytes, found {actual}"
    )]
    Truncated {
        entry: usize,
        expected: usize,
        actual: usize,
    },
    #[error("invalid vector for {token:?}: {reason}")]
    InvalidVector { token: String, reason: String },
    #[error("cannot average an empty token list")]
    EmptyTokens,
    #[error("subword composition requested but the model has no subword table")]
    NoSubwords,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Treatment of tokens without a vector when averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Ignore them; the mean is over covered tokens only.
    #[default]
    Skip,
    /// Try the subword table first, then skip.
    SubwordCompose,
    /// Count them as zero vectors; the mean is over all tokens.
    Zero,
}

impl FromStr for OovPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "skip" => Ok(OovPolicy::Skip),
            "subword" | "subword_compose" => Ok(OovPolicy::SubwordCompose),
            "zero" => Ok(OovPolicy::Zero),
            other => Err(format!("unknown OOV policy {other:?}")),
        }
    }
}

/// Character n-gram vectors for composing out-of-vocabulary words.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordTable {
    min_n: usize,
    max_n: usize,
    dimension: usize,
    ngrams: IndexMap<String, Vec<f32>>,
}

impl SubwordTable {
    pub fn new(min_n: usize, max_n: usize, dimension: usize) -> Result<Self> {
        if min_n == 0 || min_n > max_n || dimension == 0 {
            return Err(EmbeddingError::Parse {
                line: 1,
                reason: format!("invalid subword header {min_n} {max_n} {dimension}"),
            });
        }
        Ok(SubwordTable {
            min_n,
            max_n,
            dimension,
            ngrams: IndexMap::new(),
        })
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.min_n, self.max_n)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn get(&self, ngram: &str) -> Option<&[f32]> {
        self.ngrams.get(ngram).map(Vec::as_slice)
    }

    pub fn insert(
        &mut self,
        ngram: impl Into<String>,
        vector: Vec<f32>,
    ) -> Result<Option<Vec<f32>>> {
        let ngram = ngram.into();
        let n = ngram.chars().count();
        if n < self.min_n || n > self.max_n {
            return Err(EmbeddingError::InvalidVector {
                token: ngram,
                reason: format!("n-gram length {n} outside {}..={}", self.min_n, self.max_n),
            });
        }
        check_vector(&ngram, &vector, self.dimension)?;
        Ok(self.ngrams.insert(ngram, vector))
    }

    /// Sum of the vectors of the n-grams of `<token>` present in the table,
    /// or `None` when none is present.
    pub fn compose(&self, token: &str) -> Option<Vec<f64>> {
        let mut sum = vec![0.0f64; self.dimension];
        let mut found = false;
        for gram in char_ngrams(token, self.min_n, self.max_n) {
            if let Some(v) = self.ngrams.get(&gram) {
                found = true;
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += f64::from(*x);
                }
            }
        }
        found.then_some(sum)
    }
}

/// All character n-grams of `<word>` with `min_n <= n <= max_n`, ordered by
/// start position and then length. Repeated n-grams appear once per
/// occurrence.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for start in 0..wrapped.len() {
        for n in min_n..=max_n {
            if start + n > wrapped.len() {
                break;
            }
            out.push(wrapped[start..start + n].iter().collect());
        }
    }
    out
}

fn check_vector(token: &str, vector: &[f32], dimension: usize) -> Result<()> {
    if vector.len() != dimension {
        return Err(EmbeddingError::InvalidVector {
            token: token.to_string(),
            reason: format!("expected {dimension} components, found {}", vector.len()),
        });
    }
    if let Some(bad) = vector.iter().find(|x| !x.is_finite()) {
        return Err(EmbeddingError::InvalidVector {
            token: token.to_string(),
            reason: format!("non-finite component {bad}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dimension: usize,
    vocab: IndexMap<String, Vec<f32>>,
    subwords: Option<SubwordTable>,
}

impl EmbeddingModel {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        EmbeddingModel {
            dimension,
            vocab: IndexMap::new(),
            subwords: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vocab.get(token).map(Vec::as_slice)
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.vocab.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Inserts or replaces a vector; returns the replaced one.
    pub fn insert(
        &mut self,
        token: impl Into<String>,
        vector: Vec<f32>,
    ) -> Result<Option<Vec<f32>>> {
        let token = token.into();
        check_vector(&token, &vector, self.dimension)?;
        Ok(self.vocab.insert(token, vector))
    }

    pub fn subwords(&self) -> Option<&SubwordTable> {
        self.subwords.as_ref()
    }

    pub fn with_subwords(mut self, table: SubwordTable) -> Result<Self> {
        if table.dimension != self.dimension {
            return Err(EmbeddingError::InvalidVector {
                token: "<subword table>".into(),
                reason: format!(
                    "subword dimension {} does not match model dimension {}",
                    table.dimension, self.dimension
                ),
            });
        }
        self.subwords = Some(table);
        Ok(self)
    }

    /// Subword composition for `token`; `None` without a subword table or
    /// when no n-gram is known.
    pub fn subword_vector(&self, token: &str) -> Option<Vec<f64>> {
        self.subwords.as_ref()?.compose(token)
    }
}

fn parse_floats(line_no: usize, fields: &[&str], expected: usize) -> Result<Vec<f32>> {
    if fields.len() != expected {
        return Err(EmbeddingError::Dimension {
            line: line_no,
            expected,
            found: fields.len(),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f32>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| EmbeddingError::Parse {
                    line: line_no,
                    reason: format!("invalid component {f:?}"),
                })
        })
        .collect()
}

/// Reads text vectors. A duplicated token keeps its last vector and adds a
/// warning.
pub fn read_text_vectors<R: BufRead>(reader: R) -> Result<Loaded<EmbeddingModel>> {
    let mut model: Option<EmbeddingModel> = None;
    let mut declared_count = None;
    let mut warnings = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| EmbeddingError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if line_no == 1 && fields.len() == 2 {
            if let (Ok(count), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if dim == 0 {
                    return Err(EmbeddingError::Parse {
                        line: 1,
                        reason: "header declares dimension 0".into(),
                    });
                }
                declared_count = Some(count);
                model = Some(EmbeddingModel::new(dim));
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(EmbeddingError::Parse {
                line: line_no,
                reason: "expected a token followed by components".into(),
            });
        }
        let m = model.get_or_insert_with(|| EmbeddingModel::new(fields.len() - 1));
        let vector = parse_floats(line_no, &fields[1..], m.dimension)?;
        if m.insert(fields[0], vector)?.is_some() {
            warnings.push(format!(
                "line {line_no}: duplicate token {:?}, keeping the last vector",
                fields[0]
            ));
        }
    }
    let model = model.ok_or_else(|| EmbeddingError::Parse {
        line: 0,
        reason: "no vectors found".into(),
    })?;
    if let Some(count) = declared_count {
        let entries = model.len() + warnings.len();
        if count != entries {
            return Err(EmbeddingError::Parse {
                line: 1,
                reason: format!("header declares {count} vectors, file has {entries}"),
            });
        }
    }
    Ok(Loaded {
        value: model,
        warnings,
    })
}

pub fn load_text_vectors(path: impl AsRef<Path>) -> Result<Loaded<EmbeddingModel>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(io_err(path))?;
    let loaded = read_text_vectors(BufReader::new(file))?;
    for w in &loaded.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(loaded)
}

/// Text encoding with a `count D` header. `f32` values are printed in their
/// shortest round-trip form, so reading the result back is lossless.
pub fn format_text_vectors(model: &EmbeddingModel) -> String {
    let mut out = format!("{} {}\n", model.len(), model.dimension);
    for (token, v) in model.iter() {
        out.push_str(token);
        for x in v {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn save_text_vectors(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_text_vectors(model)).map_err(io_err(path))
}

pub fn decode_binary_vectors(bytes: &[u8]) -> Result<Loaded<EmbeddingModel>> {
    let header_end =
        bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| EmbeddingError::Parse {
                line: 1,
                reason: "missing header line".into(),
            })?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| EmbeddingError::Parse {
        line: 1,
        reason: "header is not UTF-8".into(),
    })?;
    let bad_header = || EmbeddingError::Parse {
        line: 1,
        reason: format!("expected \"count dimension\" header, found {header:?}"),
    };
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(bad_header)?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .filter(|d| *d > 0)
        .ok_or_else(bad_header)?;
    if parts.next().is_some() {
        return Err(bad_header());
    }
    let mut model = EmbeddingModel::new(dim);
    let mut warnings = Vec::new();
    let mut pos = header_end + 1;
    let vector_bytes = 4 * dim;
    for entry in 1..=count {
        while pos < bytes.len() && bytes[pos] == b'\n' {
            pos += 1;
        }
        let rest = &bytes[pos..];
        let Some(space) = rest.iter().position(|&b| b == b' ') else {
            return Err(EmbeddingError::Truncated {
                entry,
                expected: rest.len().max(1) + 1 + vector_bytes,
                actual: rest.len(),
            });
        };
        if space == 0 {
            return Err(EmbeddingError::Parse {
                line: entry + 1,
                reason: "empty token".into(),
            });
        }
        let available = rest.len() - space - 1;
        if available < vector_bytes {
            return Err(EmbeddingError::Truncated {
                entry,
                expected: space + 1 + vector_bytes,
                actual: rest.len(),
            });
        }
        let token = match std::str::from_utf8(&rest[..space]) {
            Ok(t) => t.to_string(),
            Err(_) => {
                warnings.push(format!(
                    "entry {entry}: token is not valid UTF-8, decoded lossily"
                ));
                String::from_utf8_lossy(&rest[..space]).into_owned()
            }
        };
        let vector: Vec<f32> = rest[space + 1..space + 1 + vector_bytes]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if model.insert(token.clone(), vector)?.is_some() {
            warnings.push(format!(
                "entry {entry}: duplicate token {token:?}, keeping the last vector"
            ));
        }
        pos += space + 1 + vector_bytes;
    }
    if bytes[pos.min(bytes.len())..]
        .iter()
        .any(|b| !b.is_ascii_whitespace())
    {
        return Err(EmbeddingError::Parse {
            line: count + 2,
            reason: format!("trailing data after {count} declared entries"),
        });
    }
    Ok(Loaded {
        value: model,
        warnings,
    })
}

pub fn encode_binary_vectors(model: &EmbeddingModel) -> Result<Vec<u8>> {
    let mut out = format!("{} {}\n", model.len(), model.dimension).into_bytes();
    out.reserve(model.len() * (4 * model.dimension + 16));
    for (token, v) in model.iter() {
        if token.is_empty() || token.bytes().any(|b| b == b' ' || b == b'\n') {
            return Err(EmbeddingError::InvalidVector {
                token: token.to_string(),
                reason: "token cannot be stored in the binary format".into(),
            });
        }
        out.extend_from_slice(token.as_bytes());
        out.push(b' ');
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn load_binary_vectors(path: impl AsRef<Path>) -> Result<Loaded<EmbeddingModel>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    let loaded = decode_binary_vectors(&bytes)?;
    for w in &loaded.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(loaded)
}

pub fn save_binary_vectors(model: &EmbeddingModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_binary_vectors(model)?).map_err(io_err(path))
}

/// Loads `*.bin` files as binary vectors and anything else as text vectors.
pub fn load_vectors(path: impl AsRef<Path>) -> Result<Loaded<EmbeddingModel>> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "bin") {
        load_binary_vectors(path)
    } else {
        load_text_vectors(path)
    }
}

pub fn read_subword_table<R: BufRead>(reader: R) -> Result<SubwordTable> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, Ok(l))) if l.trim().is_empty() => continue,
            Some((_, Ok(l))) => break l,
            Some((n, Err(e))) => {
                return Err(EmbeddingError::Parse {
                    line: n + 1,
                    reason: e.to_string(),
                })
            }
            None => {
                return Err(EmbeddingError::Parse {
                    line: 1,
                    reason: "missing \"min_n max_n dimension\" header".into(),
                })
            }
        }
    };
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| EmbeddingError::Parse {
            line: 1,
            reason: format!("invalid subword header {header:?}"),
        })?;
    let [min_n, max_n, dim] = nums[..] else {
        return Err(EmbeddingError::Parse {
            line: 1,
            reason: format!("invalid subword header {header:?}"),
        });
    };
    let mut table = SubwordTable::new(min_n, max_n, dim)?;
    for (n, line) in lines {
        let line_no = n + 1;
        let line = line.map_err(|e| EmbeddingError::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let vector = parse_floats(line_no, &fields[1..], dim)?;
        table
            .insert(fields[0], vector)
            .map_err(|e| EmbeddingError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
    }
    Ok(table)
}

pub fn load_subword_table(path: impl AsRef<Path>) -> Result<SubwordTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_subword_table(BufReader::new(file))
}

pub fn format_subword_table(table: &SubwordTable) -> String {
    let mut out = format!("{} {} {}\n", table.min_n, table.max_n, table.dimension);
    for (gram, v) in &table.ngrams {
        out.push_str(gram);
        for x in v {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    out
}

/// Averaged paragraph embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub covered_tokens: usize,
    pub total_tokens: usize,
}

/// Mean of the token vectors under `policy`. When no token is covered the
/// result is the zero vector with `covered_tokens = 0`.
pub fn average_embedding<S: AsRef<str>>(
    model: &EmbeddingModel,
    tokens: &[S],
    policy: OovPolicy,
) -> Result<FeatureVector> {
    if tokens.is_empty() {
        return Err(EmbeddingError::EmptyTokens);
    }
    if policy == OovPolicy::SubwordCompose && model.subwords.is_none() {
        return Err(EmbeddingError::NoSubwords);
    }
    let mut sum = vec![0.0f64; model.dimension];
    let mut covered = 0usize;
    for token in tokens {
        let token = token.as_ref();
        if let Some(v) = model.get(token) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += f64::from(*x);
            }
            covered += 1;
        } else if policy == OovPolicy::SubwordCompose {
            if let Some(v) = model.subword_vector(token) {
                for (s, x) in sum.iter_mut().zip(&v) {
                    *s += x;
                }
                covered += 1;
            }
        }
    }
    let denominator = match policy {
        OovPolicy::Zero => tokens.len(),
        _ => covered,
    };
    if denominator > 0 {
        let d = denominator as f64;
        for s in &mut sum {
            *s /= d;
        }
    }
    Ok(FeatureVector {
        values: sum,
        covered_tokens: covered,
        total_tokens: tokens.len(),
    })
}

/// [`average_embedding`] over many token lists.
pub fn average_batch<S: AsRef<str> + Sync>(
    model: &EmbeddingModel,
    paragraphs: &[Vec<S>],
    policy: OovPolicy,
    exec: Execution,
) -> Result<Vec<FeatureVector>> {
    exec.map(paragraphs, |tokens| {
        average_embedding(model, tokens, policy)
    })
    .into_iter()
    .collect()
}
