//! Corpus ingestion: tokenization, sentence and paragraph segmentation, and the
//! labeled dataset file.
//!
//! Dataset files hold one record per line with five tab-separated fields:
//!
//! ```text
//! id <TAB> source <TAB> tool <TAB> label <TAB> text <LF>
//! ```
//!
//! `source` is one of `wikipedia`, `arxiv`, `theses`, `synthetic`; `tool` is
//! `none`, `synthetic:<k>` or `external:<name>`; `label` is `original` or
//! `paraphrased`. Inside `id`, `tool` names and `text`, the characters
//! backslash, TAB, LF and CR are written as `\\`, `\t`, `\n` and `\r`.
//! Parsing is strict: no surrounding whitespace is tolerated in any field.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Paragraphs with fewer sentences than this are discarded.
pub const MIN_SENTENCES: usize = 3;

const ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: unknown label {value:?}")]
    UnknownLabel { line: usize, value: String },
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("invalid example {id:?}: {reason}")]
    InvalidExample { id: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Wikipedia,
    Arxiv,
    Theses,
    Synthetic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Wikipedia => "wikipedia",
            Source::Arxiv => "arxiv",
            Source::Theses => "theses",
            Source::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "wikipedia" => Ok(Source::Wikipedia),
            "arxiv" => Ok(Source::Arxiv),
            "theses" => Ok(Source::Theses),
            "synthetic" => Ok(Source::Synthetic),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// Class label. `Paraphrased` is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Original,
    Paraphrased,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Original => "original",
            Label::Paraphrased => "paraphrased",
        }
    }

    /// `+1.0` for paraphrased, `-1.0` for original.
    pub fn sign(self) -> f64 {
        match self {
            Label::Original => -1.0,
            Label::Paraphrased => 1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Paraphrased
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Original => Label::Paraphrased,
            Label::Paraphrased => Label::Original,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "original" => Ok(Label::Original),
            "paraphrased" => Ok(Label::Paraphrased),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// The paraphrasing tool that produced an example.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tool {
    None,
    /// The built-in spinner with replacement frequency `k`.
    Synthetic(u32),
    External(String),
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tool::None => f.write_str("none"),
            Tool::Synthetic(k) => write!(f, "synthetic:{k}"),
            Tool::External(name) => write!(f, "external:{}", escape_field(name)),
        }
    }
}

impl FromStr for Tool {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "none" {
            return Ok(Tool::None);
        }
        if let Some(k) = s.strip_prefix("synthetic:") {
            let canonical =
                !k.is_empty() && !k.starts_with('0') && k.bytes().all(|b| b.is_ascii_digit());
            let k: u32 = k
                .parse()
                .ok()
                .filter(|_| canonical)
                .ok_or_else(|| format!("invalid spinner frequency in {s:?}"))?;
            return Ok(Tool::Synthetic(k));
        }
        if let Some(name) = s.strip_prefix("external:") {
            let name = unescape_field(name)?;
            if name.is_empty() {
                return Err("empty external tool name".into());
            }
            return Ok(Tool::External(name));
        }
        Err(format!("unknown tool {s:?}"))
    }
}

/// A plain-text source document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub body: String,
}

impl Document {
    /// Builds a document, converting CRLF and lone CR line endings to LF.
    pub fn new(id: impl Into<String>, source: Source, body: &str) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(CorpusError::InvalidDocument("empty id".into()));
        }
        let body = body.replace("\r\n", "\n").replace('\r', "\n");
        if body.trim().is_empty() {
            return Err(CorpusError::InvalidDocument(format!(
                "document {id:?} has an empty body"
            )));
        }
        Ok(Document { id, source, body })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub doc_id: String,
    /// Position among the paragraphs kept for this document.
    pub index: usize,
    pub sentences: Vec<Vec<String>>,
    pub raw_text: String,
}

impl Paragraph {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    pub fn example_id(&self) -> String {
        format!("{}:{}", self.doc_id, self.index)
    }
}

/// One record of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub id: String,
    pub source: Source,
    pub tool: Tool,
    pub label: Label,
    pub text: String,
}

impl LabeledExample {
    pub fn original(id: impl Into<String>, source: Source, text: impl Into<String>) -> Self {
        LabeledExample {
            id: id.into(),
            source,
            tool: Tool::None,
            label: Label::Original,
            text: text.into(),
        }
    }

    /// # Panics
    /// If `tool` is [`Tool::None`].
    pub fn paraphrased(
        id: impl Into<String>,
        source: Source,
        tool: Tool,
        text: impl Into<String>,
    ) -> Self {
        assert!(tool != Tool::None, "paraphrased examples need a tool");
        LabeledExample {
            id: id.into(),
            source,
            tool,
            label: Label::Paraphrased,
            text: text.into(),
        }
    }

    pub fn from_paragraph(paragraph: &Paragraph, source: Source) -> Self {
        Self::original(paragraph.example_id(), source, paragraph.raw_text.clone())
    }

    /// Checks the record invariants: non-empty id, and `label = original`
    /// exactly when `tool = none`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        match (&self.tool, self.label) {
            (Tool::None, Label::Original) => Ok(()),
            (Tool::None, Label::Paraphrased) => Err("paraphrased example with tool none".into()),
            (_, Label::Original) => Err(format!("original example with tool {}", self.tool)),
            (Tool::External(name), _) if name.is_empty() => Err("empty external tool name".into()),
            (Tool::Synthetic(0), _) => Err("spinner frequency must be at least 1".into()),
            _ => Ok(()),
        }
    }
}

fn is_boundary_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Byte ranges in `text` of the tokens produced by [`tokenize`], paired with
/// the normalized token.
pub fn token_spans(text: &str) -> Vec<(Range<usize>, String)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for chunk in text.split_inclusive(char::is_whitespace) {
        let word = chunk.trim_end_matches(char::is_whitespace);
        let core = word.trim_start_matches(is_boundary_punct);
        let start = offset + (word.len() - core.len());
        let core = core.trim_end_matches(is_boundary_punct);
        offset += chunk.len();
        if core.is_empty() {
            continue;
        }
        // Lowercasing can expose new boundary marks (e.g. U+0130), so trim again.
        let lower = core.to_lowercase();
        let token = lower.trim_matches(is_boundary_punct);
        if !token.is_empty() {
            out.push((start..start + core.len(), token.to_string()));
        }
    }
    out
}

/// Lowercases, splits on whitespace and strips punctuation from both ends of
/// every token. Tokens that are pure punctuation disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).into_iter().map(|(_, t)| t).collect()
}

fn abbreviations() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        ABBREVIATIONS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// Word ending right before byte `dot` (exclusive), lowercased and without
/// leading brackets or quotes.
fn word_before(text: &str, dot: usize) -> String {
    let head = &text[..dot];
    let start = head
        .rfind(char::is_whitespace)
        .map(|i| i + head[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    head[start..]
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Splits text into sentences at `.`, `!` or `?` (plus trailing closing quotes
/// or brackets) when followed by whitespace and an uppercase letter, or by
/// the end of the text. A period after a known abbreviation never splits.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        while j < chars.len() && is_closing(chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        let rest = &text[end..];
        let next = rest.trim_start().chars().next();
        let boundary = match next {
            None => true,
            Some(n) => {
                rest.starts_with(char::is_whitespace)
                    && n.is_uppercase()
                    && !(c == '.'
                        && j == i + 1
                        && abbreviations().contains(word_before(text, pos).as_str()))
            }
        };
        if boundary {
            let sentence = text[start..end].trim();
            if !sentence.is_empty() {
                sentences.push(sentence.to_string());
            }
            start = end;
        }
        i = j.max(i + 1);
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

/// Splits a document at blank lines and keeps the paragraphs with at least
/// [`MIN_SENTENCES`] non-empty sentences.
pub fn split_paragraphs(doc: &Document) -> Vec<Paragraph> {
    split_text_paragraphs(&doc.id, &doc.body)
}

/// [`split_paragraphs`] on raw text, for input that is not a stored document.
pub fn split_text_paragraphs(doc_id: &str, text: &str) -> Vec<Paragraph> {
    let body = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut blocks: Vec<Vec<&str>> = vec![Vec::new()];
    for line in body.lines() {
        if line.trim().is_empty() {
            if !blocks.last().is_some_and(Vec::is_empty) {
                blocks.push(Vec::new());
            }
        } else {
            blocks.last_mut().expect("non-empty").push(line.trim());
        }
    }
    let mut paragraphs = Vec::new();
    for block in blocks.into_iter().filter(|b| !b.is_empty()) {
        let raw_text = block.join("\n");
        let sentences: Vec<Vec<String>> = split_sentences(&raw_text)
            .iter()
            .map(|s| tokenize(s))
            .filter(|t| !t.is_empty())
            .collect();
        if sentences.len() >= MIN_SENTENCES {
            paragraphs.push(Paragraph {
                doc_id: doc_id.to_string(),
                index: paragraphs.len(),
                sentences,
                raw_text,
            });
        }
    }
    paragraphs
}

fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_field(s: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some('\\') => out.push('\\'),
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some(other) => return Err(format!("unknown escape \\{other}")),
                None => return Err("dangling backslash".into()),
            },
            '\r' => return Err("raw carriage return".into()),
            c => out.push(c),
        }
    }
    Ok(out)
}

/// Serializes examples into the dataset format.
pub fn format_dataset(examples: &[LabeledExample]) -> Result<String> {
    let mut out = String::new();
    let mut seen = HashSet::new();
    for ex in examples {
        ex.validate()
            .map_err(|reason| CorpusError::InvalidExample {
                id: ex.id.clone(),
                reason,
            })?;
        if !seen.insert(ex.id.as_str()) {
            return Err(CorpusError::InvalidExample {
                id: ex.id.clone(),
                reason: "duplicate id".into(),
            });
        }
        out.push_str(&escape_field(&ex.id));
        out.push('\t');
        out.push_str(ex.source.as_str());
        out.push('\t');
        out.push_str(&ex.tool.to_string());
        out.push('\t');
        out.push_str(ex.label.as_str());
        out.push('\t');
        out.push_str(&escape_field(&ex.text));
        out.push('\n');
    }
    Ok(out)
}

/// Parses dataset text. Errors carry the 1-based line number.
pub fn parse_dataset(content: &str) -> Result<Vec<LabeledExample>> {
    let mut examples = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (n, line) in content.split_terminator('\n').enumerate() {
        let line_no = n + 1;
        let malformed = |reason: String| CorpusError::Malformed {
            line: line_no,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(malformed(format!(
                "expected 5 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let id = unescape_field(fields[0]).map_err(|e| malformed(format!("id: {e}")))?;
        let source: Source = fields[1].parse().map_err(malformed)?;
        let tool: Tool = fields[2].parse().map_err(malformed)?;
        let label: Label = fields[3].parse().map_err(|_| CorpusError::UnknownLabel {
            line: line_no,
            value: fields[3].to_string(),
        })?;
        let text = unescape_field(fields[4]).map_err(|e| malformed(format!("text: {e}")))?;
        let example = LabeledExample {
            id,
            source,
            tool,
            label,
            text,
        };
        example.validate().map_err(malformed)?;
        if let Some(first) = ids.insert(example.id.clone(), line_no) {
            return Err(malformed(format!(
                "duplicate id {:?} (first seen on line {first})",
                example.id
            )));
        }
        examples.push(example);
    }
    Ok(examples)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_dataset(&content)
}

pub fn save_dataset(examples: &[LabeledExample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let content = format_dataset(examples)?;
    fs::write(path, content).map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The Bar, 1987."), ["the", "bar", "1987"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("A  mathematically   rigorous"),
            ["a", "mathematically", "rigorous"]
        );
        assert_eq!(tokenize("(don't) -- \"Quoted!\""), ["don't", "quoted"]);
    }

    #[test]
    fn token_spans_point_at_original_text() {
        let text = "Hello, (World)!  ok";
        let spans = token_spans(text);
        let cores: Vec<&str> = spans.iter().map(|(r, _)| &text[r.clone()]).collect();
        assert_eq!(cores, ["Hello", "World", "ok"]);
    }

    #[test]
    fn sentence_examples() {
        assert_eq!(split_sentences("A. B? C!"), ["A.", "B?", "C!"]);
        assert_eq!(
            split_sentences("No terminal punctuation"),
            ["No terminal punctuation"]
        );
        assert_eq!(split_sentences("Dr. Smith left. He returned.").len(), 2);
        assert!(split_sentences("   ").is_empty());
    }

    fn doc(body: &str) -> Document {
        Document::new("d", Source::Synthetic, body).unwrap()
    }

    #[test]
    fn paragraph_filter() {
        let body = "One. Two.\n\nOne. Two. Three.\n\nA. B. C. D. E.";
        let paras = split_paragraphs(&doc(body));
        assert_eq!(paras.len(), 2);
        assert_eq!(paras[0].sentences.len(), 3);
        assert_eq!(paras[1].sentences.len(), 5);
        assert_eq!((paras[0].index, paras[1].index), (0, 1));

        let single = split_paragraphs(&doc("First one. Second one. Third one."));
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].index, 0);
        assert_eq!(single[0].raw_text, "First one. Second one. Third one.");
    }

    #[test]
    fn crlf_is_normalized() {
        let d = Document::new(
            "x",
            Source::Theses,
            "A one. B two. C three.\r\n\r\nShort.\r\n",
        )
        .unwrap();
        assert!(!d.body.contains('\r'));
        assert_eq!(split_paragraphs(&d).len(), 1);
    }

    #[test]
    fn empty_documents_are_rejected() {
        assert!(Document::new("x", Source::Arxiv, " \n\r\n ").is_err());
        assert!(Document::new("", Source::Arxiv, "text").is_err());
    }

    #[test]
    fn dataset_strictness() {
        assert!(parse_dataset("").unwrap().is_empty());
        let err =
            parse_dataset("a\twikipedia\tnone\toriginal\tok\nb\twikipedia\tnone\tOriginal \tbad\n")
                .unwrap_err();
        match err {
            CorpusError::UnknownLabel { line, value } => {
                assert_eq!(line, 2);
                assert_eq!(value, "Original ");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_dataset("a\twikipedia\tnone\n").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }));
        let err = parse_dataset("a\twikipedia\tnone\tparaphrased\tx\n").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }));
        let err =
            parse_dataset("a\twikipedia\tnone\toriginal\tx\na\twikipedia\tnone\toriginal\ty\n")
                .unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
        let err = parse_dataset("a\twikipedia\tnone\toriginal\tbad\\q\n").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }));
        assert!(parse_dataset("a\tWikipedia\tnone\toriginal\tx\n").is_err());
        assert!(parse_dataset("a\twikipedia\tsynthetic:0\tparaphrased\tx\n").is_err());
    }

    #[test]
    fn tool_round_trip() {
        for tool in [
            Tool::None,
            Tool::Synthetic(4),
            Tool::External("spin\tbot".into()),
        ] {
            assert_eq!(tool.to_string().parse::<Tool>().unwrap(), tool);
        }
        assert!("synthetic:+4".parse::<Tool>().is_err());
        assert!("synthetic:04".parse::<Tool>().is_err());
    }

    #[test]
    fn escapes_round_trip() {
        let ex = LabeledExample::paraphrased(
            "doc\\1",
            Source::Arxiv,
            Tool::External("SpinBot".into()),
            "line one\nline\ttwo \\n literal\r",
        );
        let text = format_dataset(std::slice::from_ref(&ex)).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(parse_dataset(&text).unwrap(), vec![ex]);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-zA-Z0-9 .,!?\t\n\\\\]{0,40}",
            any::<String>().prop_map(|s| s.replace('\r', "")),
            "[äöüßéèçñ漢字\u{0130} ]{0,20}",
        ]
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in any::<String>()) {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn paragraphs_have_three_sentences(
            counts in proptest::collection::vec(0usize..6, 0..8)
        ) {
            let body: Vec<String> = counts
                .iter()
                .enumerate()
                .map(|(p, &c)| (0..c).map(|s| format!("Sentence {s} of block {p}.")).collect::<Vec<_>>().join(" "))
                .collect();
            let body = format!("Title\n\n{}", body.join("\n\n"));
            let d = doc(&body);
            let paras = split_paragraphs(&d);
            prop_assert_eq!(paras.len(), counts.iter().filter(|&&c| c >= MIN_SENTENCES).count());
            for (i, p) in paras.iter().enumerate() {
                prop_assert!(p.sentences.len() >= MIN_SENTENCES);
                prop_assert_eq!(p.index, i);
            }
        }

        #[test]
        fn dataset_serialization_is_byte_stable(texts in proptest::collection::vec(arb_text(), 0..12)) {
            let examples: Vec<LabeledExample> = texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| if i % 2 == 0 {
                    LabeledExample::original(format!("e{i}"), Source::Wikipedia, t)
                } else {
                    LabeledExample::paraphrased(format!("e{i}"), Source::Theses, Tool::Synthetic(2), t)
                })
                .collect();
            let bytes = format_dataset(&examples).unwrap();
            let parsed = parse_dataset(&bytes).unwrap();
            prop_assert_eq!(&parsed, &examples);
            prop_assert_eq!(format_dataset(&parsed).unwrap(), bytes);
        }
    }
}
