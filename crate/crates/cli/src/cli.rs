use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spindetect::classifiers::Algorithm;
use spindetect::spinner::SynonymChoice;
use spindetect::{OovPolicy, Source};

#[derive(Debug, Parser)]
#[command(
    name = "spindetect",
    version,
    about = "Detect machine-paraphrased paragraphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split raw .txt documents into filtered paragraphs and write a dataset.
    Ingest(IngestArgs),
    /// Add spun copies of every original example.
    Spin(SpinArgs),
    /// Grid-search a classifier, refit the winner and save it.
    Train(TrainArgs),
    /// Score a saved model on one or more labeled test sets.
    Evaluate(EvaluateArgs),
    /// Classify the paragraphs of a text and print JSON.
    Classify(ClassifyArgs),
    /// Serve POST /classify and GET /health.
    Serve(ServeArgs),
    /// Write a generated corpus, vector file and thesaurus for experiments.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Logreg,
    Svm,
    Gnb,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Logreg => Algorithm::LogReg,
            AlgoArg::Svm => Algorithm::Svm,
            AlgoArg::Gnb => Algorithm::Gnb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OovArg {
    Skip,
    Subword,
    Zero,
}

impl From<OovArg> for OovPolicy {
    fn from(o: OovArg) -> Self {
        match o {
            OovArg::Skip => OovPolicy::Skip,
            OovArg::Subword => OovPolicy::SubwordCompose,
            OovArg::Zero => OovPolicy::Zero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Wikipedia,
    Arxiv,
    Theses,
    Synthetic,
}

impl From<SourceArg> for Source {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Wikipedia => Source::Wikipedia,
            SourceArg::Arxiv => Source::Arxiv,
            SourceArg::Theses => Source::Theses,
            SourceArg::Synthetic => Source::Synthetic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChoiceArg {
    First,
    Random,
}

impl From<ChoiceArg> for SynonymChoice {
    fn from(c: ChoiceArg) -> Self {
        match c {
            ChoiceArg::First => SynonymChoice::First,
            ChoiceArg::Random => SynonymChoice::UniformRandom,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct VectorArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    /// Character n-gram table for subword composition.
    #[arg(long)]
    pub subwords: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "skip")]
    pub oov: OovArg,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Directory of UTF-8 .txt documents; the file stem is the document id.
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(long, value_enum, default_value = "wikipedia")]
    pub source: SourceArg,
    /// Output dataset.
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SpinArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub synonyms: PathBuf,
    #[arg(long)]
    pub k: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "first")]
    pub choice: ChoiceArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub vectors: VectorArgs,
    #[arg(long, value_enum)]
    pub algo: AlgoArg,
    /// TOML grid overriding the default hyperparameter grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train on raw averaged embeddings instead of z-scored features.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub model: PathBuf,
    /// Human-readable report; a .tsv table is written next to it.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub vectors: VectorArgs,
    /// Test set; repeat for several. Each is named by its file stem.
    #[arg(long = "dataset", required = true)]
    pub datasets: Vec<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub vectors: VectorArgs,
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    /// Text file to classify; standard input when neither this nor --text is given.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub vectors: VectorArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory; receives raw/, vectors.txt and synonyms.txt.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub docs: usize,
    #[arg(long, default_value_t = 4)]
    pub paragraphs_per_doc: usize,
    /// Fraction of the vocabulary with synonyms.
    #[arg(long, default_value_t = 1.0)]
    pub coverage: f64,
}
