use std::collections::HashSet;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};

use spindetect::classifiers::model_file;
use spindetect::corpus::{load_dataset, save_dataset, split_paragraphs, tokenize};
use spindetect::embeddings::{average_embedding, format_text_vectors};
use spindetect::evaluation::{
    format_report, format_table, grid_search, score_testset, stratified_split, transfer_eval,
    EvalReport, GridOptions, GridSpec, Testset,
};
use spindetect::spinner::{
    load_synonyms, paragraph_seed, replacement_ratio, spin_text, SpinConfig,
};
use spindetect::synthetic::{World, WorldConfig};
use spindetect::{
    Classifier, Document, EmbeddingModel, Execution, Label, LabeledExample, OovPolicy, Tool,
};

use crate::cli::{ClassifyArgs, EvaluateArgs, IngestArgs, SpinArgs, SynthArgs, TrainArgs};
use crate::{load_embeddings, require_file, require_output, Classification, Detector};

/// Fraction of the training set held out for grid-search validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

pub fn ingest(args: &IngestArgs) -> Result<()> {
    ensure!(
        args.raw.is_dir(),
        "raw directory {} does not exist",
        args.raw.display()
    );
    require_output(&args.dataset)?;
    let mut files: Vec<PathBuf> = fs::read_dir(&args.raw)
        .with_context(|| format!("reading {}", args.raw.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"));
    files.sort();
    ensure!(
        !files.is_empty(),
        "no .txt documents in {}",
        args.raw.display()
    );

    let mut examples = Vec::new();
    for path in &files {
        let body =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let id = path.file_stem().expect("file has a name").to_string_lossy();
        let doc = Document::new(id, args.source.into(), &body)
            .with_context(|| format!("document {}", path.display()))?;
        examples.extend(
            split_paragraphs(&doc)
                .iter()
                .map(|p| LabeledExample::from_paragraph(p, doc.source)),
        );
    }
    save_dataset(&examples, &args.dataset)?;
    eprintln!(
        "ingested {} paragraphs from {} documents",
        examples.len(),
        files.len()
    );
    Ok(())
}

pub fn spin(args: &SpinArgs) -> Result<()> {
    require_file(&args.dataset, "dataset")?;
    require_file(&args.synonyms, "synonym file")?;
    require_output(&args.out)?;
    let base = SpinConfig::new(args.k, args.seed, args.choice.into())?;
    let examples = load_dataset(&args.dataset)?;
    let dict = load_synonyms(&args.synonyms)?.value;

    let mut out = Vec::with_capacity(2 * examples.len());
    let mut ratio_sum = 0.0;
    let mut spun_count = 0usize;
    for example in examples {
        if example.label == Label::Original {
            let cfg = base.with_seed(paragraph_seed(args.seed, &example.id, 0));
            let result = spin_text(&example.text, &dict, &cfg);
            let total = tokenize(&example.text).len();
            ratio_sum += replacement_ratio(&result, total)
                .with_context(|| format!("example {}", example.id))?;
            spun_count += 1;
            let spun = LabeledExample::paraphrased(
                format!("{}#k{}", example.id, args.k),
                example.source,
                Tool::Synthetic(args.k),
                result.spun_text,
            );
            out.push(example);
            out.push(spun);
        } else {
            out.push(example);
        }
    }
    save_dataset(&out, &args.out)?;
    if spun_count > 0 {
        eprintln!(
            "spun {spun_count} paragraphs at k={}, mean replacement ratio {:.4}",
            args.k,
            ratio_sum / spun_count as f64
        );
    }
    Ok(())
}

/// Averaged embeddings for every example, in order.
pub fn featurize(
    examples: &[LabeledExample],
    vectors: &EmbeddingModel,
    policy: OovPolicy,
    exec: Execution,
) -> Result<(Vec<Vec<f64>>, Vec<Label>)> {
    let features: Vec<Result<Vec<f64>>> = exec.map(examples, |e| {
        let tokens = tokenize(&e.text);
        let f = average_embedding(vectors, &tokens, policy)
            .with_context(|| format!("example {}", e.id))?;
        if f.covered_tokens == 0 {
            log::warn!(
                "example {} has no token with a vector; using the zero vector",
                e.id
            );
        }
        Ok(f.values)
    });
    let xs = features.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((xs, examples.iter().map(|e| e.label).collect()))
}

fn load_grid(path: Option<&Path>) -> Result<GridSpec> {
    match path {
        None => Ok(GridSpec::default()),
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading grid {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing grid {}", p.display()))
        }
    }
}

fn table_path(report: &Path) -> PathBuf {
    let table = report.with_extension("tsv");
    if table == report {
        report.with_extension("table.tsv")
    } else {
        table
    }
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    fs::write(path, format_report(report))
        .with_context(|| format!("writing {}", path.display()))?;
    let table = table_path(path);
    fs::write(&table, format_table(report))
        .with_context(|| format!("writing {}", table.display()))?;
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    require_file(&args.dataset, "dataset")?;
    require_file(&args.vectors.vectors, "vectors")?;
    if let Some(s) = &args.vectors.subwords {
        require_file(s, "subword table")?;
    }
    if let Some(g) = &args.grid {
        require_file(g, "grid")?;
    }
    require_output(&args.model)?;
    if let Some(r) = &args.report {
        require_output(r)?;
    }
    let grid = load_grid(args.grid.as_deref())?;
    let cells = grid.cells(args.algo.into(), args.seed)?;

    let examples = load_dataset(&args.dataset)?;
    ensure!(
        !examples.is_empty(),
        "dataset {} is empty",
        args.dataset.display()
    );
    let vectors = load_embeddings(&args.vectors.vectors, args.vectors.subwords.as_deref())?;
    let exec = Execution::default();
    let (xs, ys) = featurize(&examples, &vectors, args.vectors.oov.into(), exec)?;

    let (train_idx, val_idx) = stratified_split(&ys, VALIDATION_FRACTION, args.seed);
    ensure!(
        !val_idx.is_empty(),
        "too few examples for a validation split"
    );
    let pick = |idx: &[usize]| -> (Vec<&[f64]>, Vec<Label>) {
        (
            idx.iter().map(|&i| xs[i].as_slice()).collect(),
            idx.iter().map(|&i| ys[i]).collect(),
        )
    };
    let (tx, ty) = pick(&train_idx);
    let (vx, vy) = pick(&val_idx);
    let standardize = !args.no_standardize;
    let grid_report = grid_search(
        &cells,
        (&tx, &ty),
        (&vx, &vy),
        GridOptions { standardize, exec },
    )?;
    let winner = grid_report.winner_hyper();

    let classifier =
        Classifier::train(winner, &xs, &ys, standardize).context("refitting the winning cell")?;
    model_file::save_model(&classifier, &args.model)?;
    let model_id = model_file::model_id(&classifier);
    let train_set = Testset {
        name: "train".into(),
        features: xs,
        labels: ys,
    };
    let train_score = score_testset(&classifier, &train_set, exec)?;
    println!(
        "winner: {winner} (validation F1 {:.4}, {} of {} cells scored)",
        grid_report.rows[grid_report.winner]
            .validation_f1
            .expect("winner is scored"),
        grid_report
            .rows
            .iter()
            .filter(|r| r.validation_f1.is_some())
            .count(),
        grid_report.rows.len()
    );
    println!("model {model_id}: training F1 {:.4}", train_score.f1_micro);
    if let Some(path) = &args.report {
        let report = EvalReport {
            algorithm: classifier.algorithm(),
            description: classifier.describe(),
            model_id,
            testsets: vec![train_score],
            grid: Some(grid_report),
        };
        write_report(&report, path)?;
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    for d in &args.datasets {
        require_file(d, "dataset")?;
    }
    require_output(&args.report)?;
    let detector = Detector::load(
        &args.model,
        &args.vectors.vectors,
        args.vectors.subwords.as_deref(),
        args.vectors.oov.into(),
    )?;
    let exec = Execution::default();
    let mut names = HashSet::new();
    let mut testsets = Vec::with_capacity(args.datasets.len());
    for path in &args.datasets {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        ensure!(
            names.insert(name.clone()),
            "two test sets are named {name:?}"
        );
        let examples = load_dataset(path)?;
        let (features, labels) = featurize(&examples, &detector.vectors, detector.policy, exec)?;
        testsets.push(Testset {
            name,
            features,
            labels,
        });
    }
    let results = transfer_eval(&detector.classifier, &testsets, exec)?;
    for r in &results {
        println!(
            "{}: F1-micro {:.4} ({} examples)",
            r.name,
            r.f1_micro,
            r.counts.total()
        );
    }
    let report = EvalReport {
        algorithm: detector.classifier.algorithm(),
        description: detector.classifier.describe(),
        model_id: detector.model_id.clone(),
        testsets: results,
        grid: None,
    };
    write_report(&report, &args.report)
}

pub fn classify(args: &ClassifyArgs) -> Result<Classification> {
    if let Some(p) = &args.input {
        require_file(p, "input")?;
    }
    let detector = Detector::load(
        &args.model,
        &args.vectors.vectors,
        args.vectors.subwords.as_deref(),
        args.vectors.oov.into(),
    )?;
    let text = match (&args.text, &args.input) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => {
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        (None, None) => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .context("reading standard input")?;
            s
        }
    };
    detector.classify_text(&text)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.coverage) {
        bail!("coverage must lie in [0, 1], got {}", args.coverage);
    }
    let raw = args.out.join("raw");
    fs::create_dir_all(&raw).with_context(|| format!("creating {}", raw.display()))?;
    let world = World::generate(
        WorldConfig {
            coverage: args.coverage,
            ..Default::default()
        },
        args.seed,
    );
    for doc in world.documents(
        args.docs,
        args.paragraphs_per_doc,
        args.seed.wrapping_add(1),
    ) {
        let path = raw.join(format!("{}.txt", doc.id));
        fs::write(&path, format!("{}\n", doc.body))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let vectors = args.out.join("vectors.txt");
    fs::write(&vectors, format_text_vectors(&world.embeddings))
        .with_context(|| format!("writing {}", vectors.display()))?;
    let synonyms = args.out.join("synonyms.txt");
    fs::write(&synonyms, world.synonyms.to_file_string())
        .with_context(|| format!("writing {}", synonyms.display()))?;
    eprintln!(
        "wrote {} documents, {} vectors and {} thesaurus entries to {}",
        args.docs,
        world.embeddings.len(),
        world.synonyms.len(),
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sits_next_to_report() {
        assert_eq!(
            table_path(Path::new("out/eval.toml")),
            Path::new("out/eval.tsv")
        );
        assert_eq!(
            table_path(Path::new("eval.tsv")),
            Path::new("eval.table.tsv")
        );
        assert_eq!(table_path(Path::new("report")), Path::new("report.tsv"));
    }

    #[test]
    fn output_directories_are_checked() {
        assert!(require_output(Path::new("file.tsv")).is_ok());
        assert!(require_output(Path::new("/no/such/dir/file.tsv")).is_err());
    }

    #[test]
    fn grid_files_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.toml");
        fs::write(&path, "[logreg]\nsolver = [\"sag\"]\ntolerance = [1e-3]\n").unwrap();
        let grid = load_grid(Some(&path)).unwrap();
        assert_eq!(grid.logreg.solver.len(), 1);
        assert_eq!(grid.logreg.max_iter, GridSpec::default().logreg.max_iter);
        assert_eq!(grid.svm, GridSpec::default().svm);
        fs::write(&path, "[logreg]\nsolver = [\"newton\"]\n").unwrap();
        assert!(load_grid(Some(&path)).is_err());
    }
}
