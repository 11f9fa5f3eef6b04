use spindetect::classifiers::{GnbHyper, Hyper};
use spindetect::corpus::{load_dataset, save_dataset, split_paragraphs, tokenize};
use spindetect::embeddings::average_batch;
use spindetect::evaluation::{transfer_eval, Testset};
use spindetect::spinner::{paragraph_seed, spin_text, SpinConfig, SynonymChoice};
use spindetect::synthetic::{World, WorldConfig};
use spindetect::{Classifier, Execution, Label, LabeledExample, OovPolicy, Source, Tool};

fn world(coverage: f64, seed: u64) -> World {
    World::generate(
        WorldConfig {
            coverage,
            vocab_size: 500,
            dimension: 24,
            ..Default::default()
        },
        seed,
    )
}

#[test]
fn partial_coverage_ratio_by_token_diff() {
    let w = world(0.4, 11);
    let paragraphs = w.paragraphs(400, 12);
    let mut ratio_sum = 0.0;
    for (i, text) in paragraphs.iter().enumerate() {
        let cfg =
            SpinConfig::new(4, paragraph_seed(1, "p", i), SynonymChoice::UniformRandom).unwrap();
        let spun = spin_text(text, &w.synonyms, &cfg);
        let before = tokenize(text);
        let after = tokenize(&spun.spun_text);
        assert_eq!(before.len(), after.len());
        let diffs = before.iter().zip(&after).filter(|(a, b)| a != b).count();
        assert_eq!(diffs, spun.replaced);
        ratio_sum += diffs as f64 / before.len() as f64;
    }
    let mean = ratio_sum / paragraphs.len() as f64;
    // Zipf sampling makes covered words more or less frequent than 40%; the
    // ratio must still track coverage / k.
    assert!((mean - 0.10).abs() < 0.03, "mean ratio {mean}");
}

fn examples_for(world: &World, docs: usize, seed: u64, k: u32) -> Vec<LabeledExample> {
    let mut out = Vec::new();
    for doc in world.documents(docs, 4, seed) {
        for p in split_paragraphs(&doc) {
            let original = LabeledExample::from_paragraph(&p, Source::Synthetic);
            let cfg = SpinConfig::new(
                k,
                paragraph_seed(seed, &p.doc_id, p.index),
                SynonymChoice::First,
            )
            .unwrap();
            let spun = spin_text(&p.raw_text, &world.synonyms, &cfg);
            out.push(LabeledExample::paraphrased(
                format!("{}#k{k}", original.id),
                Source::Synthetic,
                Tool::Synthetic(k),
                spun.spun_text,
            ));
            out.push(original);
        }
    }
    out
}

fn featurize(world: &World, examples: &[LabeledExample]) -> (Vec<Vec<f64>>, Vec<Label>) {
    let tokens: Vec<Vec<String>> = examples.iter().map(|e| tokenize(&e.text)).collect();
    let feats = average_batch(
        &world.embeddings,
        &tokens,
        OovPolicy::Skip,
        Execution::default(),
    )
    .unwrap();
    (
        feats.into_iter().map(|f| f.values).collect(),
        examples.iter().map(|e| e.label).collect(),
    )
}

#[test]
fn training_set_scores_at_least_held_out_sets() {
    let w = world(1.0, 21);
    let train = examples_for(&w, 60, 1, 2);
    let (xs, ys) = featurize(&w, &train);
    let clf = Classifier::train(&Hyper::Gnb(GnbHyper::default()), &xs, &ys, false).unwrap();

    let mut sets = vec![Testset {
        name: "train".into(),
        features: xs,
        labels: ys,
    }];
    for k in [2, 4] {
        let (features, labels) = featurize(&w, &examples_for(&w, 30, 100 + k as u64, k));
        sets.push(Testset {
            name: format!("k{k}"),
            features,
            labels,
        });
    }
    let results = transfer_eval(&clf, &sets, Execution::default()).unwrap();
    let train_f1 = results[0].f1_micro;
    assert!(train_f1 > 0.5);
    for r in &results[1..] {
        assert!(
            train_f1 >= r.f1_micro,
            "{}: {} > train {}",
            r.name,
            r.f1_micro,
            train_f1
        );
    }
    assert!(results[1].f1_micro > results[2].f1_micro);
}

#[test]
fn dataset_files_round_trip() {
    let w = world(1.0, 3);
    let examples: Vec<LabeledExample> = examples_for(&w, 15, 5, 3).into_iter().take(100).collect();
    assert_eq!(examples.len(), 100);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.tsv");
    save_dataset(&examples, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), examples);

    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "").unwrap();
    assert!(load_dataset(&empty).unwrap().is_empty());
}
