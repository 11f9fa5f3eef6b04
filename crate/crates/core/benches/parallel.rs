//! Sequential vs parallel execution of the data-parallel stages.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use spindetect::classifiers::svm::train_svm_with;
use spindetect::classifiers::{Algorithm, KernelSpec, SvmHyper};
use spindetect::corpus::tokenize;
use spindetect::embeddings::average_batch;
use spindetect::evaluation::{grid_search, GridOptions, GridSpec};
use spindetect::experiment::{run_transfer_seeds, TransferConfig};
use spindetect::synthetic::{World, WorldConfig};
use spindetect::{Execution, Label, OovPolicy};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn world() -> World {
    World::generate(WorldConfig::default(), 1)
}

fn features(world: &World, n: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    let tokens: Vec<Vec<String>> = world.paragraphs(n, 2).iter().map(|p| tokenize(p)).collect();
    let xs: Vec<Vec<f64>> = average_batch(
        &world.embeddings,
        &tokens,
        OovPolicy::Skip,
        Execution::Parallel,
    )
    .unwrap()
    .into_iter()
    .map(|f| f.values)
    .collect();
    // Labels from the sign of one coordinate give a learnable, overlapping task.
    let ys = xs
        .iter()
        .map(|x| {
            if x[0] + 0.02 * x[1] > 0.0 {
                Label::Paraphrased
            } else {
                Label::Original
            }
        })
        .collect();
    (xs, ys)
}

fn featurization(c: &mut Criterion) {
    let w = world();
    let tokens: Vec<Vec<String>> = w.paragraphs(5000, 3).iter().map(|p| tokenize(p)).collect();
    let mut group = c.benchmark_group("featurize_5000");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                average_batch(&w.embeddings, black_box(&tokens), OovPolicy::Skip, exec).unwrap()
            })
        });
    }
    group.finish();
}

fn grid(c: &mut Criterion) {
    let w = world();
    let (xs, ys) = features(&w, 600);
    let (train, val) = ((&xs[..480], &ys[..480]), (&xs[480..], &ys[480..]));
    let cells = GridSpec::default().cells(Algorithm::LogReg, 0).unwrap();
    let mut group = c.benchmark_group("logreg_grid_96_cells");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                grid_search(
                    &cells,
                    train,
                    val,
                    GridOptions {
                        standardize: true,
                        exec,
                    },
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn svm_kernel_rows(c: &mut Criterion) {
    let w = world();
    let mut group = c.benchmark_group("svm_rbf");
    group.sample_size(10);
    for n in [500, 1500] {
        let (xs, ys) = features(&w, n);
        let hyper = SvmHyper {
            kernel: KernelSpec::Rbf { gamma: 1.0 },
            c: 10.0,
            ..Default::default()
        };
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| train_svm_with(&xs, &ys, &hyper, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn transfer_sweep(c: &mut Criterion) {
    let cfg = TransferConfig {
        paragraphs: 600,
        ..Default::default()
    };
    let seeds: Vec<u64> = (0..8).collect();
    let mut group = c.benchmark_group("transfer_8_seeds");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| run_transfer_seeds(&cfg, &seeds, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    featurization,
    grid,
    svm_kernel_rows,
    transfer_sweep
);
criterion_main!(benches);
