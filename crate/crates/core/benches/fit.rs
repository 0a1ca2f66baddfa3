//! Compares the default rayon pool against a single-thread pool. Build with
//! `--no-default-features` to time the sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fleetrisk::features::{encode, standardize, ablation_subsets, FeatureSpec};
use fleetrisk::models::{fit_random_forest, ForestHyper, ModelKind};
use fleetrisk::*;

fn fleet() -> (Vec<SubWorkOrderRecord>, panel::PanelOptions, Panel) {
    let cfg = FleetConfig {
        n_vehicles: 120,
        n_weeks: 156,
        ..FleetConfig::default()
    };
    let fleet = generate_fleet(&cfg).unwrap();
    let opts = fleet.truth.panel_options(fleet.utilization.clone());
    let panel = build_panel(&fleet.records, &opts).unwrap();
    (fleet.records, opts, panel)
}

fn pools() -> Vec<(String, Option<rayon::ThreadPool>)> {
    let mut out = vec![("default".to_string(), None)];
    if par::is_parallel() {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        out.push(("1-thread".to_string(), Some(one)));
    }
    out
}

fn run<T: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> T + Send) -> T {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn benches(c: &mut Criterion) {
    let (records, opts, panel) = fleet();
    let x = standardize(&encode(&panel, FeatureSpec::all()).unwrap());
    let forest = ForestHyper {
        n_estimators: 16,
        seed: 1,
        ..ForestHyper::default()
    };
    let logistic = ModelConfig::default_for(ModelKind::Logistic);
    let split_spec = SplitSpec::Chronological { test_fraction: 0.3 };
    let subsets = ablation_subsets();

    let mut group = c.benchmark_group("fleetrisk");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("forest_fit", &name), |b| {
            b.iter(|| run(&pool, || fit_random_forest(&x, &forest).unwrap()))
        });
        group.bench_function(BenchmarkId::new("panel_build", &name), |b| {
            b.iter(|| run(&pool, || build_panel(&records, &opts).unwrap()))
        });
        group.bench_function(BenchmarkId::new("ablation", &name), |b| {
            b.iter(|| run(&pool, || eval::ablation(&panel, &subsets, &logistic, &split_spec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(fit, benches);
criterion_main!(fit);
