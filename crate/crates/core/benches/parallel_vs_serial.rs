use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ttdl_core::materials::MaterialKind;
use ttdl_core::{
    find_modes, perturb_and_redesign, rf_response, sweep_modes, ConversionGraph, DesignTargets,
    Execution, FiberProfile, ModeTable, PerturbationSpec, SolverOptions,
};

const MODES: [Execution; 2] = [Execution::Serial, Execution::Parallel];

fn name(e: Execution) -> &'static str {
    match e {
        Execution::Serial => "serial",
        Execution::Parallel => "parallel",
    }
}

fn options(execution: Execution) -> SolverOptions {
    SolverOptions {
        execution,
        ..SolverOptions::default()
    }
}

fn solver(c: &mut Criterion) {
    let profile = FiberProfile::ring_core(MaterialKind::SellmeierBlend);
    let mut g = c.benchmark_group("find_modes");
    for e in MODES {
        g.bench_function(BenchmarkId::from_parameter(name(e)), |b| {
            b.iter(|| find_modes(black_box(&profile), 1.55, &options(e)).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("sweep_1545_1555");
    g.sample_size(10);
    for e in MODES {
        g.bench_function(BenchmarkId::from_parameter(name(e)), |b| {
            b.iter(|| sweep_modes(black_box(&profile), 1545.0, 1555.0, 2.5, &options(e)).unwrap())
        });
    }
    g.finish();
}

fn designer(c: &mut Criterion) {
    let table =
        ModeTable::read_csv(include_str!("../data/ring_core_modes.csv").as_bytes()).unwrap();
    let graph = ConversionGraph::ring_core_design();
    let targets = DesignTargets::new(100.0);
    let spec = PerturbationSpec {
        sigma: 0.01,
        trials: 200,
        seed: 1,
    };
    let mut g = c.benchmark_group("perturb_200_trials");
    for e in MODES {
        g.bench_function(BenchmarkId::from_parameter(name(e)), |b| {
            b.iter(|| perturb_and_redesign(&graph, black_box(&table), &targets, &spec, e).unwrap())
        });
    }
    g.finish();
}

fn rf(c: &mut Criterion) {
    let delays = [0.0, 200.0, 400.0, 600.0];
    let freqs: Vec<f64> = (0..100_000).map(|i| i as f64 * 1e-3).collect();
    let mut g = c.benchmark_group("rf_response_100k");
    for e in MODES {
        g.bench_function(BenchmarkId::from_parameter(name(e)), |b| {
            b.iter(|| rf_response(&delays, &[1.0; 4], black_box(&freqs), e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, solver, designer, rf);
criterion_main!(benches);
