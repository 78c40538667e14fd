use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use h22lab::oracle::{normalization, QuadratureRule, QuadratureSpec};
use h22lab::sampler::{ChainSet, SamplerParams};
use h22lab::verify::detlemmas;
use h22lab::{Execution, PinnedGraph};
use std::hint::black_box;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn two_sites() -> PinnedGraph {
    PinnedGraph::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]], vec![2.0, 2.0]).unwrap()
}

fn quadrature(c: &mut Criterion) {
    let g = two_sites();
    let mut group = c.benchmark_group("quadrature");
    group.sample_size(10);
    for exec in MODES {
        let spec = QuadratureSpec { rule: QuadratureRule::GaussLegendre, points_per_axis: 64, execution: exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::new("normalization_n2", format!("{exec:?}")), &spec, |b, spec| {
            b.iter(|| normalization(black_box(&g), spec).unwrap())
        });
    }
    group.finish();
}

fn mcmc(c: &mut Criterion) {
    let g = two_sites();
    let mut group = c.benchmark_group("mcmc");
    group.sample_size(10);
    for exec in MODES {
        let p = SamplerParams { n_steps: 5_000, burn_in: 500, chains: 4, execution: exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::new("four_chains", format!("{exec:?}")), &p, |b, p| {
            b.iter(|| ChainSet::run(black_box(&g), p, 7).unwrap())
        });
    }
    group.finish();
}

fn lemmas(c: &mut Criterion) {
    let mut group = c.benchmark_group("detlemmas");
    group.sample_size(10);
    for exec in MODES {
        group.bench_function(BenchmarkId::new("50_trials", format!("{exec:?}")), |b| {
            b.iter(|| detlemmas::all(50, black_box(3), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, quadrature, mcmc, lemmas);
criterion_main!(benches);
