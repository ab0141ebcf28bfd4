//! Parallel vs sequential Monte-Carlo trial loops, on the two workloads
//! that dominate the harness: paired rSTAT runs and foam-rounding probes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use replearn::dist::CoinSource;
use replearn::report::{map_trials, map_trials_serial};
use replearn::rounding::{FoamScheme, FOAM_DEFAULT_MAX_STAGES};
use replearn::sq::{rstat_unchecked, SqParams, SqQuery};
use replearn::RandomStream;

fn paired_rstat_trial(root: &RandomStream, i: usize, n: usize, params: &SqParams) -> bool {
    let coin = CoinSource::new(0.5).unwrap();
    let t = root.derive(&format!("trial{i}"));
    let algo = t.derive("algo");
    let q = SqQuery::new("identity", |b: &u8| *b as f64);
    let run = |label: &str| {
        let sample = coin.sample(n, &mut t.derive(label));
        rstat_unchecked(&q, &sample, params, &mut algo.clone())
    };
    run("d1") == run("d2")
}

fn bench_rstat_trials(c: &mut Criterion) {
    let params = SqParams::new(0.1, 0.2, 0.01).unwrap();
    let root = RandomStream::new(42);
    let n = 5000;
    let trials = 256;
    let mut group = c.benchmark_group("paired_rstat");
    group.bench_function(BenchmarkId::new("parallel", trials), |b| {
        b.iter(|| {
            map_trials(trials, |i| paired_rstat_trial(&root, i, n, &params))
                .into_iter()
                .filter(|&x| x)
                .count()
        })
    });
    group.bench_function(BenchmarkId::new("serial", trials), |b| {
        b.iter(|| {
            map_trials_serial(trials, |i| paired_rstat_trial(&root, i, n, &params))
                .into_iter()
                .filter(|&x| x)
                .count()
        })
    });
    group.finish();
}

fn foam_pair_trial(root: &RandomStream, i: usize) -> bool {
    let t = root.derive(&format!("s{i}"));
    let mut pair = t.derive("pair");
    let x = [
        pair.draw_uniform(-2.0, 2.0).unwrap(),
        pair.draw_uniform(-2.0, 2.0).unwrap(),
    ];
    let y = [x[0] + 0.03, x[1]];
    let f = FoamScheme::construct(2, &mut t.derive("scheme"), FOAM_DEFAULT_MAX_STAGES).unwrap();
    f.apply(&x).unwrap() != f.apply(&y).unwrap()
}

fn bench_foam_probe(c: &mut Criterion) {
    let root = RandomStream::new(43);
    let trials = 512;
    let mut group = c.benchmark_group("foam_probe");
    group.bench_function(BenchmarkId::new("parallel", trials), |b| {
        b.iter(|| {
            map_trials(trials, |i| foam_pair_trial(&root, i)).into_iter().filter(|&x| x).count()
        })
    });
    group.bench_function(BenchmarkId::new("serial", trials), |b| {
        b.iter(|| {
            map_trials_serial(trials, |i| foam_pair_trial(&root, i))
                .into_iter()
                .filter(|&x| x)
                .count()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_rstat_trials, bench_foam_probe);
criterion_main!(benches);
