use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use newsdiff_core::engine::{self, InterventionKind, InterventionSpec, Provenance, RunOptions};
use newsdiff_core::netgen::{self, NetworkSpec};
use newsdiff_core::news::NewsItem;
use newsdiff_core::par::Parallelism;
use newsdiff_core::persona::{sample_personas, BigFiveStats};
use newsdiff_core::policy::StubPolicy;

const MODES: [Parallelism; 2] = [Parallelism::Sequential, Parallelism::Parallel];

fn path_length(c: &mut Criterion) {
    let mut group = c.benchmark_group("avg_path_length");
    for spec in NetworkSpec::all_defaults() {
        let net = spec.generate(2024).unwrap();
        for mode in MODES {
            group.bench_with_input(BenchmarkId::new(format!("{mode:?}"), spec.kind().name()), &net, |b, net| {
                b.iter(|| netgen::avg_path_length_with(net, mode).unwrap())
            });
        }
    }
    group.finish();
}

fn diffusion_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("stub_run");
    let net = NetworkSpec::all_defaults()[0].generate(2024).unwrap();
    let personas = sample_personas(net.n(), &BigFiveStats::reference(), 2024).unwrap();
    let news = NewsItem::placeholder();
    let policy = StubPolicy::default();
    let opts = |decision_seed, parallelism| RunOptions {
        days: 7,
        intervention: InterventionSpec::of(InterventionKind::Commenting),
        decision_seed,
        parallelism,
        provenance: Provenance::default(),
    };
    // Pick a seed where the source shares so the run does real work.
    let seed = (0..)
        .find(|&s| engine::run(&opts(s, Parallelism::Sequential), &net, &personas, &news, &policy).unwrap().effective)
        .unwrap();
    for mode in MODES {
        let opts = opts(seed, mode);
        group.bench_function(format!("{mode:?}"), |b| b.iter(|| engine::run(&opts, &net, &personas, &news, &policy).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, path_length, diffusion_run);
criterion_main!(benches);
