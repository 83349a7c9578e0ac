use criterion::{criterion_group, criterion_main, Criterion};
use resilink_bench::dense_config;
use resilink_core::harness::{prepare, run_prepared};
use resilink_core::StagePolicy;

fn episode(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode_2000_slots");
    group.sample_size(10);
    for policy in [StagePolicy::S1, StagePolicy::S1S2S3] {
        let cfg = resilink_core::ScenarioConfig {
            stage_policy: policy,
            ..dense_config()
        };
        let (topo, baseline) = prepare(&cfg, 4).expect("valid config");
        group.bench_function(policy.name(), |b| b.iter(|| run_prepared(&cfg, 4, topo.clone(), baseline.clone())));
    }
    group.finish();
}

criterion_group!(benches, episode);
criterion_main!(benches);
