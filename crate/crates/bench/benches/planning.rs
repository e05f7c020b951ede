use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softrigid::{plan, rollout, sample_config, AgentConfig, GeometryParams, Model, PlannerParams, RolloutOptions};

fn pairs(geom: &GeometryParams, n: u64) -> Vec<(AgentConfig, AgentConfig)> {
    (0..n)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (sample_config(&mut rng, geom), sample_config(&mut rng, geom))
        })
        .collect()
}

fn planning(c: &mut Criterion) {
    let geom = GeometryParams::default();
    let model = Model::new(geom);
    let cases = pairs(&geom, 4);
    let mut group = c.benchmark_group("plan");
    group.sample_size(20);
    for (name, params) in [("default", PlannerParams::default()), ("compat", PlannerParams::paper_compat())] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &params, |b, params| {
            b.iter(|| {
                for (q0, qt) in &cases {
                    black_box(plan(q0, qt, &model, params).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn gated_rollout(c: &mut Criterion) {
    let geom = GeometryParams::default();
    let model = Model::new(geom);
    let (q0, qt) = pairs(&geom, 1)[0];
    let result = plan(&q0, &qt, &model, &PlannerParams::paper_compat()).unwrap();
    let options = RolloutOptions::default();
    c.bench_function("rollout/gated", |b| {
        b.iter(|| rollout(black_box(&q0), &result, &model, &options).unwrap())
    });
}

criterion_group!(benches, planning, gated_rollout);
criterion_main!(benches);
