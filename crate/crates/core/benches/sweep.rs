use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use regbandit::algorithms::Algorithm;
use regbandit::harness::{run_sweep_with, Execution, InstanceSource, SweepConfig};
use regbandit::instances::ScenarioSpec;

fn config(spec: ScenarioSpec, algo: Algorithm, eta: f64) -> SweepConfig {
    let mut cfg = SweepConfig::new(InstanceSource::Scenario(spec), algo, eta);
    cfg.n_grid = vec![256, 1024, 4096];
    cfg.seeds = 32;
    cfg
}

fn executions() -> Vec<(&'static str, Execution)> {
    let mut out = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    out.push(("parallel", Execution::Parallel { workers: None }));
    out
}

fn sweeps(c: &mut Criterion) {
    let cases = [
        ("kl_pcb", config(ScenarioSpec::Ladder, Algorithm::KlPcb, 1.0)),
        ("f_cb", config(ScenarioSpec::SkewedLadder, Algorithm::FCb, 1.0)),
        ("kl_pcdb", config(ScenarioSpec::DuelingLadder, Algorithm::KlPcdb, 0.5)),
    ];
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, cfg) in &cases {
        for (label, exec) in executions() {
            group.bench_with_input(BenchmarkId::new(*name, label), cfg, |b, cfg| {
                b.iter(|| {
                    let mut total = 0.0;
                    run_sweep_with(cfg, exec, |row| {
                        total += row.subopt;
                        Ok(())
                    })
                    .unwrap();
                    black_box(total)
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
