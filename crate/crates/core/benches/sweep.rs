//! Sequential against rayon execution for the two data-parallel workloads:
//! the 16-scenario efficiency sweep and one GA generation of PID episodes.
//! Without the `parallel` feature both arms run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lre_core::baselines::PidFamily;
use lre_core::bench::{sweep, Controller};
use lre_core::engine::EngineParams;
use lre_core::env::Env;
use lre_core::par::Execution;
use lre_core::tuner::{tune, GaConfig, PidEpisodeFitness};

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel.effective())]
}

fn sweep_bench(c: &mut Criterion) {
    let env = Env::new(EngineParams::default()).expect("default plant");
    let pid = Controller::Pid { gains: PidFamily::tuned(), anti_windup: true };
    let mut group = c.benchmark_group("efficiency_sweep");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new("pid_100bar", name), &exec, |b, &exec| {
            b.iter(|| sweep(&pid, 100.0, &env, exec))
        });
    }
    group.finish();
}

fn ga_bench(c: &mut Criterion) {
    let env = Env::new(EngineParams::default()).expect("default plant");
    let cfg = GaConfig { population: 16, generations: 1, ..GaConfig::default() };
    let fitness = PidEpisodeFitness { scenarios: cfg.fitness_scenarios(), env };
    let mut group = c.benchmark_group("ga_generation");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::new("pop16", name), &exec, |b, &exec| {
            b.iter(|| tune(&cfg, &fitness, exec).expect("tune"))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_bench, ga_bench);
criterion_main!(benches);
