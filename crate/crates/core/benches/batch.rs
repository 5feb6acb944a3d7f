use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rbsim_core::batch::{run_batch, run_batch_sequential};
use rbsim_core::profile::SpeedProfile;
use rbsim_core::substation::SubstationParams;
use rbsim_core::{Direction, RunOptions, Scenario, TrainSpec};

/// Single-train runs that differ only in braking time, as in a parameter sweep.
fn sweep(n: usize) -> Vec<Scenario> {
    (0..n)
        .map(|k| {
            let decel = 12.0 + k as f64;
            let profile = SpeedProfile::new(vec![(0.0, 0.0), (21.3, 15.0), (55.0, 15.0), (55.0 + decel, 0.0)]).unwrap();
            let mut s = Scenario::new(
                vec![0.0, 600.0, 1200.0],
                vec![SubstationParams { position: 600.0, r_th: 0.01, ..Default::default() }],
                vec![TrainSpec::new(profile, 0.0, Direction::Eastbound)],
            );
            s.dt_network = 0.01;
            s
        })
        .collect()
}

fn bench_batch(c: &mut Criterion) {
    let opts = RunOptions::default();
    let mut group = c.benchmark_group("batch");
    group.sample_size(10);
    for n in [4, 16, 64] {
        let scenarios = sweep(n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &scenarios, |b, s| b.iter(|| run_batch(s, &opts)));
        group.bench_with_input(BenchmarkId::new("sequential", n), &scenarios, |b, s| {
            b.iter(|| run_batch_sequential(s, &opts))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
