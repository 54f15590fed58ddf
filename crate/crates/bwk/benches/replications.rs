//! Compares parallel and sequential replication batches on a representative
//! optimistic-LP workload.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bwk::algorithms::{PerArmRadiusProvider, Policy, UcbBwk};
use bwk::instances::make_concrete_family;
use bwk::simulator::{run_replications, run_replications_sequential, TraceDetail};

fn replication_batch(c: &mut Criterion) {
    let instance = make_concrete_family(0.2, 0.05, 400).unwrap();
    let shape = instance.shape();
    let factory = move || -> Box<dyn Policy> {
        let provider = PerArmRadiusProvider::new(shape);
        Box::new(UcbBwk::with_eta(provider, shape, 0.0).unwrap())
    };

    let mut group = c.benchmark_group("ucb_replications");
    for reps in [8u64, 32] {
        group.bench_with_input(BenchmarkId::new("parallel", reps), &reps, |b, &reps| {
            b.iter(|| run_replications(&instance, factory, 42, reps, TraceDetail::Summary).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", reps), &reps, |b, &reps| {
            b.iter(|| {
                run_replications_sequential(&instance, factory, 42, reps, TraceDetail::Summary)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, replication_batch);
criterion_main!(benches);
