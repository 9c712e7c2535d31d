use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flagcheck_core::checks::{Checker, Property};
use flagcheck_core::exec::Executor;
use flagcheck_core::measures::MeasureId;
use flagcheck_core::sweep::{sweep, SweepSpec};

fn sequential_vs_parallel(c: &mut Criterion) {
    let cases = [
        (MeasureId::CRelEnt, Property::FlagAdditivity, 200),
        (MeasureId::CTr, Property::StrongMono, 40),
    ];
    let executors = [("sequential", Executor::sequential()), ("parallel", Executor::with_threads(0))];
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (id, property, trials) in cases {
        let checker = Checker::for_measure(id);
        let spec = SweepSpec::new(property, trials, vec![2, 3, 4], 1);
        for (name, exec) in &executors {
            group.bench_with_input(BenchmarkId::new(format!("{id}/{property}"), name), &spec, |b, spec| {
                b.iter(|| sweep(&checker, spec, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sequential_vs_parallel);
criterion_main!(benches);
