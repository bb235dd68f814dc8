use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qtele::batch::{teleport_batch, teleport_batch_sequential, PsiSpec};
use qtele::protocol::Mode;

fn batches(c: &mut Criterion) {
    let mut group = c.benchmark_group("teleport_batch");
    for trials in [256u64, 4096] {
        group.throughput(Throughput::Elements(trials));
        group.bench_with_input(BenchmarkId::new("sequential", trials), &trials, |b, &n| {
            b.iter(|| teleport_batch_sequential(&PsiSpec::Random, Mode::UnitaryBob, 1, n).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", trials), &trials, |b, &n| {
            b.iter(|| teleport_batch(&PsiSpec::Random, Mode::UnitaryBob, 1, n).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, batches);
criterion_main!(benches);
