use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use geoloss::loss::{dice_loss, fog_loss, sog_loss, FogVariant, SogSided};
use geoloss::metrics::{connected_components, Connectivity};
use geoloss::transform::edt;
use geoloss::{Boundary, DerivativeOp};
use geoloss_bench::phantom_pair;

fn kernels(c: &mut Criterion) {
    for n in [32usize, 64] {
        let (s, g) = phantom_pair(n);
        let mut group = c.benchmark_group(format!("{n}^3"));
        group.sample_size(20);
        group.bench_function(BenchmarkId::new("edt", "signed"), |b| {
            b.iter(|| edt(black_box(&g), true).unwrap())
        });
        group.bench_function("dice", |b| b.iter(|| dice_loss(black_box(&s), &g).unwrap()));
        group.bench_function(BenchmarkId::new("fog", "full"), |b| {
            b.iter(|| fog_loss(black_box(&s), &g, FogVariant::Full, DerivativeOp::default()).unwrap())
        });
        group.bench_function(BenchmarkId::new("sog", "two"), |b| {
            b.iter(|| sog_loss(black_box(&s), &g, SogSided::Two, false, Boundary::Replicate).unwrap())
        });
        group.bench_function(BenchmarkId::new("components", 26), |b| {
            b.iter(|| connected_components(black_box(&g), Connectivity::TwentySix))
        });
        group.finish();
    }
}

criterion_group!(benches, kernels);
criterion_main!(benches);
