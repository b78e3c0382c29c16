use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kaonlab::golden_rule::{flat_comb, integrate, ContinuumSpec};

fn bench_integrate(c: &mut Criterion) {
    // A light comb so a single iteration stays in the millisecond range.
    let spec = ContinuumSpec { gamma: 1.0, spacing_over_gamma: 0.1, bandwidth_over_gamma: 30.0 };
    let (sys, _) = flat_comb(&[spec], 0.0).unwrap();
    c.bench_function("integrate_301_channels_1k_steps", |b| {
        b.iter(|| integrate(&sys, black_box(2.0), 1000).unwrap())
    });
}

criterion_group!(benches, bench_integrate);
criterion_main!(benches);
