use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use seasonal_vol::charfn::CfArgs;
use seasonal_vol::{cso_call, price_vanilla, CsoSpec, Pattern, SeasonalitySpec, VanillaSpec};
use seasonal_vol_bench::{engine, one_factor, shifted_grid, two_factor};

fn transforms(c: &mut Criterion) {
    let closed = SeasonalitySpec::new(Pattern::Triangle, 0.10, 0.60, 7.0 / 12.0).unwrap();
    let quad = SeasonalitySpec::new(Pattern::Spiked, 0.10, 0.30, 7.0 / 12.0).unwrap();
    c.bench_function("theta_hat/triangle_closed_form", |b| {
        b.iter(|| closed.transform(black_box(2.3), black_box(1.7)).unwrap())
    });
    c.bench_function("theta_hat/spiked_quadrature", |b| {
        b.iter(|| quad.transform(black_box(2.3), black_box(1.7)).unwrap())
    });
}

fn characteristic_function(c: &mut Criterion) {
    let e = engine(two_factor());
    let grid = shifted_grid(16);
    c.bench_function("joint_cf/two_factor_16_points", |b| {
        b.iter(|| {
            grid.iter()
                .map(|&u| {
                    let args = CfArgs::new(u, Complex64::new(0.3, 0.0), 1.0, 1.0, 1.5).unwrap();
                    e.joint_cf(&args).unwrap()
                })
                .sum::<Complex64>()
        })
    });
}

fn pricing(c: &mut Criterion) {
    let mut group = c.benchmark_group("pricing");
    group.sample_size(10);
    let e1 = engine(one_factor());
    let spec = VanillaSpec::call(105.0, 0.5).unwrap();
    group.bench_function("vanilla_call", |b| {
        b.iter(|| price_vanilla(&e1, black_box(&spec)).unwrap())
    });
    let e2 = engine(two_factor());
    let spec = CsoSpec::new(1.0, 1.0, 1.5, 5.0).unwrap();
    group.bench_function("calendar_spread_call", |b| {
        b.iter(|| cso_call(&e2, black_box(&spec)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, transforms, characteristic_function, pricing);
criterion_main!(benches);
