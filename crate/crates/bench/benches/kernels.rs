use criterion::{black_box, criterion_group, criterion_main, Criterion};

use mtp_core::cantor::{build_levels, LevelParams};
use mtp_core::content::{frostman_lp, net_content};
use mtp_core::covering::select_kgb_balls;
use mtp_core::families::{ball_sets, generate_balls, truncate_limsup, BallFamilySpec, ShrinkLaw, ShrunkOpenFamily};
use mtp_core::space::{rasterize, RasterMode};
use mtp_core::{Ball, DimensionFunction, Shape};

fn jarnik(tau: f64, q_max: u64, level: u32) -> mtp_core::CubeMask {
    let balls = generate_balls(&BallFamilySpec::rational(tau, q_max), usize::MAX).unwrap();
    // the early balls cover everything, so start halfway through the family
    truncate_limsup(&ball_sets(&balls), balls.len() / 2, usize::MAX, 1, level).unwrap()
}

fn content(c: &mut Criterion) {
    let f = DimensionFunction::power(0.5);
    let mask = jarnik(3.0, 64, 10);
    c.bench_function("net_content jarnik L=10", |b| b.iter(|| net_content(black_box(&mask), &f, 10).unwrap()));
    let small = jarnik(3.0, 16, 6);
    c.bench_function("frostman_lp jarnik L=6", |b| b.iter(|| frostman_lp(black_box(&small), &f, 6).unwrap()));
}

fn raster(c: &mut Criterion) {
    let balls = generate_balls(&BallFamilySpec::rational(2.0, 64), usize::MAX).unwrap();
    let boxes: Vec<_> = balls.iter().map(|b| b.to_box()).collect();
    c.bench_function("rasterize 1d outer L=10", |b| {
        b.iter(|| rasterize(black_box(&boxes), 1, 10, RasterMode::Outer).unwrap())
    });
}

fn selection(c: &mut Criterion) {
    let balls = generate_balls(&BallFamilySpec::rational(2.0, 128), usize::MAX).unwrap();
    let container = Ball::new(vec![0.5], 0.25).unwrap();
    c.bench_function("select_kgb_balls q<=128", |b| {
        b.iter(|| select_kgb_balls(black_box(&container), &balls, 1).unwrap())
    });
}

fn levels(c: &mut Criterion) {
    let f = DimensionFunction::power(0.5);
    let g = DimensionFunction::power(1.0);
    let container = Ball::new(vec![0.5], 0.25).unwrap();
    let balls = generate_balls(&BallFamilySpec::rational(2.0, 128), usize::MAX).unwrap();
    let shapes: Vec<Shape> = balls.into_iter().map(Shape::Ball).collect();
    let fam = ShrunkOpenFamily::build(&shapes, &ShrinkLaw::SubGrid { k: 2 }, &f, 9, 0.0).unwrap();
    let mut group = c.benchmark_group("cantor");
    group.sample_size(10);
    group.bench_function("build_levels q<=128 L=9", |b| {
        b.iter(|| build_levels(black_box(&container), &fam, &f, &g, LevelParams::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, content, raster, selection, levels);
criterion_main!(benches);
