use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use wicksync::besov::{besov_norm_p, besov_norm_sup};
use wicksync::noise::NoiseRealization;
use wicksync::{BesovParams, Field, SGrid, SolverConfig, TorusGrid};

fn sample_field(grid: TorusGrid) -> Field {
    Field::from_fn(grid, |x, y| (6.0 * x).sin() * (3.0 * y).cos() + 0.3 * (17.0 * x + 5.0 * y).cos()).unwrap()
}

fn solver_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in [32, 64, 128] {
        let grid = TorusGrid::square(1.0, n).unwrap();
        let config = SolverConfig::new(grid, 1e-3).unwrap();
        let noise = NoiseRealization::new(1, grid, 1e-3, 0.0, 1.0, config.truncation).unwrap();
        let increment = noise.increment(0).unwrap();
        let u = sample_field(grid);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| wicksync::solver::step(black_box(&u), &config, &increment).unwrap())
        });
    }
    group.finish();
}

fn noise_increment(c: &mut Criterion) {
    let grid = TorusGrid::square(1.0, 64).unwrap();
    let noise = NoiseRealization::new(1, grid, 1e-3, 0.0, 1.0, 31).unwrap();
    let mut step = 0;
    c.bench_function("noise_increment/64", |b| {
        b.iter(|| {
            step = (step + 1) % 1000;
            noise.increment(step).unwrap()
        })
    });
}

fn fft_round_trip(c: &mut Criterion) {
    let grid = TorusGrid::square(1.0, 64).unwrap();
    let u = sample_field(grid);
    c.bench_function("fft_round_trip/64", |b| b.iter(|| black_box(&u).to_spectral().to_physical()));
}

fn besov_norms(c: &mut Criterion) {
    let grid = TorusGrid::square(1.0, 64).unwrap();
    let u = sample_field(grid);
    let s_grid = SGrid::for_grid(&grid);
    let params = BesovParams::new(0.1, 41, s_grid.clone()).unwrap();
    c.bench_function("besov_sup/64", |b| b.iter(|| besov_norm_sup(black_box(&u), 0.1, &s_grid).unwrap()));
    c.bench_function("besov_p41/64", |b| b.iter(|| besov_norm_p(black_box(&u), &params)));
}

criterion_group!(benches, solver_step, noise_increment, fft_round_trip, besov_norms);
criterion_main!(benches);
