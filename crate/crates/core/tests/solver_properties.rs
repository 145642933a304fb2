use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wicksync::experiments::corpus::{ordered_pair, sample, FieldKind};
use wicksync::solver::{energy, evolve, evolve_coupled, step};
use wicksync::{Field, NoiseRealization, RenormConstant, Scheme, SolverConfig, TorusGrid};

const DT: f64 = 2e-3;

fn config(n: usize) -> SolverConfig {
    SolverConfig::new(TorusGrid::square(0.5, n).unwrap(), DT).unwrap()
}

fn noise(config: &SolverConfig, seed: u64, t1: f64) -> NoiseRealization {
    NoiseRealization::new(seed, config.grid, DT, 0.0, t1, config.truncation).unwrap()
}

fn initial(kind: usize, seed: u64, grid: &TorusGrid, scale: f64) -> Field {
    sample(FieldKind::cycle(kind), grid, &mut ChaCha8Rng::seed_from_u64(seed), scale).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn restarts_reproduce_the_direct_run(kind in 0usize..4, seed in any::<u64>(), restart in 1usize..99) {
        let cfg = config(16);
        let w = noise(&cfg, seed, 0.2);
        let f = initial(kind, seed, &cfg.grid, 3.0);
        let r = restart as f64 * DT;
        let direct = evolve(&f, 0.0, 0.2, &cfg, &w, &[r]).unwrap();
        let first = evolve(&f, 0.0, r, &cfg, &w, &[]).unwrap();
        let second = evolve(&first.end, r, 0.2, &cfg, &w, &[]).unwrap();
        prop_assert_eq!(direct.snapshot_at(r).unwrap().values(), first.end.values());
        prop_assert_eq!(direct.end.values(), second.end.values());
    }

    #[test]
    fn coupled_runs_keep_their_order(kind in 0usize..4, seed in any::<u64>()) {
        let cfg = config(16);
        let w = noise(&cfg, seed, 0.2);
        let (upper, lower) = ordered_pair(FieldKind::cycle(kind), FieldKind::cycle(kind + 2), &cfg.grid, &mut ChaCha8Rng::seed_from_u64(seed), 2.0).unwrap();
        let runs = evolve_coupled(&[lower, upper], 0.0, 0.2, &cfg, &w, &[0.1]).unwrap();
        prop_assert!(runs[0].snapshot_at(0.1).unwrap().order_gap(runs[1].snapshot_at(0.1).unwrap()).unwrap() >= -1e-10);
        prop_assert!(runs[0].end.order_gap(&runs[1].end).unwrap() >= -1e-10);
    }

    #[test]
    fn energy_decreases_without_noise(kind in 0usize..4, seed in any::<u64>(), scheme in prop::sample::select(vec![Scheme::MonotoneSplitting, Scheme::SemiImplicit])) {
        let cfg = config(16).with_scheme(scheme).unwrap();
        let zero = Field::zeros(cfg.grid).unwrap();
        let mut u = initial(kind, seed, &cfg.grid, 2.0);
        let mut e = energy(&u, &cfg).unwrap();
        for _ in 0..100 {
            u = step(&u, &cfg, &zero).unwrap();
            let next = energy(&u, &cfg).unwrap();
            prop_assert!(next <= e + 1e-10, "energy rose from {} to {}", e, next);
            e = next;
        }
    }
}

#[test]
fn identical_members_stay_identical() {
    let cfg = config(32);
    let w = noise(&cfg, 9, 0.4);
    let f = initial(2, 9, &cfg.grid, 1.0);
    let runs = evolve_coupled(&[f.clone(), f.clone()], 0.0, 0.4, &cfg, &w, &[0.2]).unwrap();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], evolve(&f, 0.0, 0.4, &cfg, &w, &[0.2]).unwrap());
}

#[test]
fn different_seeds_give_different_paths() {
    let cfg = config(16);
    let f = Field::zeros(cfg.grid).unwrap();
    let a = evolve(&f, 0.0, 0.1, &cfg, &noise(&cfg, 1, 0.1), &[]).unwrap();
    let b = evolve(&f, 0.0, 0.1, &cfg, &noise(&cfg, 2, 0.1), &[]).unwrap();
    assert!(a.end.sub(&b.end).unwrap().max_abs() > 1e-3);
}

#[test]
fn empty_interval_returns_the_initial_field() {
    let cfg = config(16);
    let f = initial(1, 4, &cfg.grid, 1.0);
    let run = evolve(&f, 0.0, 0.0, &cfg, &noise(&cfg, 4, 0.1), &[0.0]).unwrap();
    assert_eq!(run.end.values(), f.values());
    assert_eq!(run.snapshot_at(0.0).unwrap().values(), f.values());
}

/// `u' = u − u³` by classical Runge-Kutta with `steps` steps per unit time.
fn scalar_reference(u0: f64, t: f64, steps: usize) -> f64 {
    let g = |u: f64| u - u * u * u;
    let h = 1.0 / steps as f64;
    let mut u = u0;
    for _ in 0..(t * steps as f64).round() as usize {
        let k1 = g(u);
        let k2 = g(u + 0.5 * h * k1);
        let k3 = g(u + 0.5 * h * k2);
        let k4 = g(u + h * k3);
        u += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    u
}

#[test]
fn constant_data_follow_the_scalar_ode() {
    let dt = 1e-2;
    let cfg = SolverConfig::new(TorusGrid::square(1.0, 16).unwrap(), dt)
        .unwrap()
        .with_renorm(RenormConstant::fixed(0.0))
        .unwrap();
    let w = NoiseRealization::new(0, cfg.grid, dt, 0.0, 20.0, cfg.truncation).unwrap().with_amplitude(0.0);
    let f = Field::constant(cfg.grid, 2.0).unwrap();
    let run = evolve(&f, 0.0, 20.0, &cfg, &w, &[0.5, 1.0, 3.0]).unwrap();
    for t in [0.5, 1.0, 3.0] {
        let reference = scalar_reference(2.0, t, 10_000);
        for v in run.snapshot_at(t).unwrap().values() {
            assert!((v - reference).abs() <= 1e-9, "t = {t}: {v} vs {reference}");
        }
    }
    assert!(run.end.values().iter().all(|v| (v - 1.0).abs() <= 1e-6));
}
