use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wicksync::besov::{
    besov_norm_p, besov_norm_sup, lemma_a1_gap, lemma_a2_gap, p_to_sup_constant, phi_besov, phi_p, sup_to_p_constant,
};
use wicksync::experiments::corpus::{ordered_pair, sample, FieldKind};
use wicksync::{BesovParams, Field, SGrid, TorusGrid};

fn grid() -> TorusGrid {
    TorusGrid::square(1.0, 32).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn sup_norm_of_cosine_matches_calculus() {
    // max_s s^{1/4} e^{−s} is attained at s = 1/4
    let g = TorusGrid::square(2.0 * PI, 64).unwrap();
    let f = Field::from_fn(g, |x, _| x.cos()).unwrap();
    let exact = 0.25f64.powf(0.25) * (-0.25f64).exp();
    let dense = SGrid::geometric(g.spacing().powi(2), 4096).unwrap();
    assert_relative_eq!(besov_norm_sup(&f, 0.5, &dense).unwrap(), exact, max_relative = 1e-5);
    let coarse = SGrid::for_grid(&g);
    let on_grid = besov_norm_sup(&f, 0.5, &coarse).unwrap();
    assert!(on_grid <= exact + 1e-12 && on_grid >= 0.99 * exact);
}

#[test]
fn sup_norm_increases_under_refinement() {
    let g = grid();
    for seed in 0..20 {
        let f = sample(FieldKind::cycle(seed as usize), &g, &mut rng(seed), 1.0).unwrap();
        let coarse = SGrid::geometric(g.spacing().powi(2), 33).unwrap();
        let fine = SGrid::geometric(g.spacing().powi(2), 65).unwrap();
        // every node of the coarse grid is a node of the fine one
        assert!(besov_norm_sup(&f, 0.3, &fine).unwrap() >= besov_norm_sup(&f, 0.3, &coarse).unwrap() - 1e-12);
    }
}

#[test]
fn p_norm_of_cosine_matches_scalar_quadrature() {
    let g = TorusGrid::square(2.0 * PI, 64).unwrap();
    let f = Field::from_fn(g, |x, _| x.cos()).unwrap();
    // a small s_min keeps the constant continuation below it negligible
    let params = BesovParams::new(0.5, 2, SGrid::geometric(1e-8, 400).unwrap()).unwrap();
    // ∫₀¹ s^{1/2} e^{−2s} 2π² ds/s with s = x²
    let reference = (2.0 * PI * PI * simpson(|x| 2.0 * (-2.0 * x * x).exp(), 0.0, 1.0, 2000)).sqrt();
    assert_relative_eq!(besov_norm_p(&f, &params), reference, max_relative = 1e-5);
}

#[test]
fn phi_besov_of_unit_constant() {
    let g = grid();
    // α − d/p = 1 with p = 2
    let params = BesovParams::for_grid(&g, 2.0, 2).unwrap();
    assert_relative_eq!(phi_besov(&Field::constant(g, 1.0).unwrap(), &params).unwrap().value(), 2.0, max_relative = 1e-12);
    assert!(phi_besov(&Field::constant(g, 1.0).unwrap(), &BesovParams::for_grid(&g, 0.5, 2).unwrap()).is_err());
}

fn params_strategy() -> impl Strategy<Value = BesovParams> {
    (1.05f64..1.5, 2u32..6).prop_map(|(alpha, p)| BesovParams::for_grid(&grid(), alpha, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn phi_is_monotone_under_order(kind in 0usize..4, seed in any::<u64>(), params in params_strategy()) {
        let (upper, lower) = ordered_pair(FieldKind::cycle(kind), FieldKind::cycle(kind + 1), &grid(), &mut rng(seed), 1.0).unwrap();
        let p = params.p();
        prop_assert!(phi_p(&lower, p).unwrap().value() <= phi_p(&upper, p).unwrap().value() + 1e-12 * (1.0 + phi_p(&upper, p).unwrap().value().abs()));
        let (a, b) = (phi_besov(&lower, &params).unwrap().value(), phi_besov(&upper, &params).unwrap().value());
        prop_assert!(a <= b + 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn scaling(kind in 0usize..4, seed in any::<u64>(), lambda in 0.1f64..5.0, params in params_strategy()) {
        let f = sample(FieldKind::cycle(kind), &grid(), &mut rng(seed), 1.0).unwrap();
        let g = f.scale(lambda);
        let p = params.p();
        let phi = phi_p(&f, p).unwrap().value();
        prop_assert!((phi_p(&g, p).unwrap().value() - lambda.powi(p as i32) * phi).abs() <= 1e-12 * lambda.powi(p as i32) * (1.0 + phi.abs()));
        let minus = f.scale(-lambda);
        let sup = besov_norm_sup(&f, params.alpha(), params.s_grid()).unwrap();
        prop_assert!((besov_norm_sup(&minus, params.alpha(), params.s_grid()).unwrap() - lambda * sup).abs() <= 1e-12 * lambda * sup);
        let norm = besov_norm_p(&f, &params);
        prop_assert!((besov_norm_p(&minus, &params) - lambda * norm).abs() <= 1e-12 * lambda * norm);
    }

    #[test]
    fn phi_bounded_by_norm_power(kind in 0usize..4, seed in any::<u64>(), params in params_strategy()) {
        let f = sample(FieldKind::cycle(kind), &grid(), &mut rng(seed), 1.0).unwrap();
        let p = params.p();
        let shifted = params.with_alpha(params.shifted_alpha(2)).unwrap();
        let bound = 2f64.powi(p as i32 - 1) * besov_norm_p(&f, &shifted).powi(p as i32);
        prop_assert!(phi_besov(&f, &params).unwrap().value().abs() <= bound + 1e-9);
        prop_assert!(phi_p(&f, p).unwrap().value().abs() <= 2f64.powi(p as i32 - 1) * f.lp_norm(wicksync::LpIndex::Finite(p)).powi(p as i32) * (1.0 + 1e-12));
    }

    #[test]
    fn lemma_contracts(kind in 0usize..4, seed in any::<u64>(), params in params_strategy()) {
        let (upper, lower) = ordered_pair(FieldKind::cycle(kind), FieldKind::cycle(kind / 2), &grid(), &mut rng(seed), 1.0).unwrap();
        prop_assert!(lemma_a1_gap(&upper, &lower, &params).unwrap().holds());
        let f = sample(FieldKind::cycle(kind), &grid(), &mut rng(seed ^ 1), 1.0).unwrap();
        let g = sample(FieldKind::cycle(kind + 1), &grid(), &mut rng(seed ^ 2), 1.0).unwrap();
        prop_assert!(lemma_a2_gap(&f, &g, &params).unwrap().holds());
        prop_assert!(lemma_a2_gap(&f, &Field::zeros(grid()).unwrap(), &params).unwrap().holds());
        let same = lemma_a2_gap(&f, &f, &params).unwrap();
        prop_assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
    }

    #[test]
    fn sup_form_embeds_into_p_form(kind in 0usize..4, seed in any::<u64>(), params in params_strategy()) {
        let f = sample(FieldKind::cycle(kind), &grid(), &mut rng(seed), 1.0).unwrap();
        let c1 = sup_to_p_constant(&grid(), &params);
        let sup = besov_norm_sup(&f, params.alpha(), params.s_grid()).unwrap();
        prop_assert!(besov_norm_p(&f, &params) <= c1 * sup * (1.0 + 1e-12));
    }
}

#[test]
fn sup_to_p_constant_is_attained_by_constants_up_to_the_node_sum() {
    let g = grid();
    let params = BesovParams::for_grid(&g, 0.5, 3).unwrap();
    let c = Field::constant(g, 1.0).unwrap();
    // for constants the p-form equals (L^d Σ_j W_j)^{1/p}, below C₁
    let ratio = besov_norm_p(&c, &params) / besov_norm_sup(&c, 0.5, params.s_grid()).unwrap();
    assert!(ratio <= sup_to_p_constant(&g, &params));
}

/// Band-limited test function evaluated on grids of increasing resolution.
fn band_limited(n: usize, seed: u64) -> Field {
    use rand::Rng;
    let mut r = rng(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| (r.random_range(-3..=3) as f64, r.random_range(-3..=3) as f64, r.random_range(-1.0..1.0), r.random_range(0.0..6.3)))
        .collect();
    Field::from_fn(TorusGrid::square(1.0, n).unwrap(), move |x, y| {
        modes.iter().map(|(k1, k2, a, ph)| a * (2.0 * PI * (k1 * x + k2 * y) + ph).cos()).sum()
    })
    .unwrap()
}

#[test]
fn p_to_sup_ratio_does_not_grow_with_resolution() {
    let (alpha, p) = (1.0, 4);
    let ratio = |n: usize| -> f64 {
        let g = TorusGrid::square(1.0, n).unwrap();
        // both norms on the same (resolution-independent) s-grid
        let s_grid = SGrid::geometric(1.0 / (32.0 * 32.0), 64).unwrap();
        let params = BesovParams::new(alpha, p, s_grid.clone()).unwrap();
        let shifted = params.with_alpha(params.shifted_alpha(g.dim())).unwrap();
        (0..50)
            .map(|seed| {
                let f = band_limited(n, seed);
                let sup = besov_norm_sup(&f, alpha, &s_grid).unwrap();
                assert!(sup <= p_to_sup_constant(&g, &params).unwrap() * besov_norm_p(&f, &shifted) * (1.0 + 1e-12));
                sup / besov_norm_p(&f, &shifted)
            })
            .fold(0.0, f64::max)
    };
    let (r32, r64, r128) = (ratio(32), ratio(64), ratio(128));
    assert!(r32.is_finite() && r32 > 0.0);
    // only the lattice maximum of the smoothed field moves with N
    assert!(r64 <= 1.02 * r32 && r128 <= 1.02 * r64, "{r32} {r64} {r128}");
}
