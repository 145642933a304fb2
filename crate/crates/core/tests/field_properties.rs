use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wicksync::experiments::corpus::{ordered_pair, sample, FieldKind};
use wicksync::{Field, HeatTime, LpIndex, TorusGrid};

fn field_strategy() -> impl Strategy<Value = Field> {
    (prop::sample::select(vec![8usize, 16, 32]), 0.5f64..7.0, 0usize..4, any::<u64>()).prop_map(|(n, side, kind, seed)| {
        let grid = TorusGrid::square(side, n).unwrap();
        sample(FieldKind::cycle(kind), &grid, &mut ChaCha8Rng::seed_from_u64(seed), 1.0).unwrap()
    })
}

fn relative_sup(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_round_trip_is_identity(f in field_strategy()) {
        let back = Field::from_spectrum(*f.grid(), f.spectrum().to_vec()).unwrap();
        prop_assert!(relative_sup(&back, &f) <= 1e-12);
    }

    #[test]
    fn heat_semigroup_composes(f in field_strategy(), s in 1e-4f64..1.0, t in 1e-4f64..1.0) {
        let twice = f.heat_smooth(HeatTime::new(s).unwrap()).heat_smooth(HeatTime::new(t).unwrap());
        let once = f.heat_smooth(HeatTime::new(s + t).unwrap());
        prop_assert!(relative_sup(&twice, &once) <= 1e-12);
    }

    #[test]
    fn heat_flow_keeps_mean_and_contracts(f in field_strategy(), s in 1e-4f64..1.0) {
        let g = f.heat_smooth(HeatTime::new(s).unwrap());
        prop_assert!((g.mean() - f.mean()).abs() <= 1e-12 * (1.0 + f.max_abs()));
        prop_assert!(g.max_abs() <= f.max_abs() + 1e-12);
    }

    #[test]
    fn heat_flow_preserves_order(kind in 0usize..4, seed in any::<u64>(), s in 1e-4f64..1.0) {
        let grid = TorusGrid::square(1.0, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (upper, lower) = ordered_pair(FieldKind::cycle(kind), FieldKind::cycle(kind + 1), &grid, &mut rng, 1.0).unwrap();
        prop_assert!(lower.order_gap(&upper).unwrap() >= 0.0);
        let h = HeatTime::new(s).unwrap();
        prop_assert!(lower.heat_smooth(h).order_gap(&upper.heat_smooth(h)).unwrap() >= -1e-10);
    }
}

#[test]
fn heat_smoothing_of_eigenfunctions() {
    let grid = TorusGrid::square(2.0 * PI, 64).unwrap();
    let cos = Field::from_fn(grid, |x, _| x.cos()).unwrap();
    let smoothed = cos.heat_smooth(HeatTime::new(0.5).unwrap());
    assert!(relative_sup(&smoothed, &cos.scale((-0.5f64).exp())) <= 1e-12);
    let sin3 = Field::from_fn(grid, |x, _| (3.0 * x).sin()).unwrap();
    let smoothed = sin3.heat_smooth(HeatTime::new(0.1).unwrap());
    assert!(relative_sup(&smoothed, &sin3.scale((-0.9f64).exp())) <= 1e-12);
}

#[test]
fn l2_norm_of_cosine_matches_closed_form() {
    let grid = TorusGrid::square(2.0 * PI, 64).unwrap();
    let cos = Field::from_fn(grid, |x, _| x.cos()).unwrap();
    // ∫ cos² over the square is half its area
    assert_relative_eq!(cos.lp_norm(LpIndex::Finite(2)), (2.0 * PI * PI).sqrt(), max_relative = 1e-12);
}

#[test]
fn order_gap_of_shifted_sine() {
    let grid = TorusGrid::square(2.0 * PI, 32).unwrap();
    let f = Field::from_fn(grid, |x, _| x.sin()).unwrap();
    let g = f.map(|v| v + 0.25);
    assert_relative_eq!(f.order_gap(&g).unwrap(), 0.25, max_relative = 1e-12);
    assert_eq!(f.order_gap(&f).unwrap(), 0.0);
}
