//! Seeded generators for test fields: constants, trigonometric polynomials,
//! rough Gaussian fields and ordered pairs built from them.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::field::{Field, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant,
    TrigPolynomial,
    RoughGaussian,
    /// Random modes with `|k|∞ ≥ N/4`.
    HighFrequency,
}

impl FieldKind {
    pub const ALL: [FieldKind; 4] = [
        FieldKind::Constant,
        FieldKind::TrigPolynomial,
        FieldKind::RoughGaussian,
        FieldKind::HighFrequency,
    ];

    /// Kinds cycled through by index.
    pub fn cycle(index: usize) -> FieldKind {
        Self::ALL[index % Self::ALL.len()]
    }
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_modes(grid: &TorusGrid, rng: &mut ChaCha8Rng, terms: usize, low: i64, high: i64, scale: f64) -> Result<Field> {
    let side = grid.side();
    let modes: Vec<(f64, f64, f64, f64)> = (0..terms)
        .map(|_| {
            let k = loop {
                let k: (i64, i64) = (rng.random_range(-high..=high), rng.random_range(-high..=high));
                if k.0.abs().max(k.1.abs()) >= low {
                    break k;
                }
            };
            let amp = scale * normal(rng) / (terms as f64).sqrt();
            let phase = rng.random_range(0.0..2.0 * PI);
            (k.0 as f64, k.1 as f64, amp, phase)
        })
        .collect();
    Field::from_fn(*grid, |x, y| {
        modes
            .iter()
            .map(|(k1, k2, a, ph)| a * (2.0 * PI * (k1 * x + k2 * y) / side + ph).cos())
            .sum()
    })
}

/// Draws one field of the given kind with values of order `scale`.
pub fn sample(kind: FieldKind, grid: &TorusGrid, rng: &mut ChaCha8Rng, scale: f64) -> Result<Field> {
    let n = grid.points() as i64;
    match kind {
        FieldKind::Constant => Field::constant(*grid, scale * rng.random_range(-1.0..1.0)),
        FieldKind::TrigPolynomial => {
            let offset = scale * 0.5 * normal(rng);
            Ok(random_modes(grid, rng, 6, 0, 6, scale)?.map(|v| v + offset))
        }
        FieldKind::RoughGaussian => {
            let values = (0..grid.len()).map(|_| scale * normal(rng)).collect();
            Field::from_values(*grid, values)
        }
        FieldKind::HighFrequency => random_modes(grid, rng, 8, n / 4, n / 2 - 1, scale),
    }
}

/// `(upper, lower)` with `lower = upper − h²` pointwise, `h` of kind
/// `gap_kind`, so that `lower ⪯ upper` holds exactly on the grid.
pub fn ordered_pair(
    kind: FieldKind,
    gap_kind: FieldKind,
    grid: &TorusGrid,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> Result<(Field, Field)> {
    let upper = sample(kind, grid, rng, scale)?;
    let h = sample(gap_kind, grid, rng, scale)?;
    let lower = upper.zip_with(&h, |u, g| u - g * g)?;
    Ok((upper, lower))
}
