//! Exactness of the spectral heat semigroup on randomized cases.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use super::corpus::{rng_for, sample, FieldKind};
use super::Check;
use crate::error::Result;
use crate::field::{Field, HeatTime, TorusGrid};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub cases: usize,
    /// Largest relative error of the Fourier coefficient ratio of
    /// `P_s cos(k·x)` and `cos(k·x)` against `e^{−sμ_k}`.
    pub max_mode_error: f64,
    /// Largest relative error of `P_{s₂} P_{s₁} f` against `P_{s₁+s₂} f`.
    pub max_semigroup_error: f64,
}

impl SpectralReport {
    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::at_most("heat_mode_factor", self.max_mode_error, 1e-12, format!("{} pure-mode cases", self.cases)),
            Check::at_most("heat_semigroup", self.max_semigroup_error, 1e-12, format!("{} composition cases", self.cases)),
        ]
    }
}

fn relative_sup(a: &Field, b: &Field) -> Result<f64> {
    let scale = b.max_abs();
    let diff = a.sub(b)?.max_abs();
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

/// Runs `cases` randomized grids, modes and smoothing times.
pub fn spectral_exactness(cases: usize, seed: u64) -> Result<SpectralReport> {
    let mut rng = rng_for(seed);
    let mut report = SpectralReport {
        cases,
        max_mode_error: 0.0,
        max_semigroup_error: 0.0,
    };
    for _ in 0..cases {
        let n = [16, 32, 64][rng.random_range(0..3)];
        let side = rng.random_range(0.5..7.0);
        let grid = TorusGrid::square(side, n)?;
        let top = (n / 2 - 1) as i64;
        let k1 = rng.random_range(-top..=top);
        let k2 = rng.random_range(-top..=top);
        let s = 10f64.powf(rng.random_range(-4.0..0.0));
        let mode = Field::from_fn(grid, |x, y| (2.0 * PI * (k1 as f64 * x + k2 as f64 * y) / side).cos())?;
        let mu = (2.0 * PI / side).powi(2) * (k1 * k1 + k2 * k2) as f64;
        let factor = (-s * mu).exp();
        let smoothed = mode.heat_smooth(HeatTime::new(s)?);
        let ratio = smoothed.coefficient(k1, k2).re / mode.coefficient(k1, k2).re;
        let err = if factor == 0.0 { ratio.abs() } else { (ratio - factor).abs() / factor };
        report.max_mode_error = report.max_mode_error.max(err);

        let f = sample(FieldKind::TrigPolynomial, &grid, &mut rng, 1.0)?;
        let s2 = 10f64.powf(rng.random_range(-4.0..0.0));
        let twice = f.heat_smooth(HeatTime::new(s)?).heat_smooth(HeatTime::new(s2)?);
        let once = f.heat_smooth(HeatTime::new(s + s2)?);
        report.max_semigroup_error = report.max_semigroup_error.max(relative_sup(&twice, &once)?);
    }
    Ok(report)
}
