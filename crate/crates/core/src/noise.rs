//! Spectrally truncated space-time white noise, renormalization constants
//! and Wick (Hermite) powers.
//!
//! Increments are generated by a counter-based scheme: the seed fixes a
//! ChaCha8 key and the step index selects the ChaCha stream, so the
//! increment of step `n` is a pure function of `(seed, n)`. Disjoint step
//! ranges read disjoint streams, which gives independence of the noise on
//! disjoint time windows and bit-exact replay.
//!
//! Only modes with `|k|_∞ ≤ truncation` receive noise, with
//! `truncation ≤ N/2 − 1` so that no retained mode is its own conjugate
//! apart from `k = 0`. Each retained coefficient has `E|c_k|² = dt / L^d`,
//! the projection of white noise onto `exp(2πi k·x/L)`; the zero mode is
//! included.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::{Field, TorusGrid};

/// Domain separation between increment streams and other draws from the
/// same seed.
const STATIONARY_SALT: u64 = 0x5157_A710_0A4B_1E55;

/// Converts a time to a step index, rejecting times that are not integer
/// multiples of `dt` (relative tolerance 1e−9).
pub fn time_to_step(t: f64, dt: f64) -> Result<i64> {
    let x = t / dt;
    let n = x.round();
    if (x - n).abs() > 1e-9 * n.abs().max(1.0) {
        return Err(Error::OffGridTime(t, dt));
    }
    Ok(n as i64)
}

/// Half of the retained modes, one representative per conjugate pair, with
/// the index of its partner.
#[derive(Debug, Clone, PartialEq)]
struct ModeTable {
    pairs: Vec<(usize, usize)>,
    zero: usize,
}

impl ModeTable {
    fn new(grid: &TorusGrid, truncation: usize) -> Self {
        let n = grid.points();
        let t = truncation as i64;
        let mut pairs = Vec::new();
        for k1 in 0..=t {
            for k2 in -t..=t {
                if k1 == 0 && k2 <= 0 {
                    continue;
                }
                let idx = grid.index_of(k1) * n + grid.index_of(k2);
                let conj = grid.index_of(-k1) * n + grid.index_of(-k2);
                pairs.push((idx, conj));
            }
        }
        Self { pairs, zero: 0 }
    }

    fn count(&self) -> usize {
        2 * self.pairs.len() + 1
    }
}

/// Fills `out` with a Hermitian array of Gaussian coefficients on the
/// retained modes, with `E|c_k|² = variance(k)`; all other entries are 0.
fn fill_gaussian(
    table: &ModeTable,
    rng: &mut ChaCha8Rng,
    out: &mut [Complex64],
    include_zero: bool,
    variance: impl Fn(usize) -> f64,
) {
    out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
    let zero_draw: f64 = StandardNormal.sample(rng);
    if include_zero {
        out[table.zero] = Complex64::new(variance(table.zero).sqrt() * zero_draw, 0.0);
    }
    for &(idx, conj) in &table.pairs {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        let scale = (variance(idx) / 2.0).sqrt();
        let c = Complex64::new(scale * a, scale * b);
        out[idx] = c;
        out[conj] = c.conj();
    }
}

/// A seeded, replayable realization of truncated space-time white noise on
/// the step window `[start_step, end_step)`.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    seed: u64,
    grid: TorusGrid,
    dt: f64,
    start_step: i64,
    end_step: i64,
    truncation: usize,
    amplitude: f64,
    key: ChaCha8Rng,
    modes: ModeTable,
}

impl NoiseRealization {
    /// Noise on the time window `[t0, t1)`, both multiples of `dt`.
    pub fn new(seed: u64, grid: TorusGrid, dt: f64, t0: f64, t1: f64, truncation: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let start_step = time_to_step(t0, dt)?;
        let end_step = time_to_step(t1, dt)?;
        Self::from_steps(seed, grid, dt, start_step, end_step, truncation)
    }

    pub fn from_steps(
        seed: u64,
        grid: TorusGrid,
        dt: f64,
        start_step: i64,
        end_step: i64,
        truncation: usize,
    ) -> Result<Self> {
        grid.require_2d()?;
        if end_step < start_step {
            return Err(Error::InvalidParameter(format!(
                "empty noise window [{start_step}, {end_step})"
            )));
        }
        if truncation < 1 || truncation > grid.points() / 2 - 1 {
            return Err(Error::InvalidParameter(format!(
                "truncation {truncation} must lie in [1, N/2 − 1] for N = {}",
                grid.points()
            )));
        }
        Ok(Self {
            seed,
            grid,
            dt,
            start_step,
            end_step,
            truncation,
            amplitude: 1.0,
            key: ChaCha8Rng::seed_from_u64(seed),
            modes: ModeTable::new(&grid, truncation),
        })
    }

    /// Scales every increment by `amplitude` (0 switches the noise off).
    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn start_step(&self) -> i64 {
        self.start_step
    }

    pub fn end_step(&self) -> i64 {
        self.end_step
    }

    /// Number of modes receiving noise, `(2·truncation + 1)²`.
    pub fn retained_modes(&self) -> usize {
        self.modes.count()
    }

    /// Whether mode `(k1, k2)` receives noise.
    pub fn is_retained(&self, k1: i64, k2: i64) -> bool {
        let t = self.truncation as i64;
        k1.abs() <= t && k2.abs() <= t
    }

    pub fn covers(&self, first: i64, last_exclusive: i64) -> bool {
        first >= self.start_step && last_exclusive <= self.end_step
    }

    /// Variance `E|c_k|²` of each retained coefficient.
    pub fn mode_variance(&self) -> f64 {
        self.amplitude * self.amplitude * self.dt / self.grid.volume()
    }

    /// The increment over `[n·dt, (n+1)·dt)` as a field.
    pub fn increment(&self, step: i64) -> Result<Field> {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        self.fill_increment(step, &mut coefficients)?;
        Ok(Field::from_hermitian_spectrum(self.grid, coefficients))
    }

    /// Writes the spectral coefficients of the increment of `step` into `out`.
    pub fn fill_increment(&self, step: i64, out: &mut [Complex64]) -> Result<()> {
        if step < self.start_step || step >= self.end_step {
            return Err(Error::OutsideNoiseWindow {
                step,
                start: self.start_step,
                end: self.end_step,
            });
        }
        let mut rng = self.key.clone();
        rng.set_stream(step as u64);
        rng.set_word_pos(0);
        let variance = self.mode_variance();
        fill_gaussian(&self.modes, &mut rng, out, true, |_| variance);
        Ok(())
    }
}

/// Galerkin renormalization constant: the stationary pointwise variance of
/// the truncated linear field with reference mass `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormConstant {
    pub value: f64,
    pub truncation: usize,
    pub mass: f64,
}

impl RenormConstant {
    /// A constant with no associated mode sum (e.g. `C = 0` for tests).
    pub fn fixed(value: f64) -> Self {
        Self {
            value,
            truncation: 0,
            mass: 0.0,
        }
    }
}

/// `C_N = L^{−d} Σ_{0 < |k|_∞ ≤ truncation} 1 / (2(μ_k + m))`.
///
/// The zero mode is excluded; the resulting shift is a finite constant.
pub fn renorm_constant(grid: &TorusGrid, truncation: usize, mass: f64) -> Result<RenormConstant> {
    grid.require_2d()?;
    if truncation < 1 {
        return Err(Error::InvalidParameter("truncation must be at least 1".into()));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    let scale = (2.0 * PI / grid.side()).powi(2);
    let t = truncation as i64;
    let mut sum = 0.0;
    for k1 in -t..=t {
        for k2 in -t..=t {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let mu = scale * (k1 * k1 + k2 * k2) as f64;
            sum += 1.0 / (2.0 * (mu + mass));
        }
    }
    Ok(RenormConstant {
        value: sum / grid.volume(),
        truncation,
        mass,
    })
}

/// Samples the stationary law of the truncated linear field
/// `dZ = (Δ − m) Z dt + dW` with the zero mode removed: independent
/// coefficients with `E|c_k|² = 1 / (2 (μ_k + m) L^d)`.
pub fn stationary_linear_field(grid: &TorusGrid, truncation: usize, mass: f64, seed: u64) -> Result<Field> {
    grid.require_2d()?;
    if truncation < 1 || truncation > grid.points() / 2 - 1 {
        return Err(Error::InvalidParameter(format!("truncation {truncation} out of range")));
    }
    let table = ModeTable::new(grid, truncation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ STATIONARY_SALT);
    let mut coefficients = vec![Complex64::new(0.0, 0.0); grid.len()];
    let volume = grid.volume();
    fill_gaussian(&table, &mut rng, &mut coefficients, false, |idx| {
        1.0 / (2.0 * (grid.eigenvalue(idx) + mass) * volume)
    });
    Ok(Field::from_hermitian_spectrum(*grid, coefficients))
}

/// `H_k(x, C)` via `H₀ = 1`, `H₁ = x`, `H_{k+1} = x H_k − k C H_{k−1}`.
pub fn hermite_value(k: usize, x: f64, c: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = x * cur - j as f64 * c * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Pointwise `H_k(u, C)`.
pub fn hermite(k: usize, u: &Field, c: f64) -> Field {
    u.map(|x| hermite_value(k, x, c))
}

/// Monomial coefficients of `H_k(·, C)`, lowest degree first.
pub fn hermite_coefficients(k: usize, c: f64) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for j in 1..k {
        let mut next = vec![0.0; j + 2];
        for (i, a) in cur.iter().enumerate() {
            next[i + 1] += a;
        }
        for (i, a) in prev.iter().enumerate() {
            next[i] -= j as f64 * c * a;
        }
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(side: f64, n: usize) -> TorusGrid {
        TorusGrid::square(side, n).unwrap()
    }

    #[test]
    fn increments_replay_bit_exactly() {
        let noise = NoiseRealization::new(7, grid(1.0, 16), 1e-3, 0.0, 1.0, 7).unwrap();
        let a = noise.increment(12).unwrap();
        let b = noise.clone().increment(12).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), noise.increment(13).unwrap().values());
        let other = NoiseRealization::new(8, grid(1.0, 16), 1e-3, 0.0, 1.0, 7).unwrap();
        assert_ne!(a.values(), other.increment(12).unwrap().values());
    }

    #[test]
    fn window_is_enforced() {
        let noise = NoiseRealization::new(1, grid(1.0, 16), 0.01, -1.0, 1.0, 7).unwrap();
        assert_eq!(noise.start_step(), -100);
        assert!(noise.increment(-100).is_ok());
        assert!(noise.increment(99).is_ok());
        assert!(matches!(noise.increment(100), Err(Error::OutsideNoiseWindow { .. })));
        assert!(matches!(noise.increment(-101), Err(Error::OutsideNoiseWindow { .. })));
        assert!(NoiseRealization::new(1, grid(1.0, 16), 0.01, 0.0, 0.015, 7).is_err());
    }

    #[test]
    fn truncated_modes_are_zero() {
        let g = grid(1.0, 32);
        let noise = NoiseRealization::new(3, g, 1e-2, 0.0, 1.0, 5).unwrap();
        let inc = noise.increment(0).unwrap();
        let mut nonzero = 0;
        for (idx, c) in inc.spectrum().iter().enumerate() {
            let (k1, k2) = g.mode(idx);
            if noise.is_retained(k1, k2) {
                nonzero += usize::from(c.norm() > 0.0);
            } else {
                assert_eq!(*c, Complex64::new(0.0, 0.0), "mode {k1},{k2}");
            }
        }
        assert_eq!(nonzero, noise.retained_modes());
        assert_eq!(noise.retained_modes(), 121);
        assert!(NoiseRealization::new(3, g, 1e-2, 0.0, 1.0, 16).is_err());
    }

    #[test]
    fn increments_are_real_fields() {
        let noise = NoiseRealization::new(5, grid(2.0, 16), 1e-2, 0.0, 1.0, 7).unwrap();
        let inc = noise.increment(3).unwrap();
        let back = Field::from_spectrum(*inc.grid(), inc.spectrum().to_vec()).unwrap();
        for (a, b) in back.values().iter().zip(inc.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_amplitude_silences_noise() {
        let noise = NoiseRealization::new(5, grid(2.0, 16), 1e-2, 0.0, 1.0, 7)
            .unwrap()
            .with_amplitude(0.0);
        assert!(noise.increment(0).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn renorm_constant_single_shell() {
        let g = grid(2.0 * PI, 16);
        let c = renorm_constant(&g, 1, 1.0).unwrap();
        assert_relative_eq!(c.value, (5.0 / 3.0) / (4.0 * PI * PI), max_relative = 1e-14);
        assert_relative_eq!(c.value, 0.042217, max_relative = 1e-4);
        let c2 = renorm_constant(&g, 2, 1.0).unwrap();
        assert!(c2.value > c.value);
        assert!(renorm_constant(&g, 0, 1.0).is_err());
        assert!(renorm_constant(&g, 1, 0.0).is_err());
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_value(3, 2.0, 1.0), 2.0);
        assert_eq!(hermite_value(2, 0.0, 1.0), -1.0);
        assert_eq!(hermite_value(0, 5.0, 3.0), 1.0);
        assert_eq!(hermite_value(1, 5.0, 3.0), 5.0);
        for k in 0..7 {
            assert_relative_eq!(hermite_value(k, 1.3, 0.0), 1.3f64.powi(k as i32), max_relative = 1e-14);
        }
        assert_eq!(hermite_coefficients(3, 0.5), vec![0.0, -1.5, 0.0, 1.0]);
        for k in 0..7 {
            let coeffs = hermite_coefficients(k, 0.7);
            let x: f64 = -1.1;
            let horner = coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a);
            assert_relative_eq!(horner, hermite_value(k, x, 0.7), max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn time_to_step_rejects_off_grid_times() {
        assert_eq!(time_to_step(1.0, 1e-3).unwrap(), 1000);
        assert_eq!(time_to_step(-16.0, 1e-3).unwrap(), -16000);
        assert!(time_to_step(0.0005, 1e-3).is_err());
    }
}
