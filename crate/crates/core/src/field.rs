//! Periodic fields on a discrete torus.
//!
//! A [`Field`] holds `N^d` real samples on the uniform grid
//! `x_j = j·h`, `h = L/N`, stored row-major (the last index varies fastest).
//! Its spectral form is the full `N × N` array of complex Fourier-series
//! coefficients, indexed like the samples: entry `(i, j)` holds the mode
//! `k = (κ(i), κ(j))` with `κ(i) = i` for `i < N/2` and `i − N` otherwise,
//! normalized so that `u(x) = Σ_k c_k exp(2πi k·x/L)`. Since the samples are
//! real the array is Hermitian, `c_{−k} = conj(c_k)`; both halves are kept
//! so that spectral multipliers can be applied without index bookkeeping.
//!
//! The spectrum is computed lazily on first use and cached, so a `Field` is
//! immutable after construction and can be shared freely between threads.
//!
//! Integrals are plain Riemann sums with cell volume `h^d`, so they carry the
//! torus volume `L^d` (no normalized measure).

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;

/// Uniform grid on the d-dimensional torus of side `L` with `N` points per
/// dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    #[serde(rename = "d")]
    dim: usize,
    #[serde(rename = "L")]
    side: f64,
    #[serde(rename = "N")]
    points: usize,
}

impl TorusGrid {
    /// `d ∈ {2, 3}`, `L > 0`, `N ≥ 4` a power of two. Only `d = 2` supports
    /// fields and dynamics; `d = 3` grids can be described but not sampled.
    pub fn new(dim: usize, side: f64, points: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{2, 3}}")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("side length {side} must be positive")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "N = {points} must be a power of two and at least 4"
            )));
        }
        Ok(Self { dim, side, points })
    }

    /// Two-dimensional grid, the only dimension with dynamics.
    pub fn square(side: f64, points: usize) -> Result<Self> {
        Self::new(2, side, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Total number of samples, `N^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Signed wavenumber stored at array index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Array index of the signed wavenumber `k`.
    pub fn index_of(&self, k: i64) -> usize {
        k.rem_euclid(self.points as i64) as usize
    }

    /// Mode `(k1, k2)` stored at flat index `idx`.
    pub fn mode(&self, idx: usize) -> (i64, i64) {
        let n = self.points;
        (self.wavenumber(idx / n), self.wavenumber(idx % n))
    }

    /// Negative Laplacian eigenvalue `μ_k = (2π/L)² |k|²` at flat index `idx`.
    pub fn eigenvalue(&self, idx: usize) -> f64 {
        let (k1, k2) = self.mode(idx);
        let scale = 2.0 * PI / self.side;
        scale * scale * (k1 * k1 + k2 * k2) as f64
    }

    /// Coordinates of the sample at flat index `idx`.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        let h = self.spacing();
        let n = self.points;
        ((idx / n) as f64 * h, (idx % n) as f64 * h)
    }

    pub(crate) fn require_2d(&self) -> Result<()> {
        if self.dim == 2 {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension(self.dim))
        }
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: format!("{self:?}"),
                right: format!("{other:?}"),
            })
        }
    }
}

/// Smoothing time `s > 0` of the heat semigroup `e^{sΔ}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HeatTime(f64);

impl HeatTime {
    pub fn new(s: f64) -> Result<Self> {
        if s.is_finite() && s > 0.0 {
            Ok(Self(s))
        } else {
            Err(Error::InvalidParameter(format!("heat time must be positive, got {s}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Exponent of an `L^p` norm: a positive integer or infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpIndex {
    Finite(u32),
    Infinity,
}

impl LpIndex {
    pub fn finite(p: u32) -> Result<Self> {
        if p >= 1 {
            Ok(Self::Finite(p))
        } else {
            Err(Error::InvalidParameter("p must be at least 1".into()))
        }
    }
}

/// A real scalar field on a two-dimensional discrete torus.
#[derive(Debug, Clone)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl Field {
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        grid.require_2d()?;
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self {
            grid,
            values,
            spectrum: OnceLock::new(),
        })
    }

    pub fn zeros(grid: TorusGrid) -> Result<Self> {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Result<Self> {
        Self::from_values(grid, vec![c; grid.len()])
    }

    /// Samples `f(x₁, x₂)` at the grid points.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        grid.require_2d()?;
        let values = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.position(idx);
                f(x1, x2)
            })
            .collect();
        Self::from_values(grid, values)
    }

    /// Builds a field from Fourier coefficients in the layout described in
    /// the module docs. The imaginary part of the inverse transform is
    /// discarded, which projects non-Hermitian input onto real fields.
    pub fn from_spectrum(grid: TorusGrid, coefficients: Vec<Complex64>) -> Result<Self> {
        grid.require_2d()?;
        if coefficients.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: coefficients.len(),
            });
        }
        let mut work = coefficients;
        Fft2::new(grid.points()).inverse(&mut work);
        let values = work.iter().map(|c| c.re).collect();
        Self::from_values(grid, values)
    }

    /// Hermitian spectra produced internally can be cached as-is.
    pub(crate) fn from_hermitian_spectrum(grid: TorusGrid, coefficients: Vec<Complex64>) -> Self {
        let mut work = coefficients.clone();
        Fft2::new(grid.points()).inverse(&mut work);
        let spectrum = OnceLock::new();
        let _ = spectrum.set(coefficients);
        Self {
            grid,
            values: work.iter().map(|c| c.re).collect(),
            spectrum,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Fourier coefficients, computed on first access.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut work: Vec<Complex64> =
                self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            Fft2::new(self.grid.points()).forward(&mut work);
            work
        })
    }

    /// Coefficient of the mode `(k1, k2)`.
    pub fn coefficient(&self, k1: i64, k2: i64) -> Complex64 {
        let n = self.grid.points();
        self.spectrum()[self.grid.index_of(k1) * n + self.grid.index_of(k2)]
    }

    /// Returns a copy with the spectral representation materialized.
    pub fn to_spectral(&self) -> Field {
        self.spectrum();
        self.clone()
    }

    /// Rebuilds the physical samples from the spectrum.
    pub fn to_physical(&self) -> Field {
        Field::from_hermitian_spectrum(self.grid, self.spectrum().to_vec())
    }

    /// `e^{sΔ} f`, applied exactly in spectral space. The zero mode is
    /// untouched, so the mean is preserved.
    pub fn heat_smooth(&self, s: HeatTime) -> Field {
        let s = s.value();
        let coefficients = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let mu = self.grid.eigenvalue(idx);
                if mu == 0.0 {
                    *c
                } else {
                    c * (-s * mu).exp()
                }
            })
            .collect();
        Field::from_hermitian_spectrum(self.grid, coefficients)
    }

    pub fn lp_norm(&self, p: LpIndex) -> f64 {
        lp_norm_of(&self.values, p, self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.lp_norm(LpIndex::Infinity)
    }

    /// `∫ f dx`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `min_x (g(x) − f(x))`; nonnegative exactly when `self ⪯ g` on the grid.
    pub fn order_gap(&self, g: &Field) -> Result<f64> {
        self.grid.check_same(&g.grid)?;
        Ok(order_gap_of(&self.values, &g.values))
    }

    pub fn zip_with(&self, other: &Field, op: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Field::from_values(self.grid, values)
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| op(v)).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> Field {
        self.map(|v| factor * v)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Writes the samples as little-endian `f64`, row-major, to `path`, and
    /// the grid description `{d, L, N}` to the JSON sidecar
    /// [`sidecar_path`]`(path)`. Both files are written to temporaries first
    /// and renamed into place.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        write_atomic(path, &bytes)?;
        let sidecar = serde_json::to_vec_pretty(&self.grid)?;
        write_atomic(&sidecar_path(path), &sidecar)
    }

    pub fn read_binary(path: &Path) -> Result<Field> {
        let sidecar = fs::read(sidecar_path(path))?;
        let grid: TorusGrid = serde_json::from_slice(&sidecar)?;
        let grid = TorusGrid::new(grid.dim, grid.side, grid.points)?;
        let bytes = fs::read(path)?;
        if bytes.len() != grid.len() * 8 {
            return Err(Error::Format(format!(
                "{} holds {} bytes, expected {}",
                path.display(),
                bytes.len(),
                grid.len() * 8
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|chunk| f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")))
            .collect();
        Field::from_values(grid, values)
    }
}

/// `<path>.json`, the grid description stored next to a binary field dump.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes `bytes` to a temporary file beside `path` and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn lp_norm_of(values: &[f64], p: LpIndex, cell_volume: f64) -> f64 {
    match p {
        LpIndex::Infinity => values.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        LpIndex::Finite(1) => values.iter().map(|v| v.abs()).sum::<f64>() * cell_volume,
        LpIndex::Finite(2) => (values.iter().map(|v| v * v).sum::<f64>() * cell_volume).sqrt(),
        LpIndex::Finite(p) => {
            let sum: f64 = values.iter().map(|v| v.abs().powi(p as i32)).sum();
            (sum * cell_volume).powf(1.0 / p as f64)
        }
    }
}

pub(crate) fn order_gap_of(lower: &[f64], upper: &[f64]) -> f64 {
    lower
        .iter()
        .zip(upper)
        .map(|(a, b)| b - a)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(side: f64, n: usize) -> TorusGrid {
        TorusGrid::square(side, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::square(1.0, 2).is_err());
        assert!(TorusGrid::square(1.0, 48).is_err());
        assert!(TorusGrid::square(0.0, 16).is_err());
        assert!(TorusGrid::new(4, 1.0, 16).is_err());
        let g3 = TorusGrid::new(3, 1.0, 8).unwrap();
        assert_eq!(g3.len(), 512);
        assert!(matches!(Field::zeros(g3), Err(Error::UnsupportedDimension(3))));
        let g = grid(2.0, 16);
        assert_relative_eq!(g.cell_volume(), (2.0f64 / 16.0).powi(2));
        assert_relative_eq!(g.volume(), 4.0);
    }

    #[test]
    fn zero_field_has_zero_spectrum() {
        let f = Field::zeros(grid(1.0, 16)).unwrap();
        assert!(f.spectrum().iter().all(|c| *c == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn pure_cosine_has_two_modes() {
        let side = 3.0;
        let g = grid(side, 32);
        let f = Field::from_fn(g, |x1, _| (2.0 * PI * x1 / side).cos()).unwrap();
        for (idx, c) in f.spectrum().iter().enumerate() {
            let mode = g.mode(idx);
            let expected = if mode == (1, 0) || mode == (-1, 0) { 0.5 } else { 0.0 };
            assert!((c.re - expected).abs() < 1e-14 && c.im.abs() < 1e-14, "{mode:?}: {c}");
        }
    }

    #[test]
    fn heat_smooth_on_eigenfunctions() {
        let g = grid(2.0 * PI, 32);
        let f = Field::from_fn(g, |x1, _| x1.cos()).unwrap();
        let fs = f.heat_smooth(HeatTime::new(0.5).unwrap());
        for (v, x) in fs.values().iter().zip(f.values()) {
            assert!((v - (-0.5f64).exp() * x).abs() < 1e-14);
        }
        let f = Field::from_fn(g, |x1, _| (3.0 * x1).sin()).unwrap();
        let fs = f.heat_smooth(HeatTime::new(0.1).unwrap());
        for (v, x) in fs.values().iter().zip(f.values()) {
            assert!((v - (-0.9f64).exp() * x).abs() < 1e-14);
        }
        let c = Field::constant(g, 1.7).unwrap();
        let cs = c.heat_smooth(HeatTime::new(0.9).unwrap());
        assert!(cs.values().iter().all(|v| (v - 1.7).abs() < 1e-14));
    }

    #[test]
    fn heat_time_must_be_positive() {
        assert!(HeatTime::new(0.0).is_err());
        assert!(HeatTime::new(-1.0).is_err());
        assert!(HeatTime::new(f64::NAN).is_err());
    }

    #[test]
    fn lp_norms() {
        let f = Field::constant(grid(1.0, 16), 1.0).unwrap();
        assert_relative_eq!(f.lp_norm(LpIndex::Finite(2)), 1.0, epsilon = 1e-14);
        let f = Field::constant(grid(1.0, 16), -3.0).unwrap();
        assert_eq!(f.lp_norm(LpIndex::Infinity), 3.0);
        // ∫ cos² over [0, 2π]² is 2π²
        let f = Field::from_fn(grid(2.0 * PI, 64), |x1, _| x1.cos()).unwrap();
        assert_relative_eq!(
            f.lp_norm(LpIndex::Finite(2)),
            (2.0 * PI * PI).sqrt(),
            max_relative = 1e-13
        );
        assert!(LpIndex::finite(0).is_err());
    }

    #[test]
    fn order_gap_examples() {
        let g = grid(2.0 * PI, 16);
        let zero = Field::zeros(g).unwrap();
        let one = Field::constant(g, 1.0).unwrap();
        assert_eq!(zero.order_gap(&one).unwrap(), 1.0);
        let s = Field::from_fn(g, |x1, _| x1.sin()).unwrap();
        assert_eq!(s.order_gap(&s).unwrap(), 0.0);
        let shifted = s.map(|v| v + 0.25);
        assert_relative_eq!(s.order_gap(&shifted).unwrap(), 0.25, epsilon = 1e-15);
        let other = Field::zeros(grid(1.0, 16)).unwrap();
        assert!(matches!(zero.order_gap(&other), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn length_is_checked() {
        assert!(matches!(
            Field::from_values(grid(1.0, 8), vec![0.0; 10]),
            Err(Error::LengthMismatch { expected: 64, actual: 10 })
        ));
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        let f = Field::from_fn(grid(1.5, 8), |x1, x2| x1 - 2.0 * x2 + 0.1).unwrap();
        f.write_binary(&path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 64 * 8);
        let sidecar: serde_json::Value =
            serde_json::from_slice(&std::fs::read(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(sidecar["d"], 2);
        assert_eq!(sidecar["N"], 8);
        assert_eq!(sidecar["L"], 1.5);
        let back = Field::read_binary(&path).unwrap();
        assert_eq!(back, f);
        // first sample, little-endian
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(f64::from_le_bytes(raw[..8].try_into().unwrap()), 0.1);
    }
}
