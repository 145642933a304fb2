//! Time stepping for the truncated renormalized equation
//!
//! ```text
//! (∂t − Δ) u = −Σ_k a_k H_k(u, C_N) + m·u + ξ_N
//! ```
//!
//! on the two-dimensional torus, with restartable flow semantics: the state
//! is the vector of grid values and nothing else, so stopping at any step
//! and restarting from the stored field reproduces the direct run bit for
//! bit.
//!
//! Two first-order schemes are available.
//!
//! * [`Scheme::MonotoneSplitting`] (default): the reaction `u' = g(u)` is
//!   advanced pointwise, then the noise increment is added and the linear
//!   part is solved implicitly with the symbol of the five-point Laplacian,
//!   `(4/h²)(sin²(πk₁/N) + sin²(πk₂/N))`. When `g(v) = b v − a v³` with
//!   `a ≥ 0` (the cubic model) the reaction is the exact flow of this
//!   Bernoulli equation; otherwise it is a backward-Euler solve, which
//!   requires `dt·sup g' < 1`. Both sub-steps are monotone maps (the
//!   resolvent of the five-point Laplacian has a nonnegative kernel), so
//!   ordered data stay ordered up to round-off, for any size of initial
//!   data. The exact flow also removes the time-step error of the initial
//!   layer when starting from very large data.
//! * [`Scheme::SemiImplicit`]: implicit Laplacian with the exact spectral
//!   symbol, explicit nonlinearity evaluated with 3/2-rule zero padding.
//!   It is not order preserving and it blows up for large data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{Field, TorusGrid};
use crate::noise::{hermite_coefficients, renorm_constant, time_to_step, NoiseRealization, RenormConstant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    MonotoneSplitting,
    SemiImplicit,
}

/// Coefficients `a_k` of `Σ_k a_k H_k(u, C)`, indexed by `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    coefficients: Vec<f64>,
}

impl Nonlinearity {
    /// Either all coefficients vanish, or the highest nonzero one has odd
    /// index and is positive.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        let mut coefficients = coefficients;
        while coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite nonlinearity coefficient".into()));
        }
        if let Some(&lead) = coefficients.last() {
            let degree = coefficients.len() - 1;
            if degree % 2 == 0 || lead <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "leading term a_{degree} = {lead} must have odd degree and positive coefficient"
                )));
            }
        }
        Ok(Self { coefficients })
    }

    /// `H₃(u, C) = u³ − 3Cu`.
    pub fn cubic() -> Self {
        Self {
            coefficients: vec![0.0, 0.0, 0.0, 1.0],
        }
    }

    pub fn none() -> Self {
        Self {
            coefficients: Vec::new(),
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// Discretization and model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: TorusGrid,
    pub dt: f64,
    pub truncation: usize,
    pub renorm: RenormConstant,
    pub nonlinearity: Nonlinearity,
    pub mass_term: f64,
    pub scheme: Scheme,
}

impl SolverConfig {
    /// Cubic model with `truncation = N/2 − 1`, `C_N` at reference mass 1,
    /// linear coefficient `+1` and the monotone splitting scheme.
    pub fn new(grid: TorusGrid, dt: f64) -> Result<Self> {
        let truncation = grid.points() / 2 - 1;
        let config = Self {
            grid,
            dt,
            truncation,
            renorm: renorm_constant(&grid, truncation, 1.0)?,
            nonlinearity: Nonlinearity::cubic(),
            mass_term: 1.0,
            scheme: Scheme::MonotoneSplitting,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.require_2d()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.truncation < 1 || self.truncation > self.grid.points() / 2 - 1 {
            return Err(Error::InvalidParameter(format!(
                "truncation {} must lie in [1, N/2 − 1]",
                self.truncation
            )));
        }
        if !self.mass_term.is_finite() || !self.renorm.value.is_finite() {
            return Err(Error::InvalidParameter("non-finite model coefficient".into()));
        }
        if self.scheme == Scheme::MonotoneSplitting && BernoulliFlow::of(&self.drift()).is_none() {
            let sup = drift_derivative_sup(&self.drift());
            if self.dt * sup >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "dt·sup g' = {} must be below 1 for the monotone reaction solve",
                    self.dt * sup
                )));
            }
        }
        Ok(())
    }

    /// Monomial coefficients of `g(v) = −Σ a_k H_k(v, C) + m v`.
    pub fn drift(&self) -> Vec<f64> {
        let c = self.renorm.value;
        let mut drift = vec![0.0; self.nonlinearity.coefficients.len().max(2)];
        for (k, a) in self.nonlinearity.coefficients.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (i, h) in hermite_coefficients(k, c).iter().enumerate() {
                drift[i] -= a * h;
            }
        }
        drift[1] += self.mass_term;
        drift
    }

    /// Symbol of `−Δ` used by the linear solve at flat index `idx`.
    pub fn laplacian_symbol(&self, idx: usize) -> f64 {
        match self.scheme {
            Scheme::SemiImplicit => self.grid.eigenvalue(idx),
            Scheme::MonotoneSplitting => {
                let n = self.grid.points();
                let h = self.grid.spacing();
                let (k1, k2) = self.grid.mode(idx);
                let s1 = (PI * k1 as f64 / n as f64).sin();
                let s2 = (PI * k2 as f64 / n as f64).sin();
                4.0 / (h * h) * (s1 * s1 + s2 * s2)
            }
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Result<Self> {
        self.scheme = scheme;
        self.validate()?;
        Ok(self)
    }

    pub fn with_nonlinearity(mut self, nonlinearity: Nonlinearity) -> Result<Self> {
        self.nonlinearity = nonlinearity;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mass_term(mut self, mass_term: f64) -> Result<Self> {
        self.mass_term = mass_term;
        self.validate()?;
        Ok(self)
    }

    pub fn with_renorm(mut self, renorm: RenormConstant) -> Result<Self> {
        self.renorm = renorm;
        self.validate()?;
        Ok(self)
    }

    /// Sets the truncation and recomputes `C_N` at the current reference mass
    /// (mass 1 if the constant was fixed by hand).
    pub fn with_truncation(mut self, truncation: usize) -> Result<Self> {
        let mass = if self.renorm.mass > 0.0 { self.renorm.mass } else { 1.0 };
        self.truncation = truncation;
        self.renorm = renorm_constant(&self.grid, truncation, mass)?;
        self.validate()?;
        Ok(self)
    }
}

fn poly_eval(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for &c in coeffs.iter().rev() {
        slope = slope * x + value;
        value = value * x + c;
    }
    (value, slope)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect()
}

/// `sup_v g'(v)`. `g'` is constant or an even-degree polynomial with
/// negative leading coefficient, so the supremum is attained at a critical
/// point inside the Cauchy root bound of `g''`; it is located by dense
/// sampling followed by local refinement.
fn drift_derivative_sup(drift: &[f64]) -> f64 {
    let slope = derivative(drift);
    let curvature = derivative(&slope);
    let mut curvature = curvature;
    while curvature.last() == Some(&0.0) {
        curvature.pop();
    }
    if curvature.is_empty() {
        return slope.first().copied().unwrap_or(0.0);
    }
    let lead = *curvature.last().expect("nonempty");
    let bound = 1.0 + curvature.iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
    let samples = 20_000;
    let mut best = f64::NEG_INFINITY;
    let mut best_x = 0.0;
    for i in 0..=samples {
        let x = -bound + 2.0 * bound * i as f64 / samples as f64;
        let v = poly_eval(&slope, x).0;
        if v > best {
            best = v;
            best_x = x;
        }
    }
    // golden-section refinement around the best sample
    let width = 2.0 * bound / samples as f64;
    let (mut a, mut b) = (best_x - width, best_x + width);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if poly_eval(&slope, c).0 > poly_eval(&slope, d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(poly_eval(&slope, 0.5 * (a + b)).0)
}

/// Solves `v − dt·g(v) = u` for the increasing map `v ↦ v − dt g(v)` by
/// Newton's method with bisection safeguarding.
fn reaction_solve(drift: &[f64], dt: f64, u: f64) -> f64 {
    let residual = |v: f64| {
        let (g, dg) = poly_eval(drift, v);
        (v - dt * g - u, 1.0 - dt * dg)
    };
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let mut v = u;
    for _ in 0..400 {
        let (f, df) = residual(v);
        if f == 0.0 {
            return v;
        }
        if f > 0.0 {
            hi = hi.min(v);
        } else {
            lo = lo.max(v);
        }
        let mut next = v - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + (lo.abs()).max(1.0)
            } else {
                hi - (hi.abs()).max(1.0)
            };
        }
        if (next - v).abs() <= 4.0 * f64::EPSILON * v.abs().max(next.abs()).max(1e-300) {
            return next;
        }
        v = next;
    }
    v
}

/// Backward-Euler reaction solve over a whole array.
///
/// A fixed number of Newton sweeps from `v = u` is run without branches.
/// Points whose final correction is not negligible are redone with the
/// guarded scalar solver, so the result always satisfies the same accuracy
/// bound whatever the data size.
fn reaction_solve_all(drift: &[f64], dt: f64, u: &[f64], out: &mut [Complex64]) {
    let mut c = [0.0; 4];
    if drift.len() > 4 {
        for (o, &x) in out.iter_mut().zip(u) {
            *o = Complex64::new(reaction_solve(drift, dt, x), 0.0);
        }
        return;
    }
    c[..drift.len()].copy_from_slice(drift);
    let [c0, c1, c2, c3] = c;
    let correction = |v: f64, x: f64| {
        let g = c0 + v * (c1 + v * (c2 + v * c3));
        let dg = c1 + v * (2.0 * c2 + v * 3.0 * c3);
        (v - dt * g - x) / (1.0 - dt * dg)
    };
    for (o, &x) in out.iter_mut().zip(u) {
        let mut v = x;
        for _ in 0..2 {
            v -= correction(v, x);
        }
        let last = correction(v, x);
        // Newton converges quadratically, so after a correction of relative
        // size 1e-8 the remaining error is at round-off level.
        *o = if last.abs() <= 1e-8 * v.abs().max(1.0) {
            Complex64::new(v - last, 0.0)
        } else {
            Complex64::new(reaction_solve(drift, dt, x), 0.0)
        };
    }
}

/// Exact flow over one step of `v' = b v − a v³`, `a ≥ 0`:
/// `v(dt) = v / sqrt(E + a F v²)` with `E = e^{−2b·dt}` and
/// `F = (1 − E)/b` (`2·dt` when `b = 0`).
#[derive(Debug, Clone, Copy)]
struct BernoulliFlow {
    e: f64,
    af: f64,
}

impl BernoulliFlow {
    fn of(drift: &[f64]) -> Option<(f64, f64)> {
        let coeff = |i: usize| drift.get(i).copied().unwrap_or(0.0);
        (drift.len() <= 4 && coeff(0) == 0.0 && coeff(2) == 0.0 && coeff(3) <= 0.0).then(|| (coeff(1), -coeff(3)))
    }

    fn new(b: f64, a: f64, dt: f64) -> Self {
        let f = if b == 0.0 { 2.0 * dt } else { -(-2.0 * b * dt).exp_m1() / b };
        Self {
            e: (-2.0 * b * dt).exp(),
            af: a * f,
        }
    }

    fn apply(self, v: f64) -> f64 {
        if v.abs() < 1e100 {
            v / (self.e + self.af * v * v).sqrt()
        } else {
            v.signum() / (self.e / (v * v) + self.af).sqrt()
        }
    }
}

/// Reusable state for advancing fields under one configuration.
pub struct Integrator {
    config: SolverConfig,
    drift: Vec<f64>,
    exact: Option<BernoulliFlow>,
    resolvent: Vec<f64>,
    fft: Fft2,
    work: Vec<Complex64>,
    dealias: Option<Dealias>,
}

struct Dealias {
    fft: Fft2,
    padded: Vec<Complex64>,
    embed: Vec<Option<usize>>,
}

impl Integrator {
    pub fn new(config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid;
        let n = grid.points();
        let resolvent = (0..grid.len())
            .map(|idx| 1.0 / (1.0 + config.dt * config.laplacian_symbol(idx)))
            .collect();
        let dealias = (config.scheme == Scheme::SemiImplicit).then(|| {
            let m = 3 * n / 2;
            let half = (n / 2) as i64;
            let embed = (0..grid.len())
                .map(|idx| {
                    let (k1, k2) = grid.mode(idx);
                    (k1.abs() < half && k2.abs() < half)
                        .then(|| k1.rem_euclid(m as i64) as usize * m + k2.rem_euclid(m as i64) as usize)
                })
                .collect();
            Dealias {
                fft: Fft2::new(m),
                padded: vec![Complex64::new(0.0, 0.0); m * m],
                embed,
            }
        });
        Ok(Self {
            config: config.clone(),
            drift: config.drift(),
            exact: BernoulliFlow::of(&config.drift()).map(|(b, a)| BernoulliFlow::new(b, a, config.dt)),
            resolvent,
            fft: Fft2::new(n),
            work: vec![Complex64::new(0.0, 0.0); grid.len()],
            dealias,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Advances `u` (grid values) by one step with the given spectral noise
    /// increment. `step` is only used for diagnostics.
    pub fn advance(&mut self, u: &mut [f64], increment: &[Complex64], step: i64) -> Result<()> {
        let dt = self.config.dt;
        match self.config.scheme {
            Scheme::MonotoneSplitting => {
                match self.exact {
                    Some(flow) => {
                        for (w, &x) in self.work.iter_mut().zip(u.iter()) {
                            *w = Complex64::new(flow.apply(x), 0.0);
                        }
                    }
                    None => reaction_solve_all(&self.drift, dt, u, &mut self.work),
                }
                self.fft.forward(&mut self.work);
                for ((w, xi), r) in self.work.iter_mut().zip(increment).zip(&self.resolvent) {
                    *w = (*w + xi) * r;
                }
            }
            Scheme::SemiImplicit => {
                for (w, &x) in self.work.iter_mut().zip(u.iter()) {
                    *w = Complex64::new(x, 0.0);
                }
                self.fft.forward(&mut self.work);
                let nonlinear = self.dealiased_drift();
                for (((w, xi), r), nl) in self.work.iter_mut().zip(increment).zip(&self.resolvent).zip(&nonlinear) {
                    *w = (*w + dt * nl + xi) * r;
                }
            }
        }
        self.fft.inverse(&mut self.work);
        let mut finite = true;
        for (x, w) in u.iter_mut().zip(&self.work) {
            *x = w.re;
            finite &= x.is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::BlowUp { step, dt })
        }
    }

    /// Spectrum of `g(u)` from the spectrum of `u` held in `self.work`,
    /// computed on the 3/2-padded grid and truncated back.
    fn dealiased_drift(&mut self) -> Vec<Complex64> {
        let dealias = self.dealias.as_mut().expect("semi-implicit scheme has dealiasing state");
        dealias.padded.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (idx, target) in dealias.embed.iter().enumerate() {
            if let Some(t) = target {
                dealias.padded[*t] = self.work[idx];
            }
        }
        dealias.fft.inverse(&mut dealias.padded);
        for c in dealias.padded.iter_mut() {
            *c = Complex64::new(poly_eval(&self.drift, c.re).0, 0.0);
        }
        dealias.fft.forward(&mut dealias.padded);
        dealias
            .embed
            .iter()
            .map(|target| target.map_or(Complex64::new(0.0, 0.0), |t| dealias.padded[t]))
            .collect()
    }
}

/// One step of the configured scheme.
pub fn step(u: &Field, config: &SolverConfig, noise_increment: &Field) -> Result<Field> {
    config.grid.check_same(u.grid())?;
    config.grid.check_same(noise_increment.grid())?;
    let mut integrator = Integrator::new(config)?;
    let mut values = u.values().to_vec();
    integrator.advance(&mut values, noise_increment.spectrum(), 0)?;
    Field::from_values(config.grid, values)
}

/// Discrete energy `Σ_k ½ μ_k |c_k|² L^d + ∫ V(u)` with `V' = −g`, using
/// the Laplacian symbol of the configured scheme.
pub fn energy(u: &Field, config: &SolverConfig) -> Result<f64> {
    config.grid.check_same(u.grid())?;
    let volume = config.grid.volume();
    let dirichlet: f64 = u
        .spectrum()
        .iter()
        .enumerate()
        .map(|(idx, c)| 0.5 * config.laplacian_symbol(idx) * c.norm_sqr())
        .sum::<f64>()
        * volume;
    let potential: Vec<f64> = std::iter::once(0.0)
        .chain(config.drift().iter().enumerate().map(|(i, g)| -g / (i + 1) as f64))
        .collect();
    let bulk: f64 = u.values().iter().map(|&x| poly_eval(&potential, x).0).sum::<f64>() * config.grid.cell_volume();
    Ok(dirichlet + bulk)
}

/// A field recorded at a requested output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: Field,
}

/// Result of one run `u(·; s; f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: f64,
    pub end_time: f64,
    pub seed: u64,
    pub initial: Field,
    pub snapshots: Vec<Snapshot>,
    pub end: Field,
}

impl Trajectory {
    pub fn snapshot_at(&self, time: f64) -> Option<&Field> {
        self.snapshots
            .iter()
            .find(|s| (s.time - time).abs() <= 1e-9 * time.abs().max(1.0))
            .map(|s| &s.field)
    }
}

/// Runs `u(t; s; f)` from `start` to `end`, recording the requested times.
pub fn evolve(
    f: &Field,
    start: f64,
    end: f64,
    config: &SolverConfig,
    noise: &NoiseRealization,
    output_times: &[f64],
) -> Result<Trajectory> {
    let mut runs = evolve_coupled(std::slice::from_ref(f), start, end, config, noise, output_times)?;
    Ok(runs.remove(0))
}

/// Runs several initial conditions on the same noise in lockstep.
pub fn evolve_coupled(
    fs: &[Field],
    start: f64,
    end: f64,
    config: &SolverConfig,
    noise: &NoiseRealization,
    output_times: &[f64],
) -> Result<Vec<Trajectory>> {
    evolve_coupled_with(fs, start, end, config, noise, output_times, |_, _| Ok(()))
}

/// As [`evolve_coupled`], calling `observer(step, states)` after every step
/// with the index of the completed step and the current grid values of all
/// members. An error from the observer aborts the run.
pub fn evolve_coupled_with(
    fs: &[Field],
    start: f64,
    end: f64,
    config: &SolverConfig,
    noise: &NoiseRealization,
    output_times: &[f64],
    mut observer: impl FnMut(i64, &[Vec<f64>]) -> Result<()>,
) -> Result<Vec<Trajectory>> {
    let dt = config.dt;
    if (noise.dt() - dt).abs() > 1e-15 * dt || noise.grid() != &config.grid || noise.truncation() != config.truncation {
        return Err(Error::InvalidParameter(
            "noise realization does not match the solver configuration".into(),
        ));
    }
    for f in fs {
        config.grid.check_same(f.grid())?;
    }
    let first = time_to_step(start, dt)?;
    let last = time_to_step(end, dt)?;
    if last < first {
        return Err(Error::InvalidParameter(format!("end time {end} precedes start time {start}")));
    }
    if !noise.covers(first, last) {
        return Err(Error::InvalidParameter(format!(
            "noise window [{}, {}) does not cover steps [{first}, {last})",
            noise.start_step(),
            noise.end_step()
        )));
    }
    let mut outputs: Vec<(i64, f64)> = output_times
        .iter()
        .map(|&t| time_to_step(t, dt).map(|n| (n, t)))
        .collect::<Result<_>>()?;
    outputs.sort_by_key(|o| o.0);
    if let Some(bad) = outputs.iter().find(|(n, _)| *n < first || *n > last) {
        return Err(Error::InvalidParameter(format!(
            "output time {} outside [{start}, {end}]",
            bad.1
        )));
    }

    let mut integrator = Integrator::new(config)?;
    let mut states: Vec<Vec<f64>> = fs.iter().map(|f| f.values().to_vec()).collect();
    let mut snapshots: Vec<Vec<Snapshot>> = vec![Vec::new(); fs.len()];
    let mut increment = vec![Complex64::new(0.0, 0.0); config.grid.len()];
    let mut next_output = 0;
    let mut record = |n: i64, states: &[Vec<f64>], next_output: &mut usize| -> Result<()> {
        while *next_output < outputs.len() && outputs[*next_output].0 == n {
            let time = n as f64 * dt;
            for (snaps, state) in snapshots.iter_mut().zip(states) {
                snaps.push(Snapshot {
                    time,
                    field: Field::from_values(config.grid, state.clone())?,
                });
            }
            *next_output += 1;
        }
        Ok(())
    };
    record(first, &states, &mut next_output)?;
    for n in first..last {
        noise.fill_increment(n, &mut increment)?;
        for state in states.iter_mut() {
            integrator.advance(state, &increment, n)?;
        }
        observer(n, &states)?;
        record(n + 1, &states, &mut next_output)?;
    }
    let end_time = last as f64 * dt;
    fs.iter()
        .zip(states)
        .zip(snapshots)
        .map(|((f, state), snaps)| {
            Ok(Trajectory {
                start: first as f64 * dt,
                end_time,
                seed: noise.seed(),
                initial: f.clone(),
                snapshots: snaps,
                end: Field::from_values(config.grid, state)?,
            })
        })
        .collect()
}
