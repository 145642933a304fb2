use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::besov::{BesovParams, SGrid, DEFAULT_S_POINTS};
use crate::error::{Error, Result};
use crate::field::TorusGrid;
use crate::noise::{time_to_step, NoiseRealization};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SyncRate,
    ComingDown,
    Order,
    Pullback,
    PhiContraction,
    LemmaSuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::SyncRate,
        ExperimentKind::ComingDown,
        ExperimentKind::Order,
        ExperimentKind::Pullback,
        ExperimentKind::PhiContraction,
        ExperimentKind::LemmaSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SyncRate => "sync_rate",
            ExperimentKind::ComingDown => "coming_down",
            ExperimentKind::Order => "order",
            ExperimentKind::Pullback => "pullback",
            ExperimentKind::PhiContraction => "phi_contraction",
            ExperimentKind::LemmaSuite => "lemma_suite",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment kind '{s}'")))
    }
}

/// Everything an experiment run depends on. Together with the seed base it
/// determines the output exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub solver: SolverConfig,
    /// Multiplier of the white-noise increments.
    pub noise_amplitude: f64,
    /// Exponent of the negative norm `‖·‖_{−α}` that is measured.
    pub alpha: f64,
    /// Moment order; also the integrability index of the `φ` functional.
    pub p: u32,
    pub s_points: usize,
    pub alpha0: f64,
    pub delta: f64,
    /// Weight exponent of the coming-down curves `t^γ ‖u(t)‖_{−α}`.
    pub gamma: f64,
    pub ensemble_size: usize,
    /// Final time `T`; for the pullback experiment the depth `S`.
    pub horizon: f64,
    pub output_interval: f64,
    pub fit_start: f64,
    /// Size of the constant extremal data `±R`.
    pub extremal_r: f64,
    /// Second extremal size compared against `extremal_r`.
    pub reference_r: f64,
    /// Constant data used by the coming-down experiment.
    pub r_values: Vec<f64>,
    pub seed_base: u64,
    pub bootstrap_resamples: usize,
    pub lemma_alpha: f64,
    pub lemma_p: Vec<u32>,
    /// Number of sampled initial conditions inside the envelope.
    pub members: usize,
}

/// Smallest integer strictly above `d / (α − α₀ + δ)`.
pub fn minimal_moment(dim: usize, alpha: f64, alpha0: f64, delta: f64) -> u32 {
    let bound = dim as f64 / (alpha - alpha0 + delta);
    (bound.floor() as u32) + 1
}

/// Side length of the default torus. On larger tori the extremal solutions
/// can sit in opposite wells of the double-well potential for longer than
/// the default horizon, so the ensemble envelope shows a plateau followed
/// by a drop rather than an exponential decay.
pub const DEFAULT_SIDE: f64 = 0.25;

impl ExperimentConfig {
    /// Defaults for `kind` on the torus of side [`DEFAULT_SIDE`] with
    /// `N = 64`, `dt = 1e−3`.
    pub fn new(kind: ExperimentKind) -> Result<Self> {
        let grid = TorusGrid::square(DEFAULT_SIDE, 64)?;
        let solver = SolverConfig::new(grid, 1e-3)?;
        let (alpha, alpha0, delta) = (0.1, 0.1, 0.05);
        let (ensemble_size, horizon, output_interval) = match kind {
            ExperimentKind::SyncRate => (32, 10.0, 0.25),
            ExperimentKind::ComingDown => (32, 1.0, 0.05),
            ExperimentKind::Order => (100, 1.0, 0.1),
            ExperimentKind::Pullback => (16, 16.0, 1.0),
            ExperimentKind::PhiContraction => (4, 5.0, 0.5),
            ExperimentKind::LemmaSuite => (1000, 0.0, 1.0),
        };
        Ok(Self {
            kind,
            solver,
            noise_amplitude: 1.0,
            alpha,
            p: minimal_moment(2, alpha, alpha0, delta),
            s_points: DEFAULT_S_POINTS,
            alpha0,
            delta,
            gamma: 0.5,
            ensemble_size,
            horizon,
            output_interval,
            fit_start: 1.0,
            extremal_r: 1e4,
            reference_r: 1e8,
            r_values: vec![1e2, 1e4, 1e8],
            seed_base: 20_240_601,
            bootstrap_resamples: 1000,
            lemma_alpha: 0.6,
            lemma_p: vec![2, 3, 4],
            members: 8,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.solver.grid
    }

    pub fn s_grid(&self) -> Result<SGrid> {
        SGrid::geometric(self.grid().spacing().powi(2).min(0.5), self.s_points)
    }

    /// Parameters of the measured norm `‖·‖_{−α}` and of `φ_{−α+d/p;p}`.
    pub fn besov(&self) -> Result<BesovParams> {
        BesovParams::new(self.alpha, self.p, self.s_grid()?)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return bad(format!("noise amplitude must be nonnegative, got {}", self.noise_amplitude));
        }
        if !(self.delta > 0.0) || !(self.alpha > self.alpha0 - self.delta && self.alpha <= self.alpha0) {
            return bad(format!(
                "alpha = {} must lie in (alpha0 − delta, alpha0] = ({}, {}]",
                self.alpha,
                self.alpha0 - self.delta,
                self.alpha0
            ));
        }
        if self.p < 1 {
            return bad("p must be at least 1".into());
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.ensemble_size < 2 {
            return bad("ensemble size must be at least 2".into());
        }
        if self.bootstrap_resamples < 2 {
            return bad("bootstrap needs at least 2 resamples".into());
        }
        if !(self.extremal_r > 0.0 && self.reference_r > 0.0) || self.r_values.iter().any(|r| !r.is_finite()) {
            return bad("extremal data sizes must be positive and finite".into());
        }
        if self.lemma_p.is_empty() || self.lemma_p.contains(&0) || !(self.lemma_alpha > 0.0) {
            return bad("lemma suite needs positive alpha and p values".into());
        }
        self.s_grid()?;
        if self.kind != ExperimentKind::LemmaSuite {
            let dt = self.solver.dt;
            if !(self.horizon > 0.0) || !(self.output_interval > 0.0) {
                return bad("horizon and output interval must be positive".into());
            }
            time_to_step(self.horizon, dt)?;
            time_to_step(self.output_interval, dt)?;
            time_to_step(self.fit_start, dt)?;
        }
        match self.kind {
            ExperimentKind::SyncRate if !(self.fit_start >= 1.0 && self.fit_start < self.horizon) => {
                bad(format!("fit window [{}, {}] must start at t ≥ 1", self.fit_start, self.horizon))
            }
            ExperimentKind::ComingDown if self.r_values.len() < 2 || self.horizon < 0.5 => {
                bad("coming-down needs at least two R values and horizon ≥ 0.5".into())
            }
            ExperimentKind::PhiContraction if self.alpha <= 2.0 / self.p as f64 => bad(format!(
                "the phi functional needs alpha > d/p, got alpha = {} and p = {}",
                self.alpha, self.p
            )),
            ExperimentKind::PhiContraction if self.members < 2 => bad("need at least two members".into()),
            ExperimentKind::Pullback if self.horizon < 4.0 => bad("pullback depth must be at least 4".into()),
            _ => Ok(()),
        }
    }

    /// Non-fatal deviations from the moment condition of the rate theorem.
    pub fn warnings(&self) -> Vec<String> {
        let needed = minimal_moment(self.grid().dim(), self.alpha, self.alpha0, self.delta);
        if self.p < needed {
            vec![format!(
                "p = {} is below {needed}, the smallest integer with p > d/(alpha − alpha0 + delta); \
                 moments are estimated faster but the rate statement does not cover this p",
                self.p
            )]
        } else {
            Vec::new()
        }
    }

    /// Seed of member `index`.
    pub fn member_seed(&self, index: usize) -> u64 {
        super::stats::member_seed(self.seed_base, index as u64)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.ensemble_size).map(|i| self.member_seed(i)).collect()
    }

    /// Noise realization on `[t0, t1]` for `seed`, with the configured
    /// amplitude and truncation.
    pub fn noise(&self, seed: u64, t0: f64, t1: f64) -> Result<NoiseRealization> {
        Ok(NoiseRealization::new(seed, self.solver.grid, self.solver.dt, t0, t1, self.solver.truncation)?
            .with_amplitude(self.noise_amplitude))
    }

    /// `k·output_interval` for `k = 0, 1, …` up to `horizon`.
    pub fn output_times(&self) -> Vec<f64> {
        let count = (self.horizon / self.output_interval + 1e-9).floor() as usize;
        (0..=count).map(|k| k as f64 * self.output_interval).collect()
    }
}
