//! Contraction of pairwise distances through the `φ` functional of the
//! extremal envelope.
//!
//! For trajectories squeezed between `u_−` and `u_+` the chain
//!
//! ```text
//! ‖u_j − u_i‖_{−α}^p ≤ C₂^p ‖u_j − u_i‖_{−α+d/p;p}^p
//!                    ≤ C₂^p ‖u_+ − u_−‖_{−α+d/p;p}^p
//!                    ≤ C₂^p (Φ(u_+) − Φ(u_−)),   Φ = φ_{−α+d/p;p},
//! ```
//!
//! bounds every pairwise distance by a single envelope quantity. `C₂` is the
//! lattice embedding constant of [`p_to_sup_constant`], fixed before the run.

use serde::Serialize;
use serde_json::json;

use super::corpus::{rng_for, sample, FieldKind};
use super::{distance, ensemble, Check, ExperimentConfig, ExperimentKind, ExperimentReport, Record};
use crate::besov::{besov_norm_p, p_to_sup_constant, phi_besov_difference};
use crate::error::{Error, Result};
use crate::field::{order_gap_of, Field};
use crate::solver::evolve_coupled_with;

const INITIAL_DATA_SALT: u64 = 0x7068_695f_6461_7461;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSample {
    pub seed: u64,
    pub t: f64,
    /// `Φ(u_+(t)) − Φ(u_−(t))`.
    pub phi_gap: f64,
    /// `‖u_+ − u_−‖_{−α+d/p;p}^p / (Φ(u_+) − Φ(u_−))`.
    pub envelope_ratio: f64,
    /// Largest `‖u_j − u_i‖_{−α}^p / (Φ(u_+) − Φ(u_−))` over pairs.
    pub max_pair_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiContractionReport {
    pub seeds: Vec<u64>,
    pub frozen_constant: f64,
    pub samples: Vec<PhiSample>,
    /// Smallest pointwise distance to the envelope over members and steps.
    pub envelope_min_gap: f64,
}

/// `count` initial conditions of mixed kinds, deterministic in `seed`.
pub fn initial_conditions(grid: &crate::field::TorusGrid, count: usize, seed: u64) -> Result<Vec<Field>> {
    let mut rng = rng_for(seed ^ INITIAL_DATA_SALT);
    (0..count)
        .map(|i| {
            let scale = [2.0, 0.5, 4.0][i % 3];
            sample(FieldKind::cycle(i), grid, &mut rng, scale)
        })
        .collect()
}

pub fn run_phi_contraction(config: &ExperimentConfig) -> Result<PhiContractionReport> {
    config.validate()?;
    let grid = *config.grid();
    let params = config.besov()?;
    let shifted = params.with_alpha(params.shifted_alpha(grid.dim()))?;
    let c2 = p_to_sup_constant(&grid, &params)?;
    let frozen_constant = c2.powi(config.p as i32);
    let p = config.p as i32;
    let r = config.extremal_r;
    let times: Vec<f64> = config
        .output_times()
        .into_iter()
        .filter(|&t| t >= config.fit_start - 1e-9)
        .collect();
    let fit_step = (config.fit_start / config.solver.dt).round() as i64;
    let per_seed = ensemble(&config.seeds(), |_, seed| {
        let mut fs = vec![Field::constant(grid, r)?, Field::constant(grid, -r)?];
        for f in initial_conditions(&grid, config.members, seed)? {
            if f.max_abs() > r {
                return Err(Error::InvalidParameter(format!(
                    "initial condition of size {} lies outside [-R, R] with R = {r}",
                    f.max_abs()
                )));
            }
            fs.push(f);
        }
        let noise = config.noise(seed, 0.0, config.horizon)?;
        let dt = config.solver.dt;
        let mut min_gap = f64::INFINITY;
        let runs = evolve_coupled_with(&fs, 0.0, config.horizon, &config.solver, &noise, &times, |n, s| {
            if n + 1 < fit_step {
                return Ok(());
            }
            for (member, state) in s.iter().enumerate().skip(2) {
                let gap = order_gap_of(&s[1], state).min(order_gap_of(state, &s[0]));
                min_gap = min_gap.min(gap);
                if gap < -1e-8 {
                    return Err(Error::EnvelopeViolation {
                        member,
                        time: (n + 1) as f64 * dt,
                        amount: -gap,
                    });
                }
            }
            Ok(())
        })?;
        let mut samples = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            let at = |m: usize| &runs[m].snapshots[k].field;
            let phi_gap = phi_besov_difference(at(0), at(1), &params)?.value();
            let envelope = besov_norm_p(&at(0).sub(at(1))?, &shifted).powi(p);
            let mut max_pair = 0.0_f64;
            for i in 2..runs.len() {
                for j in (i + 1)..runs.len() {
                    max_pair = max_pair.max(distance(at(j), at(i), config)?.powi(p));
                }
            }
            let ratio = |x: f64| if x == 0.0 { 0.0 } else { x / phi_gap };
            samples.push(PhiSample {
                seed,
                t,
                phi_gap,
                envelope_ratio: ratio(envelope),
                max_pair_ratio: ratio(max_pair),
            });
        }
        Ok((samples, min_gap))
    })?;
    Ok(PhiContractionReport {
        seeds: config.seeds(),
        frozen_constant,
        envelope_min_gap: per_seed.iter().map(|s| s.1).fold(f64::INFINITY, f64::min),
        samples: per_seed.into_iter().flat_map(|s| s.0).collect(),
    })
}

impl PhiContractionReport {
    pub fn max_pair_ratio(&self) -> f64 {
        self.samples.iter().map(|s| s.max_pair_ratio).fold(0.0, f64::max)
    }

    pub fn min_phi_gap(&self) -> f64 {
        self.samples.iter().map(|s| s.phi_gap).fold(f64::INFINITY, f64::min)
    }

    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::at_least("phi_gap_nonnegative", self.min_phi_gap(), 0.0, "smallest Phi(u+) - Phi(u-) over output times"),
            Check::at_most(
                "pair_ratio_bounded",
                self.max_pair_ratio(),
                self.frozen_constant,
                "largest pairwise ||u_j - u_i||^p / (Phi(u+) - Phi(u-)) against C2^p",
            ),
            Check::at_least("envelope_order", self.envelope_min_gap, -1e-8, "smallest distance to the envelope, t >= fit start"),
        ]
    }

    pub fn report(&self) -> ExperimentReport {
        let kind = ExperimentKind::PhiContraction;
        let mut records = Vec::new();
        for s in &self.samples {
            records.push(Record::new(kind, s.seed, s.t, "phi_gap", s.phi_gap));
            records.push(Record::new(kind, s.seed, s.t, "envelope_ratio", s.envelope_ratio));
            records.push(Record::new(kind, s.seed, s.t, "max_pair_ratio", s.max_pair_ratio));
        }
        ExperimentReport {
            kind,
            seeds: self.seeds.clone(),
            records,
            checks: self.checks(),
            results: json!({
                "frozen_constant": self.frozen_constant,
                "max_pair_ratio": self.max_pair_ratio(),
                "max_envelope_ratio": self.samples.iter().map(|s| s.envelope_ratio).fold(0.0, f64::max),
                "min_phi_gap": self.min_phi_gap(),
                "envelope_min_gap": self.envelope_min_gap,
            }),
        }
    }
}
