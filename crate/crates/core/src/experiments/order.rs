//! Order preservation under synchronous coupling: `f₁ ⪯ f₂` must give
//! `u(t; f₁) ⪯ u(t; f₂)` for all `t`.

use serde::Serialize;
use serde_json::json;

use super::corpus::{ordered_pair, rng_for, FieldKind};
use super::{ensemble, Check, ExperimentConfig, ExperimentKind, ExperimentReport, Record};
use crate::error::Result;
use crate::field::order_gap_of;
use crate::solver::evolve_coupled_with;

/// Initial data families, cycled over runs: `(upper kind, gap kind, scale)`.
/// The gap `h` enters as `f₂ − f₁ = h²`; a constant `h` gives a constant
/// shift and a high-frequency `h` an adversarial one.
const FAMILIES: [(FieldKind, FieldKind, f64); 4] = [
    (FieldKind::TrigPolynomial, FieldKind::TrigPolynomial, 2.0),
    (FieldKind::RoughGaussian, FieldKind::HighFrequency, 1.0),
    (FieldKind::TrigPolynomial, FieldKind::Constant, 3.0),
    (FieldKind::HighFrequency, FieldKind::RoughGaussian, 1.0),
];

const INITIAL_DATA_SALT: u64 = 0x6f72_6465_725f_6976;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRun {
    pub seed: u64,
    pub family: usize,
    /// `‖f₂ − f₁‖_∞`.
    pub initial_gap: f64,
    /// `min_{t, x} (u₂ − u₁)` over all steps.
    pub worst_gap: f64,
    /// Running minimum of the gap at each output time.
    pub gaps: Vec<f64>,
}

impl OrderRun {
    pub fn tolerance(&self) -> f64 {
        -1e-8 * (1.0 + self.initial_gap)
    }

    pub fn passed(&self) -> bool {
        self.worst_gap >= self.tolerance()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub times: Vec<f64>,
    pub runs: Vec<OrderRun>,
}

pub fn run_order(config: &ExperimentConfig) -> Result<OrderReport> {
    config.validate()?;
    let grid = *config.grid();
    let times = config.output_times();
    let dt = config.solver.dt;
    let output_steps: Vec<i64> = times.iter().map(|t| (t / dt).round() as i64).collect();
    let runs = ensemble(&config.seeds(), |i, seed| {
        let family = i % FAMILIES.len();
        let (kind, gap_kind, scale) = FAMILIES[family];
        let mut rng = rng_for(seed ^ INITIAL_DATA_SALT);
        let (upper, lower) = ordered_pair(kind, gap_kind, &grid, &mut rng, scale)?;
        let initial_gap = upper.sub(&lower)?.max_abs();
        let noise = config.noise(seed, 0.0, config.horizon)?;
        let mut worst = order_gap_of(lower.values(), upper.values());
        let mut gaps = vec![worst];
        let mut next = 1;
        evolve_coupled_with(&[lower, upper], 0.0, config.horizon, &config.solver, &noise, &[], |n, s| {
            worst = worst.min(order_gap_of(&s[0], &s[1]));
            while next < output_steps.len() && output_steps[next] == n + 1 {
                gaps.push(worst);
                next += 1;
            }
            Ok(())
        })?;
        Ok(OrderRun {
            seed,
            family,
            initial_gap,
            worst_gap: worst,
            gaps,
        })
    })?;
    Ok(OrderReport { times, runs })
}

impl OrderReport {
    pub fn failing_seeds(&self) -> Vec<u64> {
        self.runs.iter().filter(|r| !r.passed()).map(|r| r.seed).collect()
    }

    /// Smallest `worst_gap / (1 + initial_gap)` over runs.
    pub fn worst_relative_gap(&self) -> f64 {
        self.runs
            .iter()
            .map(|r| r.worst_gap / (1.0 + r.initial_gap))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn checks(&self) -> Vec<Check> {
        let failing = self.failing_seeds();
        vec![Check::at_least(
            "order_preserved",
            self.worst_relative_gap(),
            -1e-8,
            if failing.is_empty() {
                format!("{} runs, worst gap relative to 1 + initial gap", self.runs.len())
            } else {
                format!("failing seeds: {failing:?}")
            },
        )]
    }

    pub fn report(&self) -> ExperimentReport {
        let kind = ExperimentKind::Order;
        let mut records = Vec::new();
        for run in &self.runs {
            records.push(Record::new(kind, run.seed, 0.0, "initial_gap", run.initial_gap));
            for (t, g) in self.times.iter().zip(&run.gaps) {
                records.push(Record::new(kind, run.seed, *t, "min_gap", *g));
            }
        }
        ExperimentReport {
            kind,
            seeds: self.runs.iter().map(|r| r.seed).collect(),
            records,
            checks: self.checks(),
            results: json!({
                "runs": self.runs.len(),
                "worst_relative_gap": self.worst_relative_gap(),
                "failing_seeds": self.failing_seeds(),
            }),
        }
    }
}
