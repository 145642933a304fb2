//! Coming down from infinity: solutions from huge constant data forget
//! their size by a fixed positive time.

use serde::Serialize;
use serde_json::json;

use super::stats::median;
use super::{distance, ensemble, norm, Check, ExperimentConfig, ExperimentKind, ExperimentReport, Record};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::solver::evolve_coupled;

/// Curves `t^γ ‖u(t; 0; R)‖_{−α}` per seed and data size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComingDownStats {
    pub gamma: f64,
    pub seeds: Vec<u64>,
    pub r_values: Vec<f64>,
    pub times: Vec<f64>,
    /// `weighted[i][j][k]` = seed `i`, `R = r_values[j]`, `t = times[k]`.
    pub weighted: Vec<Vec<Vec<f64>>>,
    /// Empirical `K` per seed: the maximum of the weighted curves.
    pub k_hat: Vec<f64>,
    /// Per seed, `(max_R − min_R) / min_R` of `‖u(t_mid; R)‖_{−α}`.
    pub spread: Vec<f64>,
    /// Per seed, `‖u(t_mid; R_max) − u(t_mid; R_min)‖_{−α} / ‖u(t_mid; R_max)‖_{−α}`.
    pub extreme_difference: Vec<f64>,
    /// Time at which spreads are compared.
    pub t_mid: f64,
}

pub fn run_coming_down(config: &ExperimentConfig) -> Result<ComingDownStats> {
    config.validate()?;
    let grid = *config.grid();
    let seeds = config.seeds();
    let t_mid = 0.5;
    let mut times: Vec<f64> = config.output_times().into_iter().filter(|&t| t > 0.0).collect();
    if !times.iter().any(|t| (t - t_mid).abs() < 1e-9) {
        times.push(t_mid);
        times.sort_by(f64::total_cmp);
    }
    let mid = times
        .iter()
        .position(|t| (t - t_mid).abs() < 1e-9)
        .ok_or_else(|| Error::InvalidParameter("t = 0.5 not on the output grid".into()))?;
    let (lo, hi) = config
        .r_values
        .iter()
        .enumerate()
        .fold((0, 0), |(lo, hi), (j, r)| {
            (
                if *r < config.r_values[lo] { j } else { lo },
                if *r > config.r_values[hi] { j } else { hi },
            )
        });
    let per_seed = ensemble(&seeds, |_, seed| {
        let noise = config.noise(seed, 0.0, config.horizon)?;
        let fs = config
            .r_values
            .iter()
            .map(|&r| Field::constant(grid, r))
            .collect::<Result<Vec<_>>>()?;
        let runs = evolve_coupled(&fs, 0.0, config.horizon, &config.solver, &noise, &times)?;
        let mut weighted = Vec::with_capacity(runs.len());
        let mut at_mid = Vec::with_capacity(runs.len());
        for run in &runs {
            let mut curve = Vec::with_capacity(times.len());
            for (k, snap) in run.snapshots.iter().enumerate() {
                let n = norm(&snap.field, config)?;
                if k == mid {
                    at_mid.push(n);
                }
                curve.push(snap.time.powf(config.gamma) * n);
            }
            weighted.push(curve);
        }
        let diff = distance(&runs[hi].snapshots[mid].field, &runs[lo].snapshots[mid].field, config)?;
        let max = at_mid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = at_mid.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = if max == 0.0 { 0.0 } else { (max - min) / min };
        let extreme = if diff == 0.0 { 0.0 } else { diff / at_mid[hi] };
        Ok((weighted, spread, extreme))
    })?;
    let mut stats = ComingDownStats {
        gamma: config.gamma,
        seeds,
        r_values: config.r_values.clone(),
        times,
        weighted: Vec::new(),
        k_hat: Vec::new(),
        spread: Vec::new(),
        extreme_difference: Vec::new(),
        t_mid,
    };
    for (weighted, spread, extreme) in per_seed {
        stats
            .k_hat
            .push(weighted.iter().flatten().cloned().fold(0.0, f64::max));
        stats.weighted.push(weighted);
        stats.spread.push(spread);
        stats.extreme_difference.push(extreme);
    }
    Ok(stats)
}

impl ComingDownStats {
    pub fn k_ratio(&self) -> f64 {
        let med = median(&self.k_hat);
        let max = self.k_hat.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            0.0
        } else {
            max / med
        }
    }

    pub fn checks(&self) -> Vec<Check> {
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        vec![
            Check::at_most(
                "cross_r_spread",
                max(&self.spread),
                0.05,
                format!("largest relative spread of the norm across R at t = {}", self.t_mid),
            ),
            Check::at_most(
                "extreme_difference",
                max(&self.extreme_difference),
                1e-2,
                "norm of u(R_max) - u(R_min) relative to the norm of u(R_max)",
            ),
            Check::at_most("k_hat_ratio", self.k_ratio(), 10.0, "max / median of K_hat across seeds"),
        ]
    }

    pub fn report(&self) -> ExperimentReport {
        let kind = ExperimentKind::ComingDown;
        let mut records = Vec::new();
        for (i, &seed) in self.seeds.iter().enumerate() {
            for (j, r) in self.r_values.iter().enumerate() {
                let quantity = format!("weighted_norm_R{r:e}");
                for (k, &t) in self.times.iter().enumerate() {
                    records.push(Record::new(kind, seed, t, &quantity, self.weighted[i][j][k]));
                }
            }
            records.push(Record::new(kind, seed, self.t_mid, "spread", self.spread[i]));
            records.push(Record::new(kind, seed, self.t_mid, "extreme_difference", self.extreme_difference[i]));
            records.push(Record::new(kind, seed, 0.0, "k_hat", self.k_hat[i]));
        }
        ExperimentReport {
            kind,
            seeds: self.seeds.clone(),
            records,
            checks: self.checks(),
            results: json!({
                "gamma": self.gamma,
                "r_values": self.r_values,
                "k_hat_max": self.k_hat.iter().cloned().fold(0.0, f64::max),
                "k_hat_median": median(&self.k_hat),
                "k_hat_ratio": self.k_ratio(),
                "max_spread": self.spread.iter().cloned().fold(0.0, f64::max),
                "max_extreme_difference": self.extreme_difference.iter().cloned().fold(0.0, f64::max),
            }),
        }
    }
}
