//! Pullback convergence: `u(0; s; 0)` started ever earlier on one noise path
//! converges as `s → −∞`.

use serde::Serialize;
use serde_json::json;

use super::stats::{linear_fit, mean_and_se, member_seed, LinearFit};
use super::{distance, ensemble, norm, Check, ExperimentConfig, ExperimentKind, ExperimentReport, Record};
use crate::error::Result;
use crate::field::Field;
use crate::solver::evolve;

const FORWARD_SALT: u64 = 0x7075_6c6c_6261_636b;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullbackReport {
    pub seeds: Vec<u64>,
    /// Seeds of the independent forward runs used for the law comparison.
    pub forward_seeds: Vec<u64>,
    /// `−1, −2, −4, …, −S`.
    pub start_times: Vec<f64>,
    /// `cauchy[i][k] = ‖u(0; s_{k+1}; 0) − u(0; s_k; 0)‖_{−α}` for seed `i`.
    pub cauchy: Vec<Vec<f64>>,
    /// Fit of `ln mean_i cauchy[i][k]` against `|s_k|`.
    pub fit: LinearFit,
    /// `‖u(0; −S; 0)‖_{−α}` per seed.
    pub pullback_norms: Vec<f64>,
    /// `‖u(S; 0; 0)‖_{−α}` per forward seed.
    pub forward_norms: Vec<f64>,
}

/// `−1, −2, −4, …` down to `−depth` (the last one clipped to `−depth`).
pub fn start_times(depth: f64) -> Vec<f64> {
    let mut times = Vec::new();
    let mut s = 1.0;
    while s < depth - 1e-9 {
        times.push(-s);
        s *= 2.0;
    }
    times.push(-depth);
    times
}

pub fn run_pullback(config: &ExperimentConfig) -> Result<PullbackReport> {
    config.validate()?;
    let grid = *config.grid();
    let depth = config.horizon;
    let starts = start_times(depth);
    let seeds = config.seeds();
    let forward_seeds: Vec<u64> = (0..seeds.len())
        .map(|i| member_seed(config.seed_base ^ FORWARD_SALT, i as u64))
        .collect();
    let zero = Field::zeros(grid)?;
    let per_seed = ensemble(&seeds, |i, seed| {
        let noise = config.noise(seed, -depth, 0.0)?;
        let ends = starts
            .iter()
            .map(|&s| evolve(&zero, s, 0.0, &config.solver, &noise, &[]).map(|t| t.end))
            .collect::<Result<Vec<_>>>()?;
        let cauchy = ends
            .windows(2)
            .map(|w| distance(&w[1], &w[0], config))
            .collect::<Result<Vec<_>>>()?;
        let pullback_norm = norm(ends.last().expect("at least one start time"), config)?;
        let forward_noise = config.noise(forward_seeds[i], 0.0, depth)?;
        let forward = evolve(&zero, 0.0, depth, &config.solver, &forward_noise, &[])?;
        Ok((cauchy, pullback_norm, norm(&forward.end, config)?))
    })?;
    let cauchy: Vec<Vec<f64>> = per_seed.iter().map(|p| p.0.clone()).collect();
    let x: Vec<f64> = starts[..starts.len() - 1].iter().map(|s| s.abs()).collect();
    let y: Vec<f64> = (0..x.len())
        .map(|k| (cauchy.iter().map(|c| c[k]).sum::<f64>() / cauchy.len() as f64).ln())
        .collect();
    let fit = linear_fit(&x, &y)?;
    Ok(PullbackReport {
        seeds,
        forward_seeds,
        start_times: starts,
        cauchy,
        fit,
        pullback_norms: per_seed.iter().map(|p| p.1).collect(),
        forward_norms: per_seed.iter().map(|p| p.2).collect(),
    })
}

impl PullbackReport {
    /// `(|mean difference|, 2 × combined standard error)`.
    pub fn stationarity(&self) -> (f64, f64) {
        let (m1, se1) = mean_and_se(&self.pullback_norms);
        let (m2, se2) = mean_and_se(&self.forward_norms);
        ((m1 - m2).abs(), 2.0 * (se1 * se1 + se2 * se2).sqrt())
    }

    pub fn checks(&self) -> Vec<Check> {
        let (diff, bound) = self.stationarity();
        vec![
            Check::at_most("cauchy_slope_negative", self.fit.slope, -f64::MIN_POSITIVE, "slope of ln mean Cauchy difference in |s|"),
            Check::at_least("cauchy_r_squared", self.fit.r_squared, 0.85, "exponential fit of the Cauchy differences"),
            Check::at_most(
                "law_stationarity",
                diff,
                bound,
                "|mean pullback norm - mean forward norm| against two combined standard errors",
            ),
        ]
    }

    pub fn report(&self) -> ExperimentReport {
        let kind = ExperimentKind::Pullback;
        let mut records = Vec::new();
        for (i, &seed) in self.seeds.iter().enumerate() {
            for (k, c) in self.cauchy[i].iter().enumerate() {
                records.push(Record::new(kind, seed, self.start_times[k], "cauchy_difference", *c));
            }
            records.push(Record::new(kind, seed, 0.0, "pullback_norm", self.pullback_norms[i]));
        }
        let depth = self.start_times.last().map_or(0.0, |s| -s);
        for (seed, n) in self.forward_seeds.iter().zip(&self.forward_norms) {
            records.push(Record::new(kind, *seed, depth, "forward_norm", *n));
        }
        let (diff, bound) = self.stationarity();
        ExperimentReport {
            kind,
            seeds: self.seeds.iter().chain(&self.forward_seeds).cloned().collect(),
            records,
            checks: self.checks(),
            results: json!({
                "rate": -self.fit.slope,
                "r_squared": self.fit.r_squared,
                "start_times": self.start_times,
                "stationarity_difference": diff,
                "stationarity_bound": bound,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_time_ladder() {
        assert_eq!(start_times(16.0), vec![-1.0, -2.0, -4.0, -8.0, -16.0]);
        assert_eq!(start_times(6.0), vec![-1.0, -2.0, -4.0, -6.0]);
    }
}
