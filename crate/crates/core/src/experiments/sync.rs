//! Synchronization rate from the extremal envelope.
//!
//! Every solution started inside `[−R, R]` is squeezed between the two
//! solutions `u_±` started from the constants `±R`, so the supremum over
//! pairs of initial data of `‖u(t; f₂) − u(t; f₁)‖_{−α}` is attained (for
//! this ordered system, up to the norm being monotone in `|·|`) by
//! `D(t) = ‖u_+(t) − u_−(t)‖_{−α}`. The ensemble `L^p` mean of `D` is fitted
//! by an exponential on `[fit_start, T]`.

use serde::Serialize;
use serde_json::json;

use super::stats::{bootstrap_se, isotonic_nonincreasing, linear_fit, log_p_mean, member_seed};
use super::{distance, ensemble, Check, ExperimentConfig, ExperimentKind, ExperimentReport, Record};
use crate::error::{Error, Result};
use crate::field::{order_gap_of, Field};
use crate::solver::evolve_coupled_with;

/// `L^p` means below this fraction of their largest value on the fit window
/// are treated as unresolved when the two extremal sizes are compared: there
/// the distance between the envelopes is of the order of the accumulated
/// round-off in the fields themselves.
pub const RESOLUTION: f64 = 1e-10;

/// Exponential fit of the ensemble `L^p` mean of `D(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    /// Decay rate of the `L^p` mean, `−d/dt ln (E D^p)^{1/p}`.
    pub lambda_hat: f64,
    /// Bootstrap standard error of `lambda_hat` over seeds.
    pub lambda_se: f64,
    pub fit_window: (f64, f64),
    pub r_squared: f64,
    pub p: f64,
    pub times: Vec<f64>,
    /// `ln (mean D^p)^{1/p}` at each fitted time.
    pub log_p_mean: Vec<f64>,
    /// Bootstrap standard errors of `log_p_mean`.
    pub log_p_mean_se: Vec<f64>,
}

/// Fits `ln (mean_i D_i(t)^p)^{1/p} ≈ a − λ t` over the times in `window`.
/// `curves[i][k]` is member `i` at `times[k]`.
pub fn fit_rate(
    times: &[f64],
    curves: &[Vec<f64>],
    p: f64,
    window: (f64, f64),
    resamples: usize,
    seed: u64,
) -> Result<RateEstimate> {
    let eps = 1e-9;
    let selected: Vec<usize> = (0..times.len())
        .filter(|&k| times[k] >= window.0 - eps && times[k] <= window.1 + eps)
        .collect();
    let fit_times: Vec<f64> = selected.iter().map(|&k| times[k]).collect();
    let column = |k: usize, members: &[usize]| -> Vec<f64> { members.iter().map(|&i| curves[i][k]).collect() };
    let all: Vec<usize> = (0..curves.len()).collect();
    let log_mean: Vec<f64> = selected.iter().map(|&k| log_p_mean(&column(k, &all), p)).collect();
    let fit = linear_fit(&fit_times, &log_mean)?;
    let statistic = |members: &[usize]| {
        let y: Vec<f64> = selected.iter().map(|&k| log_p_mean(&column(k, members), p)).collect();
        linear_fit(&fit_times, &y).map_or(f64::NAN, |f| -f.slope)
    };
    let lambda_se = bootstrap_se(curves.len(), resamples, seed, statistic);
    let log_p_mean_se = selected
        .iter()
        .enumerate()
        .map(|(j, &k)| bootstrap_se(curves.len(), resamples, seed ^ (j as u64 + 1), |m| log_p_mean(&column(k, m), p)))
        .collect();
    Ok(RateEstimate {
        lambda_hat: -fit.slope,
        lambda_se,
        fit_window: window,
        r_squared: fit.r_squared,
        p,
        times: fit_times,
        log_p_mean: log_mean,
        log_p_mean_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncRateReport {
    pub seeds: Vec<u64>,
    pub times: Vec<f64>,
    /// `D(t)` per seed for data `±extremal_r`.
    pub envelope_distance: Vec<Vec<f64>>,
    /// `D(t)` per seed for data `±reference_r`.
    pub reference_distance: Vec<Vec<f64>>,
    pub estimate: RateEstimate,
    /// Same ensemble, moment order `2p`.
    pub estimate_double_p: RateEstimate,
    /// Smallest pointwise gap between ordered trajectories for `t ≥ fit_start`.
    pub envelope_min_gap: f64,
    /// Same for `0 < t < fit_start`, reported only.
    pub early_min_gap: f64,
    /// Largest relative difference between the ensemble `L^p` means of `D`
    /// for the two extremal sizes, over times `t ≥ fit_start` at which the
    /// mean is resolved (see [`RESOLUTION`]).
    pub r_sensitivity: f64,
    /// Last time entering `r_sensitivity`.
    pub resolved_until: f64,
    /// Largest `|D_R − D_{R'}| / D_{R'}` over single seeds, reported only:
    /// once a member has synchronized to round-off this ratio is noise.
    pub member_r_sensitivity: f64,
    /// Largest deviation of the log `L^p` mean from its nonincreasing fit.
    pub monotone_residual: f64,
    pub monotone_tolerance: f64,
}

struct Member {
    d: Vec<f64>,
    d_ref: Vec<f64>,
    min_gap: f64,
    early_min_gap: f64,
}

fn run_member(config: &ExperimentConfig, seed: u64, times: &[f64]) -> Result<Member> {
    let grid = *config.grid();
    let (r, r_ref) = (config.extremal_r, config.reference_r);
    let noise = config.noise(seed, 0.0, config.horizon)?;
    let fs = [
        Field::constant(grid, r)?,
        Field::constant(grid, -r)?,
        Field::constant(grid, r_ref)?,
        Field::constant(grid, -r_ref)?,
    ];
    let dt = config.solver.dt;
    let fit_step = (config.fit_start / dt).round() as i64;
    let (mut min_gap, mut early_min_gap) = (f64::INFINITY, f64::INFINITY);
    let runs = evolve_coupled_with(&fs, 0.0, config.horizon, &config.solver, &noise, times, |n, states| {
        // u_{−R'} ⪯ u_{−R} ⪯ u_{+R} ⪯ u_{+R'} (with R ≤ R'; roles swap otherwise)
        let (upper, lower) = if r <= r_ref { (2, 3) } else { (0, 1) };
        let (inner_upper, inner_lower) = if r <= r_ref { (0, 1) } else { (2, 3) };
        let gap = order_gap_of(&states[inner_lower], &states[inner_upper])
            .min(order_gap_of(&states[inner_upper], &states[upper]))
            .min(order_gap_of(&states[lower], &states[inner_lower]));
        if n + 1 >= fit_step {
            min_gap = min_gap.min(gap);
        } else {
            early_min_gap = early_min_gap.min(gap);
        }
        Ok(())
    })?;
    let mut d = Vec::with_capacity(times.len());
    let mut d_ref = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        d.push(distance(&runs[0].snapshots[k].field, &runs[1].snapshots[k].field, config)?);
        d_ref.push(distance(&runs[2].snapshots[k].field, &runs[3].snapshots[k].field, config)?);
    }
    Ok(Member {
        d,
        d_ref,
        min_gap,
        early_min_gap,
    })
}

pub fn run_sync_rate(config: &ExperimentConfig) -> Result<SyncRateReport> {
    config.validate()?;
    let seeds = config.seeds();
    let times = config.output_times();
    let members = ensemble(&seeds, |_, seed| run_member(config, seed, &times))?;
    let window = (config.fit_start, config.horizon);
    let envelope_distance: Vec<Vec<f64>> = members.iter().map(|m| m.d.clone()).collect();
    let reference_distance: Vec<Vec<f64>> = members.iter().map(|m| m.d_ref.clone()).collect();
    let boot_seed = member_seed(config.seed_base, u64::MAX);
    let p = config.p as f64;
    let estimate = fit_rate(&times, &envelope_distance, p, window, config.bootstrap_resamples, boot_seed)?;
    let estimate_double_p = fit_rate(&times, &envelope_distance, 2.0 * p, window, config.bootstrap_resamples, boot_seed)?;
    if !estimate.lambda_hat.is_finite() {
        return Err(Error::DegenerateFit("fitted rate is not finite".into()));
    }

    let window_times: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= config.fit_start - 1e-9).collect();
    let column = |curves: &[Vec<f64>], k: usize| -> Vec<f64> { curves.iter().map(|c| c[k]).collect() };
    let log_means: Vec<(f64, f64)> = window_times
        .iter()
        .map(|&k| (log_p_mean(&column(&envelope_distance, k), p), log_p_mean(&column(&reference_distance, k), p)))
        .collect();
    let floor = log_means.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max) + RESOLUTION.ln();
    let mut r_sensitivity = 0.0_f64;
    let mut resolved_until = config.fit_start;
    for (&k, &(a, b)) in window_times.iter().zip(&log_means) {
        if b >= floor {
            r_sensitivity = r_sensitivity.max((a - b).exp_m1().abs());
            resolved_until = times[k];
        }
    }
    let mut member_r_sensitivity = 0.0_f64;
    for m in &members {
        for &k in &window_times {
            let rel = (m.d[k] - m.d_ref[k]).abs() / m.d_ref[k];
            member_r_sensitivity = member_r_sensitivity.max(if rel.is_nan() { 0.0 } else { rel });
        }
    }
    let iso = isotonic_nonincreasing(&estimate.log_p_mean);
    let monotone_residual = iso
        .iter()
        .zip(&estimate.log_p_mean)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let monotone_tolerance = 3.0 * estimate.log_p_mean_se.iter().cloned().fold(0.0, f64::max);

    Ok(SyncRateReport {
        envelope_min_gap: members.iter().map(|m| m.min_gap).fold(f64::INFINITY, f64::min),
        early_min_gap: members.iter().map(|m| m.early_min_gap).fold(f64::INFINITY, f64::min),
        seeds,
        times,
        envelope_distance,
        reference_distance,
        estimate,
        estimate_double_p,
        r_sensitivity,
        resolved_until,
        member_r_sensitivity,
        monotone_residual,
        monotone_tolerance,
    })
}

impl SyncRateReport {
    pub fn checks(&self) -> Vec<Check> {
        let e = &self.estimate;
        let e2 = &self.estimate_double_p;
        let tolerance = 2.0 * (0.25 * e.lambda_se.powi(2) + e2.lambda_se.powi(2)).sqrt();
        vec![
            Check::at_least("lambda_positive", e.lambda_hat, f64::MIN_POSITIVE, "fitted decay rate of the L^p mean"),
            Check::at_least("r_squared", e.r_squared, 0.9, "exponential fit on the fit window"),
            Check::at_least(
                "envelope_order",
                self.envelope_min_gap,
                -1e-8,
                "smallest gap between ordered extremal trajectories, t >= fit start",
            ),
            Check::at_most(
                "r_insensitivity",
                self.r_sensitivity,
                0.01,
                format!(
                    "largest relative difference of the L^p mean of D(t) between the two extremal sizes, t in [{}, {}]",
                    self.estimate.fit_window.0, self.resolved_until
                ),
            ),
            Check::at_least(
                "rate_double_p",
                e2.lambda_hat - 0.5 * e.lambda_hat,
                -tolerance,
                format!("rate(2p) - rate(p)/2, tolerance two bootstrap errors ({tolerance:.3e})"),
            ),
            Check::at_most(
                "monotone_decay",
                self.monotone_residual,
                self.monotone_tolerance,
                "largest deviation of the log L^p mean from its nonincreasing fit",
            ),
        ]
    }

    pub fn report(&self) -> ExperimentReport {
        let kind = ExperimentKind::SyncRate;
        let mut records = Vec::new();
        for (i, &seed) in self.seeds.iter().enumerate() {
            for (k, &t) in self.times.iter().enumerate() {
                records.push(Record::new(kind, seed, t, "D", self.envelope_distance[i][k]));
                records.push(Record::new(kind, seed, t, "D_reference", self.reference_distance[i][k]));
            }
        }
        for (k, &t) in self.estimate.times.iter().enumerate() {
            records.push(Record::new(kind, 0, t, "log_p_mean", self.estimate.log_p_mean[k]));
            records.push(Record::new(kind, 0, t, "log_p_mean_se", self.estimate.log_p_mean_se[k]));
        }
        ExperimentReport {
            kind,
            seeds: self.seeds.clone(),
            records,
            checks: self.checks(),
            results: json!({
                "lambda_hat": self.estimate.lambda_hat,
                "lambda_se": self.estimate.lambda_se,
                "r_squared": self.estimate.r_squared,
                "fit_window": self.estimate.fit_window,
                "p": self.estimate.p,
                "lambda_hat_double_p": self.estimate_double_p.lambda_hat,
                "envelope_min_gap": self.envelope_min_gap,
                "early_min_gap": self.early_min_gap,
                "r_sensitivity": self.r_sensitivity,
                "r_sensitivity_resolved_until": self.resolved_until,
                "member_r_sensitivity": self.member_r_sensitivity,
                "monotone_residual": self.monotone_residual,
            }),
        }
    }
}
