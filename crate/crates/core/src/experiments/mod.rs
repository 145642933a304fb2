//! Reproducible ensemble experiments.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]. Ensemble
//! members run in parallel on the ambient rayon pool and are collected in
//! seed order, so the report does not depend on scheduling.
//!
//! Reports carry three things: long-format records (one CSV row each, with
//! header `experiment,seed,t,quantity,value`), named checks with their
//! thresholds, and a JSON summary.

pub mod coming_down;
pub mod config;
pub mod corpus;
pub mod lemmas;
pub mod order;
pub mod phi;
pub mod pullback;
pub mod spectral;
pub mod stats;
pub mod sync;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::besov::besov_norm_sup;
use crate::error::Result;
use crate::field::Field;

pub use coming_down::{run_coming_down, ComingDownStats};
pub use config::{ExperimentConfig, ExperimentKind};
pub use lemmas::{run_lemma_suite, LemmaSuiteReport};
pub use order::{run_order, OrderReport};
pub use phi::{run_phi_contraction, PhiContractionReport};
pub use pullback::{run_pullback, PullbackReport};
pub use spectral::{spectral_exactness, SpectralReport};
pub use sync::{run_sync_rate, RateEstimate, SyncRateReport};

pub const CSV_HEADER: &str = "experiment,seed,t,quantity,value";

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub t: f64,
    pub quantity: String,
    pub value: f64,
}

impl Record {
    pub fn new(experiment: ExperimentKind, seed: u64, t: f64, quantity: &str, value: f64) -> Self {
        Self {
            experiment,
            seed,
            t,
            quantity: quantity.to_string(),
            value,
        }
    }
}

/// A named pass/fail property with the measured value and its threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }
}

/// Uniform view of a finished experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub records: Vec<Record>,
    pub checks: Vec<Check>,
    /// Experiment-specific results.
    pub results: Value,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// CSV text; floats use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{},{},{}\n", r.experiment, r.seed, r.t, r.quantity, r.value));
        }
        out
    }

    pub fn summary(&self, config: &ExperimentConfig) -> Value {
        json!({
            "kind": self.kind,
            "config": config,
            "warnings": config.warnings(),
            "passed": self.passed(),
            "checks": self.checks,
            "results": self.results,
        })
    }
}

/// Runs the experiment selected by `config.kind`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    Ok(match config.kind {
        ExperimentKind::SyncRate => run_sync_rate(config)?.report(),
        ExperimentKind::ComingDown => run_coming_down(config)?.report(),
        ExperimentKind::Order => run_order(config)?.report(),
        ExperimentKind::Pullback => run_pullback(config)?.report(),
        ExperimentKind::PhiContraction => run_phi_contraction(config)?.report(),
        ExperimentKind::LemmaSuite => run_lemma_suite(config)?.report(),
    })
}

/// Maps `task` over the members in parallel, keeping member order.
pub(crate) fn ensemble<T: Send>(
    seeds: &[u64],
    task: impl Fn(usize, u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    seeds.par_iter().enumerate().map(|(i, &seed)| task(i, seed)).collect()
}

/// `‖a − b‖_{−α}` in the sup form over the configured s-grid.
pub(crate) fn distance(a: &Field, b: &Field, config: &ExperimentConfig) -> Result<f64> {
    besov_norm_sup(&a.sub(b)?, config.alpha, &config.s_grid()?)
}

pub(crate) fn norm(a: &Field, config: &ExperimentConfig) -> Result<f64> {
    besov_norm_sup(a, config.alpha, &config.s_grid()?)
}
