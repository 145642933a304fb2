//! Corpus-level checks of the two norm-decoupling inequalities, preceded by
//! a validation of the explicit constant `C(p) = 2^{p−1} p` on constant
//! fields, where every quantity has a closed form.

use rand::Rng;
use serde::Serialize;
use serde_json::json;

use super::corpus::{ordered_pair, rng_for, sample, FieldKind};
use super::{ensemble, Check, ExperimentConfig, ExperimentKind, ExperimentReport, Record};
use crate::besov::{lemma_a1_gap, lemma_a2_bounds, lemma_a2_constant, lemma_a2_gap, BesovParams};
use crate::error::Result;
use crate::field::{Field, TorusGrid};

const SCALAR_CASES: usize = 100;
const SCALAR_SALT: u64 = 0x7363_616c_6172_0001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaOutcome {
    pub p: u32,
    pub passed: usize,
    pub total: usize,
    pub failing_seeds: Vec<u64>,
    /// Largest `lhs / rhs` over the corpus.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantValidation {
    pub cases: usize,
    /// Cases where the direct evaluation matches the closed form and stays
    /// below both intermediate bounds.
    pub passed: usize,
    /// Largest `|Φ(f) − Φ(g)| / lipschitz bound`; close to 1 shows the
    /// constant cannot be lowered.
    pub max_lipschitz_ratio: f64,
    pub max_oracle_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSuiteReport {
    pub seeds: Vec<u64>,
    pub constant: ConstantValidation,
    pub a1: Vec<LemmaOutcome>,
    pub a2: Vec<LemmaOutcome>,
}

/// `|sgn(a)|a|^p − sgn(b)|b|^p|`, factored as `|a − b| Σ_k |a|^k |b|^{p−1−k}`
/// when `a` and `b` share a sign.
fn power_gap(a: f64, b: f64, p: u32) -> f64 {
    if a * b < 0.0 {
        return a.abs().powi(p as i32) + b.abs().powi(p as i32);
    }
    let (x, y) = (a.abs(), b.abs());
    (0..p).map(|k| x.powi(k as i32) * y.powi((p - 1 - k) as i32)).sum::<f64>() * (a - b).abs()
}

/// Direct evaluation on constant fields against closed forms:
/// `∫₀¹ s^{αp/2} ds/s = 2/(αp)` and the heat semigroup fixes constants.
pub fn validate_constant(grid: &TorusGrid, alpha: f64, ps: &[u32], seed: u64, s_points: usize) -> Result<ConstantValidation> {
    let mut rng = rng_for(seed ^ SCALAR_SALT);
    let mut passed = 0;
    let mut max_lipschitz_ratio = 0.0_f64;
    let mut max_oracle_error = 0.0_f64;
    let s_grid = crate::besov::SGrid::geometric(grid.spacing().powi(2).min(0.5), s_points)?;
    for case in 0..SCALAR_CASES {
        let p = ps[case % ps.len()];
        let params = BesovParams::new(alpha, p, s_grid.clone())?;
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let a = scale * rng.random_range(-1.0..1.0);
        let b = if case % 5 == 0 { a * (1.0 + 1e-6) } else { scale * rng.random_range(-1.0..1.0) };
        let bounds = lemma_a2_bounds(&Field::constant(*grid, a)?, &Field::constant(*grid, b)?, &params)?;
        let measure = grid.volume() * 2.0 / (alpha * p as f64);
        let two = 2f64.powi(p as i32 - 1);
        let lhs = two * power_gap(a, b, p) * measure;
        let lipschitz = lemma_a2_constant(p) * (a - b).abs() * a.abs().max(b.abs()).powi(p as i32 - 1) * measure;
        let crude = two * (a.abs().powi(p as i32) + b.abs().powi(p as i32)) * measure;
        let relative = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-12);
        let error = relative(bounds.lhs, lhs)
            .max(relative(bounds.lipschitz, lipschitz))
            .max(relative(bounds.crude, crude));
        max_oracle_error = max_oracle_error.max(error);
        if lipschitz > 0.0 {
            max_lipschitz_ratio = max_lipschitz_ratio.max(lhs / lipschitz);
        }
        let tol = |x: f64| 1e-9 * (1.0 + x.abs());
        if error <= 1e-8 && lhs <= lipschitz + tol(lipschitz) && lhs <= crude + tol(crude) && bounds.lhs <= bounds.combined + tol(bounds.combined) {
            passed += 1;
        }
    }
    Ok(ConstantValidation {
        cases: SCALAR_CASES,
        passed,
        max_lipschitz_ratio,
        max_oracle_error,
    })
}

/// Pair `index` of the corpus: `(upper, lower)` with `lower ⪯ upper` when
/// `ordered`, otherwise two independent fields.
pub fn corpus_pair(grid: &TorusGrid, index: usize, seed: u64, ordered: bool) -> Result<(Field, Field)> {
    let mut rng = rng_for(seed);
    let kind = FieldKind::cycle(index);
    let partner = FieldKind::cycle(index / 4);
    let scale = [0.3, 1.0, 3.0][(index / 16) % 3];
    if ordered {
        ordered_pair(kind, partner, grid, &mut rng, scale)
    } else {
        Ok((
            sample(kind, grid, &mut rng, scale)?,
            sample(FieldKind::cycle(index / 4 + 1), grid, &mut rng, scale)?,
        ))
    }
}

pub fn run_lemma_suite(config: &ExperimentConfig) -> Result<LemmaSuiteReport> {
    config.validate()?;
    let grid = *config.grid();
    let seeds = config.seeds();
    let s_grid = config.s_grid()?;
    let constant = validate_constant(&grid, config.lemma_alpha, &config.lemma_p, config.seed_base, config.s_points)?;
    let params: Vec<BesovParams> = config
        .lemma_p
        .iter()
        .map(|&p| BesovParams::new(config.lemma_alpha, p, s_grid.clone()))
        .collect::<Result<_>>()?;
    // per pair, per p: (a1 lhs, a1 rhs, a2 lhs, a2 rhs)
    let gaps = ensemble(&seeds, |i, seed| {
        let (upper, lower) = corpus_pair(&grid, i, seed, true)?;
        let (f, g) = corpus_pair(&grid, i, seed.rotate_left(17), false)?;
        params
            .iter()
            .map(|pr| Ok((lemma_a1_gap(&upper, &lower, pr)?, lemma_a2_gap(&f, &g, pr)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    let outcome = |j: usize, pick: &dyn Fn(usize) -> crate::besov::LemmaGap| {
        let mut failing = Vec::new();
        let mut max_ratio = 0.0_f64;
        for (i, &seed) in seeds.iter().enumerate() {
            let gap = pick(i);
            if !gap.holds() {
                failing.push(seed);
            }
            if gap.rhs > 0.0 {
                max_ratio = max_ratio.max(gap.lhs / gap.rhs);
            }
        }
        LemmaOutcome {
            p: config.lemma_p[j],
            passed: seeds.len() - failing.len(),
            total: seeds.len(),
            failing_seeds: failing,
            max_ratio,
        }
    };
    let a1 = (0..params.len()).map(|j| outcome(j, &|i| gaps[i][j].0)).collect();
    let a2 = (0..params.len()).map(|j| outcome(j, &|i| gaps[i][j].1)).collect();
    Ok(LemmaSuiteReport {
        seeds,
        constant,
        a1,
        a2,
    })
}

impl LemmaSuiteReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut checks = vec![Check::at_least(
            "a2_constant_validated",
            self.constant.passed as f64,
            self.constant.cases as f64,
            format!(
                "constant-field cases matching closed forms and below both bounds (max lipschitz ratio {:.6})",
                self.constant.max_lipschitz_ratio
            ),
        )];
        for (name, outcomes) in [("a1", &self.a1), ("a2", &self.a2)] {
            for o in outcomes {
                checks.push(Check::at_least(
                    &format!("{name}_p{}", o.p),
                    o.passed as f64,
                    o.total as f64,
                    if o.failing_seeds.is_empty() {
                        format!("max lhs/rhs {:.6}", o.max_ratio)
                    } else {
                        format!("failing seeds: {:?}", o.failing_seeds)
                    },
                ));
            }
        }
        checks
    }

    pub fn report(&self) -> ExperimentReport {
        let kind = ExperimentKind::LemmaSuite;
        let mut records = Vec::new();
        for (name, outcomes) in [("a1", &self.a1), ("a2", &self.a2)] {
            for o in outcomes {
                records.push(Record::new(kind, 0, 0.0, &format!("{name}_p{}_passed", o.p), o.passed as f64));
                records.push(Record::new(kind, 0, 0.0, &format!("{name}_p{}_max_ratio", o.p), o.max_ratio));
            }
        }
        records.push(Record::new(kind, 0, 0.0, "a2_constant_max_lipschitz_ratio", self.constant.max_lipschitz_ratio));
        ExperimentReport {
            kind,
            seeds: self.seeds.clone(),
            records,
            checks: self.checks(),
            results: json!({
                "constant_validation": self.constant,
                "a1": self.a1,
                "a2": self.a2,
            }),
        }
    }
}
