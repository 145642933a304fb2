//! Small statistics toolkit shared by the experiments: least squares,
//! moments in log space, seed-level bootstrap, isotonic regression and the
//! seed-splitting rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Seed of ensemble member `index` derived from `base`: the first eight
/// bytes (little endian) of `SHA-256(base_le ‖ index_le)`.
pub fn member_seed(base: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit(format!(
            "need at least two finite points, got {} ({} non-finite)",
            x.len(),
            x.iter().chain(y).filter(|v| !v.is_finite()).count()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateFit("zero variance in fitted data".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: sxy * sxy / (sxx * syy),
    })
}

/// `ln((mean_i v_i^p)^{1/p})` computed in log space; `−∞` if all values
/// vanish.
pub fn log_p_mean(values: &[f64], p: f64) -> f64 {
    let logs: Vec<f64> = values.iter().map(|v| p * v.ln()).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    (top + (sum / values.len() as f64).ln()) / p
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Standard deviation of `statistic` over `resamples` bootstrap draws of
/// member indices `0..members`. Draws for which the statistic is not finite
/// are skipped.
pub fn bootstrap_se(members: usize, resamples: usize, seed: u64, statistic: impl Fn(&[usize]) -> f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    let mut sample = vec![0usize; members];
    for _ in 0..resamples {
        for s in sample.iter_mut() {
            *s = rng.random_range(0..members);
        }
        let v = statistic(&sample);
        if v.is_finite() {
            draws.push(v);
        }
    }
    if draws.len() < 2 {
        return f64::NAN;
    }
    let (mean, _) = mean_and_se(&draws);
    (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt()
}

/// Least-squares nonincreasing fit (pool adjacent violators).
pub fn isotonic_nonincreasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks");
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.iter().flat_map(|&(v, n)| std::iter::repeat(v).take(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fit_recovers_a_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, -0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 3.0, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
        assert!(matches!(linear_fit(&x, &vec![1.0; 10]), Err(Error::DegenerateFit(_))));
        assert!(linear_fit(&x, &vec![f64::NEG_INFINITY; 10]).is_err());
    }

    #[test]
    fn log_p_mean_matches_direct_formula() {
        let v = [0.5, 2.0, 1e-3];
        let direct = ((v.iter().map(|x: &f64| x.powi(3)).sum::<f64>() / 3.0).powf(1.0 / 3.0)).ln();
        assert_relative_eq!(log_p_mean(&v, 3.0), direct, max_relative = 1e-12);
        // survives values whose p-th power underflows
        let tiny = [1e-200, 2e-200];
        assert!((log_p_mean(&tiny, 40.0) - (2e-200f64).ln()).abs() < 0.05);
        assert_eq!(log_p_mean(&[0.0, 0.0], 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn isotonic_pools_violations() {
        assert_eq!(isotonic_nonincreasing(&[3.0, 1.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 0.0]);
        assert_eq!(isotonic_nonincreasing(&[1.0, 2.0, 3.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(member_seed(7, 3), member_seed(7, 3));
        assert_ne!(member_seed(7, 3), member_seed(7, 4));
        assert_ne!(member_seed(7, 3), member_seed(8, 3));
    }

    #[test]
    fn bootstrap_of_the_mean() {
        let data: Vec<f64> = (0..400).map(|i| (i % 7) as f64).collect();
        let se = bootstrap_se(data.len(), 1000, 1, |idx| {
            idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64
        });
        let (_, analytic) = mean_and_se(&data);
        assert!((se / analytic - 1.0).abs() < 0.15, "{se} vs {analytic}");
    }
}
