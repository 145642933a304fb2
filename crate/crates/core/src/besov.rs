//! Negative-exponent Besov norms defined through the heat semigroup, and the
//! order-decoupling functionals built from
//! `φ_p(f) = 2^{p−1} ∫ sgn(f) |f|^p dx`.
//!
//! All integrals over the smoothing time `s ∈ (0, 1]` are evaluated with a
//! single positive quadrature rule on a geometric grid (see [`SGrid`]).
//! Because every quantity is a nonnegative combination of the same node
//! values, inequalities that hold for each `s` (and Hölder's inequality in
//! the joint `(x, s)` measure) hold exactly for the discrete versions too.
//!
//! On a finite grid every field is band-limited, so the distinction between
//! `C^{-α}` and the closure of smooth functions does not arise.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{lp_norm_of, Field, LpIndex, TorusGrid};

/// Default number of quadrature nodes.
pub const DEFAULT_S_POINTS: usize = 64;
/// Smallest admissible number of quadrature nodes.
pub const MIN_S_POINTS: usize = 32;

/// Geometric grid `s_min = s_0 < s_1 < … < s_{J−1} = 1` of smoothing times.
#[derive(Debug, Clone, PartialEq)]
pub struct SGrid {
    nodes: Vec<f64>,
}

impl SGrid {
    pub fn geometric(s_min: f64, count: usize) -> Result<Self> {
        if !(s_min > 0.0 && s_min < 1.0) {
            return Err(Error::InvalidParameter(format!("s_min = {s_min} must lie in (0, 1)")));
        }
        if count < MIN_S_POINTS {
            return Err(Error::InvalidParameter(format!(
                "s-grid needs at least {MIN_S_POINTS} points, got {count}"
            )));
        }
        let log_min = s_min.ln();
        let last = (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count)
            .map(|j| (log_min * (1.0 - j as f64 / last)).exp())
            .collect();
        nodes[0] = s_min;
        nodes[count - 1] = 1.0;
        Ok(Self { nodes })
    }

    /// `s_min = h²`, the smallest scale the grid resolves, with
    /// [`DEFAULT_S_POINTS`] nodes.
    pub fn for_grid(grid: &TorusGrid) -> Self {
        Self::geometric(grid.spacing().powi(2).min(0.5), DEFAULT_S_POINTS)
            .expect("default s-grid parameters are valid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn s_min(&self) -> f64 {
        self.nodes[0]
    }

    /// Quadrature weights `W_j` with `Σ_j W_j G(s_j) ≈ ∫₀¹ s^w G(s) ds/s`.
    ///
    /// `G` is interpolated linearly in `log s` between nodes and held at
    /// `G(s_min)` on `(0, s_min]`; the weight `s^w` is integrated exactly.
    /// All weights are positive. Requires `w > 0`.
    pub fn weights(&self, w: f64) -> Result<Vec<f64>> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "quadrature weight exponent must be positive, got {w}"
            )));
        }
        let logs: Vec<f64> = self.nodes.iter().map(|s| s.ln()).collect();
        let mut weights = vec![0.0; self.nodes.len()];
        weights[0] = (w * logs[0]).exp() / w;
        for j in 0..logs.len() - 1 {
            let h = logs[j + 1] - logs[j];
            let z = w * h;
            let base = (w * logs[j]).exp() * h;
            // ∫₀¹ e^{zτ} dτ and ∫₀¹ τ e^{zτ} dτ
            let (m0, m1) = if z.abs() < 1e-3 {
                (
                    1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0,
                    0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0,
                )
            } else {
                let e = z.exp();
                ((e - 1.0) / z, (e * (z - 1.0) + 1.0) / (z * z))
            };
            weights[j] += base * (m0 - m1);
            weights[j + 1] += base * m1;
        }
        Ok(weights)
    }
}

/// Exponent, integrability index and quadrature grid of a Besov norm
/// `‖·‖_{−α;p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesovParams {
    alpha: f64,
    p: u32,
    s_grid: SGrid,
}

impl BesovParams {
    pub fn new(alpha: f64, p: u32, s_grid: SGrid) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if p < 1 {
            return Err(Error::InvalidParameter("p must be a positive integer".into()));
        }
        Ok(Self { alpha, p, s_grid })
    }

    /// Parameters with the default s-grid of `grid`.
    pub fn for_grid(grid: &TorusGrid, alpha: f64, p: u32) -> Result<Self> {
        Self::new(alpha, p, SGrid::for_grid(grid))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn s_grid(&self) -> &SGrid {
        &self.s_grid
    }

    /// Same `p` and grid with a different exponent.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.p, self.s_grid.clone())
    }

    /// Exponent `α − d/p` of the functional `φ_{−α+d/p;p}`.
    pub fn shifted_alpha(&self, dim: usize) -> f64 {
        self.alpha - dim as f64 / self.p as f64
    }

    fn weights(&self, alpha: f64) -> Result<Vec<f64>> {
        self.s_grid.weights(alpha * self.p as f64 / 2.0)
    }
}

/// Signed value of one of the `φ` functionals.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PhiValue(pub f64);

impl PhiValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Both sides of one of the norm-decoupling inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl LemmaGap {
    /// `lhs ≤ rhs + 1e−9·(1 + |rhs|)`.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-9 * (1.0 + self.rhs.abs())
    }
}

/// Pieces of the bound on `|Φ(f) − Φ(g)|`, evaluated directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectBounds {
    /// `|Φ(f) − Φ(g)|`.
    pub lhs: f64,
    /// `2^{p−1} (‖f‖^p + ‖g‖^p)`.
    pub crude: f64,
    /// `2^{p−1} p ‖f−g‖ ‖max(|f_s|, |g_s|)‖^{p−1}`.
    pub lipschitz: f64,
    /// `C(p) (‖f−g‖ ∧ 1) max{1, ‖f‖^p + ‖g‖^p}`.
    pub combined: f64,
}

/// Calls `visit(j, f_{s_j})` for every node of `s_grid`.
pub(crate) fn scan_smoothed(field: &Field, s_grid: &SGrid, mut visit: impl FnMut(usize, &[f64])) {
    let grid = field.grid();
    let mu: Vec<f64> = (0..grid.len()).map(|idx| grid.eigenvalue(idx)).collect();
    let spectrum = field.spectrum();
    let mut fft = Fft2::new(grid.points());
    let mut work = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut values = vec![0.0; grid.len()];
    for (j, &s) in s_grid.nodes().iter().enumerate() {
        for ((w, c), m) in work.iter_mut().zip(spectrum).zip(&mu) {
            *w = c * (-s * m).exp();
        }
        fft.inverse(&mut work);
        for (v, w) in values.iter_mut().zip(&work) {
            *v = w.re;
        }
        visit(j, &values);
    }
}

/// Calls `visit(j, f_{s_j}, g_{s_j})` for every node of `s_grid`.
pub(crate) fn scan_smoothed_pair(
    f: &Field,
    g: &Field,
    s_grid: &SGrid,
    mut visit: impl FnMut(usize, &[f64], &[f64]),
) -> Result<()> {
    let grid = f.grid();
    grid.check_same(g.grid())?;
    let mu: Vec<f64> = (0..grid.len()).map(|idx| grid.eigenvalue(idx)).collect();
    let (fs, gs) = (f.spectrum(), g.spectrum());
    let mut fft = Fft2::new(grid.points());
    let mut work = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut a = vec![0.0; grid.len()];
    let mut b = vec![0.0; grid.len()];
    for (j, &s) in s_grid.nodes().iter().enumerate() {
        let damping: Vec<f64> = mu.iter().map(|m| (-s * m).exp()).collect();
        for (out, spectrum) in [(&mut a, fs), (&mut b, gs)] {
            for ((w, c), d) in work.iter_mut().zip(spectrum).zip(&damping) {
                *w = c * d;
            }
            fft.inverse(&mut work);
            for (v, w) in out.iter_mut().zip(&work) {
                *v = w.re;
            }
        }
        visit(j, &a, &b);
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")))
    }
}

/// `max_j s_j^{α/2} ‖f_{s_j}‖_∞`, a lower bound for the supremum over
/// `s ∈ (0, 1]` that increases under grid refinement.
pub fn besov_norm_sup(f: &Field, alpha: f64, s_grid: &SGrid) -> Result<f64> {
    check_alpha(alpha)?;
    let mut best = 0.0_f64;
    scan_smoothed(f, s_grid, |j, values| {
        let s = s_grid.nodes()[j];
        best = best.max(s.powf(alpha / 2.0) * lp_norm_of(values, LpIndex::Infinity, 1.0));
    });
    Ok(best)
}

/// `(∫₀¹ s^{αp/2} ‖f_s‖_p^p ds/s)^{1/p}` by the quadrature of [`SGrid::weights`].
pub fn besov_norm_p(f: &Field, params: &BesovParams) -> f64 {
    besov_norm_p_pow(f, params).powf(1.0 / params.p as f64)
}

fn besov_norm_p_pow(f: &Field, params: &BesovParams) -> f64 {
    let weights = params.weights(params.alpha).expect("validated alpha");
    let cell = f.grid().cell_volume();
    let p = params.p;
    let mut total = 0.0;
    scan_smoothed(f, &params.s_grid, |j, values| {
        total += weights[j] * pow_sum(values, p) * cell;
    });
    total
}

fn pow_sum(values: &[f64], p: u32) -> f64 {
    match p {
        1 => values.iter().map(|v| v.abs()).sum(),
        2 => values.iter().map(|v| v * v).sum(),
        _ => values.iter().map(|v| v.abs().powi(p as i32)).sum(),
    }
}

fn signed_pow_sum(values: &[f64], p: u32) -> f64 {
    values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else {
                v.signum() * v.abs().powi(p as i32)
            }
        })
        .sum()
}

fn two_pow(p: u32) -> f64 {
    2f64.powi(p as i32 - 1)
}

/// `2^{p−1} Σ sgn(f) |f|^p h^d`, with `sgn(0) = 0`.
pub fn phi_p(f: &Field, p: u32) -> Result<PhiValue> {
    if p < 1 {
        return Err(Error::InvalidParameter("p must be a positive integer".into()));
    }
    Ok(PhiValue(two_pow(p) * signed_pow_sum(f.values(), p) * f.grid().cell_volume()))
}

/// `∫₀¹ s^{κp/2} φ_p(f_s) ds/s` for an exponent `κ > 0`.
pub fn phi_weighted(f: &Field, kappa: f64, p: u32, s_grid: &SGrid) -> Result<PhiValue> {
    check_alpha(kappa)?;
    if p < 1 {
        return Err(Error::InvalidParameter("p must be a positive integer".into()));
    }
    let weights = s_grid.weights(kappa * p as f64 / 2.0)?;
    let scale = two_pow(p) * f.grid().cell_volume();
    let mut total = 0.0;
    scan_smoothed(f, s_grid, |j, values| {
        total += weights[j] * signed_pow_sum(values, p);
    });
    Ok(PhiValue(scale * total))
}

/// `φ_{−α+d/p;p}(f) = ∫₀¹ s^{(α−d/p)p/2} φ_p(f_s) ds/s`; requires `α > d/p`.
pub fn phi_besov(f: &Field, params: &BesovParams) -> Result<PhiValue> {
    let kappa = params.shifted_alpha(f.grid().dim());
    if kappa <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha = {} must exceed d/p = {}",
            params.alpha,
            f.grid().dim() as f64 / params.p as f64
        )));
    }
    phi_weighted(f, kappa, params.p, &params.s_grid)
}

/// `φ_{−α+d/p;p}(f) − φ_{−α+d/p;p}(g)` evaluated from the smoothings of `f`
/// and of `f − g`, so that no cancellation occurs when `f` and `g` are
/// close. For `a − b = δ` of equal sign the integrand difference is
/// `δ Σ_{k<p} |a|^k |b|^{p−1−k}`; for opposite signs it is
/// `sgn(a)(|a|^p + |b|^p)`.
pub fn phi_besov_difference(f: &Field, g: &Field, params: &BesovParams) -> Result<PhiValue> {
    let kappa = params.shifted_alpha(f.grid().dim());
    if kappa <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha = {} must exceed d/p = {}",
            params.alpha,
            f.grid().dim() as f64 / params.p as f64
        )));
    }
    let diff = f.sub(g)?;
    let weights = params.s_grid.weights(kappa * params.p as f64 / 2.0)?;
    let p = params.p;
    let mut total = 0.0;
    scan_smoothed_pair(f, &diff, &params.s_grid, |j, fs, ds| {
        let mut sum = 0.0;
        for (&a, &d) in fs.iter().zip(ds) {
            sum += signed_power_difference(a, a - d, d, p);
        }
        total += weights[j] * sum;
    })?;
    Ok(PhiValue(two_pow(p) * f.grid().cell_volume() * total))
}

fn signed_power_difference(a: f64, b: f64, delta: f64, p: u32) -> f64 {
    if (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0) {
        return a.signum() * (a.abs().powi(p as i32) + b.abs().powi(p as i32));
    }
    let (x, y) = (a.abs(), b.abs());
    let mut sum = 0.0;
    let mut xk = 1.0;
    for k in 0..p {
        sum += xk * y.powi((p - 1 - k) as i32);
        xk *= x;
    }
    delta * sum
}

struct PairSums {
    diff: f64,
    /// `Φ(f) − Φ(g)`, accumulated pointwise without cancellation.
    phi_diff: f64,
    norm_f: f64,
    norm_g: f64,
    envelope: f64,
}

fn pair_sums(f: &Field, g: &Field, params: &BesovParams) -> Result<PairSums> {
    let weights = params.weights(params.alpha)?;
    let p = params.p;
    let cell = f.grid().cell_volume();
    let mut sums = PairSums {
        diff: 0.0,
        phi_diff: 0.0,
        norm_f: 0.0,
        norm_g: 0.0,
        envelope: 0.0,
    };
    scan_smoothed_pair(f, g, &params.s_grid, |j, fs, gs| {
        let w = weights[j] * cell;
        let mut diff = 0.0;
        let mut envelope = 0.0;
        let mut phi_diff = 0.0;
        for (&a, &b) in fs.iter().zip(gs) {
            diff += (a - b).abs().powi(p as i32);
            envelope += a.abs().max(b.abs()).powi(p as i32);
            phi_diff += signed_power_difference(a, b, a - b, p);
        }
        sums.diff += w * diff;
        sums.envelope += w * envelope;
        sums.phi_diff += w * phi_diff;
        sums.norm_f += w * pow_sum(fs, p);
        sums.norm_g += w * pow_sum(gs, p);
    })?;
    sums.phi_diff *= two_pow(p);
    Ok(sums)
}

/// `(‖f−g‖_{−α;p}^p, Φ(f) − Φ(g))` with `Φ(h) = ∫₀¹ s^{αp/2} φ_p(h_s) ds/s`,
/// both evaluated with the same quadrature. Requires `g ⪯ f` on the grid.
pub fn lemma_a1_gap(f: &Field, g: &Field, params: &BesovParams) -> Result<LemmaGap> {
    let gap = g.order_gap(f)?;
    if gap < 0.0 {
        return Err(Error::Precondition(format!(
            "lower field exceeds upper field by {:e}",
            -gap
        )));
    }
    let sums = pair_sums(f, g, params)?;
    Ok(LemmaGap {
        lhs: sums.diff,
        rhs: sums.phi_diff,
    })
}

/// The explicit constant `C(p) = 2^{p−1} p` in the bound on `|Φ(f) − Φ(g)|`.
pub fn lemma_a2_constant(p: u32) -> f64 {
    two_pow(p) * p as f64
}

/// `(|Φ(f) − Φ(g)|, C(p) (‖f−g‖_{−α;p} ∧ 1) max{1, ‖f‖^p + ‖g‖^p})`.
pub fn lemma_a2_gap(f: &Field, g: &Field, params: &BesovParams) -> Result<LemmaGap> {
    let b = lemma_a2_bounds(f, g, params)?;
    Ok(LemmaGap {
        lhs: b.lhs,
        rhs: b.combined,
    })
}

/// Evaluates the two intermediate bounds directly alongside the combined
/// one, so that the constant `C(p)` can be checked against them.
pub fn lemma_a2_bounds(f: &Field, g: &Field, params: &BesovParams) -> Result<DirectBounds> {
    let sums = pair_sums(f, g, params)?;
    let p = params.p;
    let inv_p = 1.0 / p as f64;
    let diff_norm = sums.diff.powf(inv_p);
    let envelope_norm = sums.envelope.powf(inv_p);
    let lhs = sums.phi_diff.abs();
    Ok(DirectBounds {
        lhs,
        crude: two_pow(p) * (sums.norm_f + sums.norm_g),
        lipschitz: lemma_a2_constant(p) * diff_norm * envelope_norm.powi(p as i32 - 1),
        combined: lemma_a2_constant(p) * diff_norm.min(1.0) * (sums.norm_f + sums.norm_g).max(1.0),
    })
}

/// Bound `C₁` with `‖f‖_{−α;p} ≤ C₁ ‖f‖_{−α}` for every field on `grid`,
/// from `‖f_s‖_p^p ≤ L^d ‖f_s‖_∞^p` and `s^{α/2} ‖f_s‖_∞ ≤ ‖f‖_{−α}` at each
/// node.
pub fn sup_to_p_constant(grid: &TorusGrid, params: &BesovParams) -> f64 {
    let w = params.alpha * params.p as f64 / 2.0;
    let weights = params.weights(params.alpha).expect("validated alpha");
    let sum: f64 = weights
        .iter()
        .zip(params.s_grid.nodes())
        .map(|(wt, s)| wt * s.powf(-w))
        .sum();
    (grid.volume() * sum).powf(1.0 / params.p as f64)
}

/// Bound `C₂` with `‖f‖_{−α} ≤ C₂ ‖f‖_{−α+d/p;p}` for every field on `grid`,
/// both sides taken over the nodes of the parameter grid.
///
/// At node `j`, `‖f_{s_j}‖_∞ ≤ h^{−d/p} ‖f_{s_j}‖_p` on the lattice and
/// `W_j ‖f_{s_j}‖_p^p` is one term of the quadrature sum, so
/// `C₂ = h^{−d/p} max_j s_j^{α/2} W_j^{−1/p}` with the weights of exponent
/// `(α − d/p) p / 2`. Requires `α > d/p`.
pub fn p_to_sup_constant(grid: &TorusGrid, params: &BesovParams) -> Result<f64> {
    let d = grid.dim() as f64;
    let p = params.p as f64;
    let kappa = params.shifted_alpha(grid.dim());
    if kappa <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha = {} must exceed d/p = {}",
            params.alpha,
            d / p
        )));
    }
    let weights = params.s_grid.weights(kappa * p / 2.0)?;
    let worst = weights
        .iter()
        .zip(params.s_grid.nodes())
        .map(|(w, s)| s.powf(params.alpha / 2.0) * w.powf(-1.0 / p))
        .fold(0.0, f64::max);
    Ok(grid.spacing().powf(-d / p) * worst)
}
