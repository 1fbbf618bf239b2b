//! Closed-form quantities and bounds for the hierarchical and long-range
//! models. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::normal_expectation;

/// `b_N = 2^{(2-α)N}`.
pub fn level_amplitude(levels: u32, alpha: f64) -> f64 {
    ((2.0 - alpha) * f64::from(levels)).exp2()
}

/// `x_p = β²·b_p/2^{2p}`.
pub fn level_variance(p: u32, beta: f64, alpha: f64) -> f64 {
    beta * beta * level_amplitude(p, alpha) / (2.0 * f64::from(p)).exp2()
}

fn require_alpha_above_one(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be > 1, got {alpha}")))
    }
}

/// `R_N = 2(1 - 2^{(1-α)N})/(2^α - 2)`.
pub fn concentration_r(levels: u32, alpha: f64) -> Result<f64> {
    require_alpha_above_one(alpha)?;
    Ok(2.0 * (1.0 - ((1.0 - alpha) * f64::from(levels)).exp2()) / (alpha.exp2() - 2.0))
}

/// `R = lim R_N = 2/(2^α - 2)`.
pub fn concentration_limit(alpha: f64) -> Result<f64> {
    require_alpha_above_one(alpha)?;
    Ok(2.0 / (alpha.exp2() - 2.0))
}

/// Least integer strictly above `√(β² b_N)`.
pub fn num_intervals(levels: u32, beta: f64, alpha: f64) -> Result<usize> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("interval count needs beta > 0, got {beta}")));
    }
    Ok(interval_count_f64(levels, beta, alpha) as usize)
}

/// Interval count as a float, exact while below `2^53` and never saturating.
fn interval_count_f64(levels: u32, beta: f64, alpha: f64) -> f64 {
    (beta * beta * level_amplitude(levels, alpha)).sqrt().floor() + 1.0
}

/// Lipschitz constant `C_N = β·2^{N/2}·R_N^{1/2}` of the log restricted-trace ratio.
pub fn lipschitz_constant(levels: u32, beta: f64, alpha: f64) -> Result<f64> {
    Ok(beta * (f64::from(levels) / 2.0).exp2() * concentration_r(levels, alpha)?.sqrt())
}

/// `log(1 + √(2πe))`
pub fn concentration_log_factor() -> f64 {
    (1.0 + (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()).ln()
}

fn check_recurrence_args(levels: u32, beta: f64, alpha: f64, min_levels: u32) -> Result<()> {
    if levels < min_levels {
        return Err(Error::InvalidArgument(format!("N must be >= {min_levels}, got {levels}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
    }
    require_alpha_above_one(alpha)
}

/// Upper bound on `E[max_k log(Z^{(1)}_k / Z^{(2)}_k)]`:
/// `C_N·log(r_N·(1 + √(2πe)))`.
pub fn lemma7_rhs(levels: u32, beta: f64, alpha: f64) -> Result<f64> {
    check_recurrence_args(levels, beta, alpha, 1)?;
    let c = lipschitz_constant(levels, beta, alpha)?;
    num_intervals(levels, beta, alpha)?;
    let r = interval_count_f64(levels, beta, alpha);
    Ok(c * (r.ln() + concentration_log_factor()))
}

/// One-step loss `Δ_N` in `f_N(N) ≥ f_{N-1}(N-1) - Δ_N`.
pub fn lemma8_correction(levels: u32, beta: f64, alpha: f64) -> Result<f64> {
    check_recurrence_args(levels, beta, alpha, 2)?;
    let c = lipschitz_constant(levels, beta, alpha)?;
    let log_r = interval_count_f64(levels, beta, alpha).ln();
    let scale = 2.0 / (beta * beta * level_amplitude(levels, alpha));
    Ok(scale * (1.0 + (1.0 + c) * log_r + c * concentration_log_factor()))
}

/// Per-level quantities used by the recurrence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelQuantities {
    pub levels: u32,
    pub alpha: f64,
    pub beta: f64,
    pub b: f64,
    pub x: f64,
    pub r_concentration: f64,
    pub intervals: usize,
    pub lipschitz: f64,
    /// `Δ_N`, absent for `N = 1`.
    pub correction: Option<f64>,
}

pub fn level_quantities(levels: u32, alpha: f64, beta: f64) -> Result<LevelQuantities> {
    check_recurrence_args(levels, beta, alpha, 1)?;
    Ok(LevelQuantities {
        levels,
        alpha,
        beta,
        b: level_amplitude(levels, alpha),
        x: level_variance(levels, beta, alpha),
        r_concentration: concentration_r(levels, alpha)?,
        intervals: num_intervals(levels, beta, alpha)?,
        lipschitz: lipschitz_constant(levels, beta, alpha)?,
        correction: if levels >= 2 { Some(lemma8_correction(levels, beta, alpha)?) } else { None },
    })
}

/// `E[⟨σ_1σ_2⟩_1]` for the one-level model: `E[tanh g]` with `g ~ N(m, m)`,
/// `m = β²·2^{1-α}`.
pub fn f1_pair_expectation(beta: f64, alpha: f64) -> f64 {
    let m = beta * beta * (1.0 - alpha).exp2();
    if m == 0.0 {
        return 0.0;
    }
    if !m.is_finite() {
        return 1.0;
    }
    let s = m.sqrt();
    normal_expectation(|z| (m + s * z).tanh(), 1e-13).value
}

/// Validity of the hierarchical lower bound at `(α, β)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theorem1Validity {
    pub alpha_in_range: bool,
    pub beta_above_threshold: bool,
}

impl Theorem1Validity {
    pub fn holds(&self) -> bool {
        self.alpha_in_range && self.beta_above_threshold
    }
}

/// Terms of the explicit lower bound on `m²` for the hierarchical model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub alpha: f64,
    pub beta: f64,
    pub base: f64,
    /// The four subtracted terms in display order.
    pub terms: [f64; 4],
    pub total: f64,
    pub validity: Theorem1Validity,
}

/// `2^{(α-2)/2}`, the smallest β covered by the bound.
pub fn thm1_beta_threshold(alpha: f64) -> f64 {
    ((alpha - 2.0) / 2.0).exp2()
}

impl Theorem1Report {
    /// Evaluate every term regardless of validity.
    pub fn evaluate(beta: f64, alpha: f64) -> Self {
        let a = alpha;
        let ln2 = std::f64::consts::LN_2;
        let b2 = beta * beta;
        let pow2a = a.exp2();
        let r_sqrt = (2.0 / (pow2a - 2.0)).sqrt();
        let base = 0.5 + 0.5 * f1_pair_expectation(beta, alpha);
        let t1 = (2.0 * a - 1.0).exp2() / (b2 * (4.0 - pow2a)) * (1.0 + beta.ln());
        let t2 = 4f64.powf(a - 1.0) * (pow2a * (a - 4.0) - 8.0 * (a - 3.0)) * ln2
            / (b2 * (4.0 - pow2a).powi(2));
        let t3 = (2.0 * a - 1.5).exp2() * (pow2a * (a - 4.0) - 2.5f64.exp2() * (a - 3.0)) * r_sqrt * ln2
            / (beta * (1.5f64.exp2() - pow2a).powi(2));
        let c = (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt();
        let t4 = 4f64.powf(a) * r_sqrt * (beta + beta * c).ln() / (beta * (4.0 - (a + 0.5).exp2()));
        let terms = [t1, t2, t3, t4];
        let total = base - terms.iter().sum::<f64>();
        let validity = Theorem1Validity {
            alpha_in_range: a > 1.0 && a < 1.5,
            beta_above_threshold: beta >= thm1_beta_threshold(a),
        };
        Self { alpha, beta, base, terms, total, validity }
    }
}

/// Explicit lower bound on `m²`; errors outside `1 < α < 3/2`, `β ≥ 2^{(α-2)/2}`.
pub fn thm1_lower_bound(beta: f64, alpha: f64) -> Result<Theorem1Report> {
    let report = Theorem1Report::evaluate(beta, alpha);
    if report.validity.holds() {
        Ok(report)
    } else {
        Err(Error::OutsideValidity(format!(
            "alpha = {alpha} (need 1 < alpha < 1.5), beta = {beta} (need >= {:.6})",
            thm1_beta_threshold(alpha)
        )))
    }
}

/// Bracketed value of `ζ(α) = Σ_{i≥1} i^{-α}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaEstimate {
    pub lower: f64,
    pub upper: f64,
    pub terms: u64,
}

impl ZetaEstimate {
    pub fn value(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Partial sum plus a certified tail bracket of width at most `tol`.
///
/// For the convex decreasing `f(x) = x^{-α}` the tail `Σ_{i>n} f(i)` lies
/// between the trapezoid bound `∫_{n+1}^∞ f + f(n+1)/2` and the midpoint bound
/// `∫_{n+1/2}^∞ f`.
pub fn zeta_partial(alpha: f64, tol: f64) -> Result<ZetaEstimate> {
    require_alpha_above_one(alpha)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let tail_integral = |x: f64| x.powf(1.0 - alpha) / (alpha - 1.0);
    let bracket = |n: u64| {
        let nf = n as f64;
        let lo = tail_integral(nf + 1.0) + 0.5 * (nf + 1.0).powf(-alpha);
        let hi = tail_integral(nf + 0.5);
        (lo, hi)
    };
    let mut n: u64 = 16;
    while {
        let (lo, hi) = bracket(n);
        hi - lo > tol
    } {
        n = n.checked_mul(2).ok_or_else(|| Error::InvalidArgument("tolerance too small".into()))?;
        if n > 1 << 34 {
            return Err(Error::InvalidArgument(format!("cannot reach tolerance {tol}")));
        }
    }
    // Sum smallest terms first.
    let mut s = crate::stats::NeumaierSum::default();
    for i in (1..=n).rev() {
        s.add((i as f64).powf(-alpha));
    }
    let partial = s.value();
    let (lo, hi) = bracket(n);
    Ok(ZetaEstimate { lower: partial + lo, upper: partial + hi, terms: n })
}

/// Tolerance used for `M_0` inside the high-temperature evaluators.
pub const ZETA_TOL: f64 = 1e-12;

/// `β*(α) = (32 ζ(α))^{-1/2}`.
pub fn thm3_threshold(alpha: f64) -> Result<f64> {
    Ok((32.0 * zeta_partial(alpha, ZETA_TOL)?.value()).sqrt().recip())
}

/// `B(β, α) = 16β²M_0/(1 - 32β²M_0)`, the bound on `max_j Σ_{i≠j} E[⟨σ_iσ_j⟩]`.
pub fn thm3_correlation_bound(beta: f64, alpha: f64) -> Result<f64> {
    let m0 = zeta_partial(alpha, ZETA_TOL)?.value();
    let g = 32.0 * beta * beta * m0;
    if g >= 1.0 {
        return Err(Error::OutsideValidity(format!(
            "32·β²·M_0 = {g:.6} >= 1 at beta = {beta}, alpha = {alpha}"
        )));
    }
    Ok(16.0 * beta * beta * m0 / (1.0 - g))
}

/// Level at which sites `i < j` (0-based, `j < 2^N`) first share a block.
pub fn merge_level(i: usize, j: usize, levels: u32) -> Result<u32> {
    let n = 1usize.checked_shl(levels).unwrap_or(0);
    if i >= j || j >= n {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= i < j < 2^N, got i = {i}, j = {j}, N = {levels}"
        )));
    }
    Ok(usize::BITS - (i ^ j).leading_zeros())
}

/// `R_N(p) = 2 Σ_{q=p}^{N} b_q/2^{2q}`.
pub fn pair_variance_sum(levels: u32, p: u32, alpha: f64) -> Result<f64> {
    if p < 1 || p > levels {
        return Err(Error::InvalidArgument(format!("need 1 <= p <= N, got p = {p}, N = {levels}")));
    }
    Ok(2.0 * (p..=levels).map(|q| level_variance(q, 1.0, alpha)).sum::<f64>())
}

/// Aggregated hierarchical pair variance `β²R_N(p)` and the long-range variance
/// `4β²/d^α` it is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVarianceComparison {
    pub hierarchical: f64,
    pub long_range: f64,
}

pub fn effective_pair_variance(
    levels: u32,
    p: u32,
    alpha: f64,
    beta: f64,
    distance: usize,
) -> Result<PairVarianceComparison> {
    let b2 = beta * beta;
    Ok(PairVarianceComparison {
        hierarchical: b2 * pair_variance_sum(levels, p, alpha)?,
        long_range: 4.0 * b2 / (distance as f64).powf(alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn amplitude_examples() {
        for n in 1..10 {
            assert_eq!(level_amplitude(n, 2.0), 1.0);
        }
        assert_eq!(level_amplitude(3, 1.0), 8.0);
        assert_relative_eq!(level_amplitude(2, 1.25), 2.828_427_124_746_19, max_relative = 1e-14);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(level_variance(3, 0.0, 1.3), 0.0);
        assert_relative_eq!(level_variance(1, 1.0, 1.25), 0.420_448_207_626_856_6, max_relative = 1e-14);
        assert_eq!(level_variance(2, 2.0, 1.3), 4.0 * level_variance(2, 1.0, 1.3));
    }

    #[test]
    fn concentration_examples() {
        assert_eq!(concentration_limit(2.0).unwrap(), 1.0);
        assert_relative_eq!(concentration_r(1, 2.0).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(concentration_limit(1.5).unwrap(), 2.414_213_562_373_095, max_relative = 1e-14);
        assert!(concentration_r(3, 1.0).is_err());
        // partial sums Σ_{p≤N} 2^{-p} b_p
        for n in 1..12 {
            let direct: f64 = (1..=n).map(|p| level_amplitude(p, 1.3) / f64::from(p).exp2()).sum();
            assert_relative_eq!(concentration_r(n, 1.3).unwrap(), direct, max_relative = 1e-13);
        }
        let r: Vec<f64> = (1..30).map(|n| concentration_r(n, 1.2).unwrap()).collect();
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!(r.iter().all(|v| *v < concentration_limit(1.2).unwrap()));
    }

    #[test]
    fn interval_examples() {
        assert_eq!(num_intervals(5, 1.0, 2.0).unwrap(), 2);
        assert_eq!(num_intervals(2, 1.0, 1.25).unwrap(), 2);
        assert_eq!(num_intervals(2, 10.0, 1.25).unwrap(), 17);
        assert!(num_intervals(2, 0.0, 1.25).is_err());
        for &(n, b, a) in &[(2, 1.0, 1.25), (3, 4.0, 1.4), (7, 0.3, 1.1)] {
            let r = num_intervals(n, b, a).unwrap() as f64;
            let root = (b * b * level_amplitude(n, a)).sqrt();
            assert!(root < r && r <= 1.0 + root);
        }
    }

    #[test]
    fn lemma8_example() {
        assert_abs_diff_eq!(lemma8_correction(2, 4.0, 1.25).unwrap(), 1.706, epsilon = 5e-4);
        assert!(lemma8_correction(1, 4.0, 1.25).is_err());
        assert!(lemma8_correction(2, 0.0, 1.25).is_err());
    }

    #[test]
    fn lemma8_assembly_is_consistent() {
        for &(n, b, a) in &[(2, 4.0, 1.25), (3, 1.0, 1.1), (6, 9.0, 1.45)] {
            let d = lemma8_correction(n, b, a).unwrap();
            let c = lipschitz_constant(n, b, a).unwrap();
            let log_r = (num_intervals(n, b, a).unwrap() as f64).ln();
            let residual = d * b * b * level_amplitude(n, a) / 2.0
                - 1.0
                - (1.0 + c) * log_r
                - c * concentration_log_factor();
            assert_abs_diff_eq!(residual, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lemma8_decays_in_beta() {
        let d: Vec<f64> = [1.0, 10.0, 100.0, 1e4, 1e6]
            .iter()
            .map(|b| lemma8_correction(3, *b, 1.25).unwrap())
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        assert!(d[4] < 1e-3);
    }

    #[test]
    fn lemma8_series_converges_only_below_three_halves() {
        let partial = |alpha: f64, upto: u32| -> f64 {
            (2..=upto).map(|n| lemma8_correction(n, 4.0, alpha).unwrap()).sum()
        };
        let a = partial(1.4, 200);
        let b = partial(1.4, 400);
        assert!((b - a) / b < 1e-4, "alpha 1.4 should stabilise: {a} vs {b}");
        let c = partial(1.6, 200);
        let d = partial(1.6, 400);
        assert!(d > 10.0 * c, "alpha 1.6 should diverge: {c} vs {d}");
    }

    #[test]
    fn lemma7_examples() {
        // 2·R_2^{1/2}·log(2·(1 + √(2πe))) with R_2 = 2(1 - 2^{-1/2})/(2^{5/4} - 2)
        let r2: f64 = 2.0 * (1.0 - 0.5f64.sqrt()) / (1.25f64.exp2() - 2.0);
        let oracle = 2.0 * r2.sqrt() * (2.0 * (1.0 + (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt())).ln();
        assert_abs_diff_eq!(lemma7_rhs(2, 1.0, 1.25).unwrap(), oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(lemma7_rhs(2, 1.0, 1.25).unwrap(), 5.7949, epsilon = 1e-4);
        let one = lemma7_rhs(3, 2.0, 1.3).unwrap();
        let two = lemma7_rhs(3, 4.0, 1.3).unwrap();
        assert!(two > 2.0 * one);
        // with a single interval the bound is C·log(1 + √(2πe))
        let c = lipschitz_constant(2, 1.0, 1.25).unwrap();
        assert_abs_diff_eq!(concentration_log_factor(), 1.635_638, epsilon = 1e-6);
        assert!(lemma7_rhs(2, 1.0, 1.25).unwrap() > c * concentration_log_factor());
    }

    #[test]
    fn f1_limits() {
        assert_eq!(f1_pair_expectation(0.0, 1.25), 0.0);
        assert_abs_diff_eq!(f1_pair_expectation(1e3, 1.25), 1.0, epsilon = 1e-12);
        let v: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|b| f1_pair_expectation(*b, 1.25))
            .collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn thm1_validity() {
        assert!(thm1_lower_bound(10.0, 1.6).is_err());
        assert!(thm1_lower_bound(0.5, 1.25).is_err());
        let r = Theorem1Report::evaluate(0.5, 1.25);
        assert!(!r.validity.beta_above_threshold && r.validity.alpha_in_range);
        let ok = thm1_lower_bound(5.0, 1.25).unwrap();
        assert_abs_diff_eq!(ok.total, ok.base - ok.terms.iter().sum::<f64>(), epsilon = 1e-12);
        assert!(ok.total <= 1.0);
    }

    #[test]
    fn zeta_brackets() {
        let z2 = zeta_partial(2.0, 1e-9).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 6.0;
        assert!(z2.lower <= exact && exact <= z2.upper);
        assert!(z2.width() <= 1e-9);
        assert!(zeta_partial(1.0, 1e-6).is_err());
        let tight = zeta_partial(1.5, 1e-8).unwrap();
        assert!(tight.width() <= 1e-8);
        assert_abs_diff_eq!(tight.value(), 2.612_375_348_685_488, epsilon = 1e-8);
    }

    #[test]
    fn thm3_examples() {
        assert_abs_diff_eq!(thm3_threshold(2.0).unwrap(), 0.13783, epsilon = 1e-5);
        assert_abs_diff_eq!(thm3_threshold(1.5).unwrap(), 0.10937, epsilon = 1e-5);
        assert_abs_diff_eq!(thm3_correlation_bound(0.06, 2.0).unwrap(), 0.1169, epsilon = 1e-4);
        assert!(thm3_correlation_bound(0.2, 2.0).is_err());
    }

    #[test]
    fn merge_levels() {
        for n in 1..6 {
            assert_eq!(merge_level(0, 1, n).unwrap(), 1);
        }
        assert_eq!(merge_level(1, 2, 3).unwrap(), 2);
        assert_eq!(merge_level(3, 4, 3).unwrap(), 3);
        assert!(merge_level(2, 2, 3).is_err());
        assert!(merge_level(0, 8, 3).is_err());
        for i in 0..16usize {
            for j in i + 1..16 {
                let p = merge_level(i, j, 4).unwrap();
                assert!(j - i < 1 << p);
                assert_eq!(i >> p, j >> p);
                assert_ne!(i >> (p - 1), j >> (p - 1));
            }
        }
    }

    #[test]
    fn pair_variance_examples() {
        let v = effective_pair_variance(3, 1, 1.25, 1.0, 1).unwrap();
        assert_abs_diff_eq!(v.hierarchical, 1.343_101, epsilon = 1e-6);
        assert!(v.hierarchical < v.long_range);
        assert_relative_eq!(
            pair_variance_sum(5, 5, 1.3).unwrap(),
            2.0 * level_amplitude(5, 1.3) / 1024.0,
            max_relative = 1e-14
        );
        for n in 1..=30u32 {
            for p in 1..=n {
                assert!(pair_variance_sum(n, p, 1.2).unwrap() <= (2.0 - 1.2 * f64::from(p)).exp2());
            }
        }
    }
}
