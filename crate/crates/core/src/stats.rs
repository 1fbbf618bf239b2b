//! Summation and error-bar utilities.

use serde::{Deserialize, Serialize};

/// Compensated (Neumaier) running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Pairwise summation in index order. The result depends only on the order of
/// `values`, never on how they were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut s = NeumaierSum::default();
        for v in values {
            s.add(*v);
        }
        return s.value();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean and standard error of independent samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub se: f64,
    pub n_samples: usize,
}

impl MeanEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, n_samples: 0 };
        }
        let mean = pairwise_sum(values) / n as f64;
        let se = if n > 1 {
            let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n_samples: n }
    }

    /// Difference of two independent estimates.
    pub fn minus(&self, other: &Self) -> Self {
        Self {
            mean: self.mean - other.mean,
            se: self.se.hypot(other.se),
            n_samples: self.n_samples.min(other.n_samples),
        }
    }

    /// Linear combination `Σ c_k·est_k` of independent estimates.
    pub fn combine(terms: &[(f64, Self)]) -> Self {
        let mean = terms.iter().map(|(c, e)| c * e.mean).sum();
        let se = terms.iter().map(|(c, e)| (c * e.se).powi(2)).sum::<f64>().sqrt();
        let n_samples = terms.iter().map(|(_, e)| e.n_samples).min().unwrap_or(0);
        Self { mean, se, n_samples }
    }
}

/// Result of a blocking (Flyvbjerg-Petersen) analysis of a correlated series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockingResult {
    pub mean: f64,
    pub se: f64,
    pub tau_int: f64,
    pub n_eff: f64,
    /// Whether the blocked error reached a plateau.
    pub plateau: bool,
}

/// Fewest blocks a level may have and still count towards the plateau search.
const MIN_BLOCKS: usize = 32;

/// Blocking analysis: halve the series by pair-averaging until the standard
/// error estimate stops growing within its own uncertainty.
pub fn blocking(series: &[f64]) -> BlockingResult {
    let n = series.len();
    let mean = if n == 0 { f64::NAN } else { pairwise_sum(series) / n as f64 };
    if n < 2 {
        return BlockingResult { mean, se: 0.0, tau_int: 0.5, n_eff: n as f64, plateau: false };
    }
    let mut levels: Vec<(f64, f64)> = Vec::new();
    let mut data = series.to_vec();
    while data.len() >= MIN_BLOCKS.min(n) && data.len() >= 2 {
        let m = data.len();
        let dev: Vec<f64> = data.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&dev) / (m - 1) as f64;
        let se = (var / m as f64).sqrt();
        let err = se / (2.0 * (m - 1) as f64).sqrt();
        levels.push((se, err));
        data = data.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    }
    let naive = levels[0].0;
    if naive == 0.0 {
        return BlockingResult { mean, se: 0.0, tau_int: 0.5, n_eff: n as f64, plateau: true };
    }
    // First level whose estimate is consistent with every later level.
    let mut chosen = None;
    for k in 0..levels.len().saturating_sub(1) {
        let (se_k, _) = levels[k];
        let consistent = levels[k + 1..].iter().all(|&(se_l, err_l)| se_l <= se_k + 2.0 * err_l);
        if consistent {
            chosen = Some(k);
            break;
        }
    }
    let (se, plateau) = match chosen {
        Some(k) => (levels[k].0, true),
        None => (levels.iter().map(|l| l.0).fold(0.0, f64::max), false),
    };
    let tau_int = (0.5 * (se / naive).powi(2)).max(0.5);
    let n_eff = (n as f64 / (2.0 * tau_int)).min(n as f64);
    BlockingResult { mean, se, tau_int, n_eff, plateau }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NormalStream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn neumaier_beats_naive() {
        let mut s = NeumaierSum::default();
        s.add(1.0);
        s.add(1e100);
        s.add(1.0);
        s.add(-1e100);
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn pairwise_is_accurate() {
        let v = vec![0.1; 10_000];
        assert_abs_diff_eq!(pairwise_sum(&v), 1000.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let e = MeanEstimate::from_samples(&[2.5; 100]);
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn blocking_on_white_noise() {
        let mut s = NormalStream::new(3, 0);
        let x: Vec<f64> = (0..1 << 16).map(|_| s.next_normal()).collect();
        let b = blocking(&x);
        assert!(b.plateau);
        assert!((b.tau_int - 0.5).abs() < 0.2, "tau {}", b.tau_int);
        assert!((b.se * (x.len() as f64).sqrt() - 1.0).abs() < 0.15);
    }

    #[test]
    fn blocking_detects_correlation() {
        // AR(1) with φ = 0.9: τ_int = (1 + φ)/(2(1 - φ)) = 9.5
        let mut s = NormalStream::new(4, 0);
        let mut x = Vec::with_capacity(1 << 18);
        let mut v = 0.0;
        for _ in 0..1 << 18 {
            v = 0.9 * v + s.next_normal();
            x.push(v);
        }
        let b = blocking(&x);
        assert!(b.plateau);
        assert!((b.tau_int - 9.5).abs() < 2.5, "tau {}", b.tau_int);
        assert!(b.n_eff < x.len() as f64 / 10.0);
    }
}
