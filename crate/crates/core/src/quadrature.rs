//! Gauss-Hermite quadrature.
//!
//! Nodes are eigenvalues of the Hermite Jacobi matrix (implicit QL), polished by
//! one Newton step on the orthonormal recurrence; weights come from the
//! Christoffel function, evaluated with running rescaling so the outer nodes of
//! large rules neither overflow nor lose their tiny weights to 0/0.

use std::sync::OnceLock;

/// Node counts tried by [`normal_expectation`], in order.
pub const RULE_SIZES: [usize; 5] = [64, 128, 256, 512, 1024];

/// Gauss-Hermite rule for `∫ f(x) e^{-x²} dx`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let mut nodes = symmetric_tridiagonal_eigenvalues(diag, off);
        nodes.sort_by(f64::total_cmp);
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            let (psi_n, psi_prev, _) = scaled_recurrence(*x, n);
            let deriv = (2.0 * n as f64).sqrt() * psi_prev;
            if deriv != 0.0 && deriv.is_finite() {
                *x -= psi_n / deriv;
            }
            let (_, _, log_norm) = scaled_recurrence(*x, n);
            weights.push((-log_norm).exp());
        }
        // symmetrise
        for k in 0..n / 2 {
            let x = 0.5 * (nodes[n - 1 - k] - nodes[k]);
            let w = 0.5 * (weights[k] + weights[n - 1 - k]);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect_standard_normal<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let scale = std::f64::consts::SQRT_2;
        let mut s = crate::stats::NeumaierSum::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            if *w > 0.0 {
                s.add(w * f(scale * x));
            }
        }
        s.value() / std::f64::consts::PI.sqrt()
    }
}

/// Orthonormal Hermite values at `x`: returns `(ψ_n·s, ψ_{n-1}·s, log Σ_{k<n} ψ_k²)`
/// for a common (unknown) scale `s`.
fn scaled_recurrence(x: f64, n: usize) -> (f64, f64, f64) {
    const BIG: f64 = 1e150;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut sum = 0.0;
    let mut log_scale = 0.0;
    for k in 0..n {
        sum += cur * cur;
        let next = (2.0 / (k + 1) as f64).sqrt() * x * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            sum /= BIG * BIG;
            log_scale += BIG.ln();
        }
    }
    (cur, prev, sum.ln() + 2.0 * log_scale)
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit QL with shifts.
fn symmetric_tridiagonal_eigenvalues(mut d: Vec<f64>, off: Vec<f64>) -> Vec<f64> {
    let n = d.len();
    let mut e = off;
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d
}

fn cached_rule(n: usize) -> &'static GaussHermite {
    static RULES: [OnceLock<GaussHermite>; RULE_SIZES.len()] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let k = RULE_SIZES.iter().position(|&s| s == n).expect("unsupported rule size");
    RULES[k].get_or_init(|| GaussHermite::new(n))
}

/// Outcome of an adaptive Gauss-Hermite evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureValue {
    pub value: f64,
    /// Difference between the last two rule sizes.
    pub change: f64,
    pub nodes: usize,
}

/// `E[f(Z)]`, `Z ~ N(0,1)`, doubling the node count from 64 until two
/// consecutive rules agree to `tol` (or the largest rule is reached).
pub fn normal_expectation<F: Fn(f64) -> f64>(f: F, tol: f64) -> QuadratureValue {
    let mut prev = cached_rule(RULE_SIZES[0]).expect_standard_normal(&f);
    let mut last = QuadratureValue { value: prev, change: f64::INFINITY, nodes: RULE_SIZES[0] };
    for &n in &RULE_SIZES[1..] {
        let v = cached_rule(n).expect_standard_normal(&f);
        last = QuadratureValue { value: v, change: (v - prev).abs(), nodes: n };
        if last.change <= tol {
            break;
        }
        prev = v;
    }
    last
}
