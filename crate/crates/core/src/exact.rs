//! Exact Gibbs averages by enumeration of all `2^n` configurations.
//!
//! Configuration index bit `i` set means `σ_i = -1`. Log-weights are produced in
//! Gray-code order with one spin flip per step and an `O(n)` local-field update;
//! they are then normalised with a running maximum so large couplings cannot
//! overflow. Pair correlations for many pairs come from a Walsh-Hadamard
//! transform of the probability vector, whose two-bit coefficients are exactly
//! `⟨σ_i σ_j⟩`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DisorderRealization;
use crate::stats::NeumaierSum;

pub const DEFAULT_CAP: usize = 24;

/// Steps between exact re-evaluations of energy and local fields.
const RESYNC_PERIOD: u64 = 1 << 12;

/// Symmetric pair couplings plus per-site diagonal constants.
///
/// The log-weight of a configuration is
/// `Σ_{i<j} w_ij σ_i σ_j + Σ_i d_i`, where `w_ij` collects the couplings of both
/// orientations `(i, j)` and `(j, i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    w: Vec<f64>,
    diag: Vec<f64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, w: vec![0.0; n * n], diag: vec![0.0; n] }
    }

    pub fn from_realization(r: &DisorderRealization) -> Result<Self> {
        let mut m = Self::zeros(r.n_sites());
        for (k, (law, &c)) in r.laws.laws.iter().zip(&r.couplings).enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFiniteCoupling { index: k, value: c });
            }
            m.add(law.bond.i, law.bond.j, c);
        }
        Ok(m)
    }

    /// Add coupling `c` on the ordered pair `(i, j)`.
    pub fn add(&mut self, i: usize, j: usize, c: f64) {
        if i == j {
            self.diag[i] += c;
        } else {
            self.w[i * self.n + j] += c;
            self.w[j * self.n + i] += c;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal_constant(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Couplings among the sites in `range`, relabelled from 0.
    pub fn sub(&self, range: Range<usize>) -> Self {
        let k = range.len();
        let mut out = Self::zeros(k);
        for (a, i) in range.clone().enumerate() {
            out.diag[a] = self.diag[i];
            for (b, j) in range.clone().enumerate() {
                out.w[a * k + b] = self.w[i * self.n + j];
            }
        }
        out
    }

    /// Largest absolute coupling between `range` and its complement.
    pub fn max_cross_coupling(&self, range: Range<usize>) -> f64 {
        let mut worst = 0.0f64;
        for i in range.clone() {
            for j in (0..self.n).filter(|j| !range.contains(j)) {
                worst = worst.max(self.w[i * self.n + j].abs());
            }
        }
        worst
    }

    /// Log-weight of one configuration, evaluated directly.
    pub fn log_weight(&self, config: u64) -> f64 {
        let s = |i: usize| if config >> i & 1 == 1 { -1.0 } else { 1.0 };
        let mut e = self.diagonal_constant();
        for i in 0..self.n {
            let si = s(i);
            for j in i + 1..self.n {
                e += self.w[i * self.n + j] * si * s(j);
            }
        }
        e
    }

    /// Sum of absolute couplings, diagonal included.
    pub fn abs_sum(&self) -> f64 {
        let mut t: f64 = self.diag.iter().map(|d| d.abs()).sum();
        for i in 0..self.n {
            for j in i + 1..self.n {
                t += self.w[i * self.n + j].abs();
            }
        }
        t
    }
}

fn local_fields(m: &CouplingMatrix, config: u64) -> Vec<f64> {
    (0..m.n)
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .map(|(j, w)| if config >> j & 1 == 1 { -w } else { *w })
                .sum()
        })
        .collect()
}

/// Log-weights of all `2^n` configurations, indexed by configuration.
pub fn log_weights(m: &CouplingMatrix) -> Vec<f64> {
    let n = m.n;
    let total = 1u64 << n;
    let mut out = vec![0.0; total as usize];
    let mut config = 0u64;
    let mut fields = local_fields(m, 0);
    let mut energy = m.log_weight(0);
    out[0] = energy;
    for step in 1..total {
        let flip = step.trailing_zeros() as usize;
        let old = if config >> flip & 1 == 1 { -1.0 } else { 1.0 };
        energy -= 2.0 * old * fields[flip];
        let row = m.row(flip);
        for (h, w) in fields.iter_mut().zip(row) {
            *h -= 2.0 * old * w;
        }
        config ^= 1 << flip;
        if step % RESYNC_PERIOD == 0 {
            energy = m.log_weight(config);
            fields = local_fields(m, config);
        }
        out[config as usize] = energy;
    }
    out
}

/// `(log Σ exp(v), normalised probabilities)` restricted to `keep`.
fn normalise<F: Fn(usize) -> bool>(lw: &[f64], keep: F) -> Option<(f64, Vec<f64>)> {
    let max = lw
        .iter()
        .enumerate()
        .filter(|(c, _)| keep(*c))
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut probs = vec![0.0; lw.len()];
    let mut sum = NeumaierSum::default();
    for (c, v) in lw.iter().enumerate() {
        if keep(c) {
            let e = (v - max).exp();
            probs[c] = e;
            sum.add(e);
        }
    }
    let total = sum.value();
    for p in &mut probs {
        *p /= total;
    }
    Some((max + total.ln(), probs))
}

/// In-place Walsh-Hadamard transform.
fn walsh_hadamard(values: &mut [f64]) {
    let mut h = 1;
    while h < values.len() {
        for start in (0..values.len()).step_by(2 * h) {
            for k in start..start + h {
                let (a, b) = (values[k], values[k + h]);
                values[k] = a + b;
                values[k + h] = a - b;
            }
        }
        h *= 2;
    }
}

#[inline]
fn block_sum(config: u64, start: usize, size: usize) -> i64 {
    let mask = if size >= 64 { u64::MAX } else { ((1u64 << size) - 1) << start };
    size as i64 - 2 * i64::from((config & mask).count_ones())
}

/// Blocks `(p, r)` of size `2^p` that fit inside `n` sites, `r` counted from 1.
pub fn block_layout(n: usize) -> Vec<(u32, usize)> {
    let mut out = Vec::new();
    let mut p = 0u32;
    while (1usize << p) <= n {
        for r in 1..=n >> p {
            out.push((p, r));
        }
        p += 1;
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum PairSelection {
    #[default]
    None,
    All,
    List(Vec<(usize, usize)>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GibbsRequest {
    pub pairs: PairSelection,
    pub block_moments: bool,
    pub bond_energy: bool,
}

impl GibbsRequest {
    pub fn everything() -> Self {
        Self { pairs: PairSelection::All, block_moments: true, bond_energy: true }
    }

    pub fn pairs(list: Vec<(usize, usize)>) -> Self {
        Self { pairs: PairSelection::List(list), ..Self::default() }
    }

    pub fn all_pairs() -> Self {
        Self { pairs: PairSelection::All, ..Self::default() }
    }

    pub fn blocks() -> Self {
        Self { block_moments: true, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMoment {
    pub p: u32,
    pub r: usize,
    /// `⟨S_{p,r}²⟩`
    pub m2: f64,
    /// `⟨S_{p,r}²⟩ / 2^{2p}`
    pub normalized: f64,
}

/// Exact observables for one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport {
    pub n_sites: usize,
    pub log_z: f64,
    /// Sorted by `(i, j)` with `i < j`.
    pub pair_corr: Vec<PairCorrelation>,
    pub block_m2: Vec<BlockMoment>,
    /// `⟨J̃_b σ_i σ_j⟩`, aligned with the realization's bonds.
    pub bond_energy: Vec<f64>,
}

impl GibbsReport {
    pub fn corr(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return Some(1.0);
        }
        let key = if i < j { (i, j) } else { (j, i) };
        self.pair_corr
            .binary_search_by(|pc| (pc.i, pc.j).cmp(&key))
            .ok()
            .map(|k| self.pair_corr[k].value)
    }

    pub fn block(&self, p: u32, r: usize) -> Option<&BlockMoment> {
        self.block_m2.iter().find(|b| b.p == p && b.r == r)
    }

    /// Mean of the normalised moments over all blocks at level `p`.
    pub fn mean_normalized(&self, p: u32) -> Option<f64> {
        let level: Vec<f64> =
            self.block_m2.iter().filter(|b| b.p == p).map(|b| b.normalized).collect();
        (!level.is_empty()).then(|| level.iter().sum::<f64>() / level.len() as f64)
    }

    /// Write block moments as CSV: `p,r,m2,normalized`.
    pub fn write_blocks_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["p", "r", "m2", "normalized"])?;
        for b in &self.block_m2 {
            w.write_record([
                b.p.to_string(),
                b.r.to_string(),
                format!("{:e}", b.m2),
                format!("{:e}", b.normalized),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Partition of `[-2^{N-1}, 2^{N-1}]` into `count` equal subintervals.
///
/// Membership is half-open `[a, b)` except for the last interval, which is
/// closed. Indices are computed in integer arithmetic, so block sums that land
/// on a boundary are classified exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalPartition {
    pub level: u32,
    pub count: usize,
}

impl IntervalPartition {
    pub fn new(level: u32, count: usize) -> Result<Self> {
        if level < 1 || level > 40 {
            return Err(Error::InvalidArgument(format!("partition level {level} out of range")));
        }
        if count < 1 {
            return Err(Error::InvalidArgument("interval count must be >= 1".into()));
        }
        Ok(Self { level, count })
    }

    /// `2^{N-1}`, the half-width of the covered range.
    pub fn half_width(&self) -> i64 {
        1i64 << (self.level - 1)
    }

    /// Interval index (from 0) of a block-sum value in the covered range.
    pub fn index_of(&self, s: i64) -> usize {
        let h = self.half_width() as i128;
        let k = ((s as i128 + h) * self.count as i128).div_euclid(2 * h);
        k.clamp(0, self.count as i128 - 1) as usize
    }

    /// Real bounds `[a, b]` of interval `k` (from 0).
    pub fn bounds(&self, k: usize) -> (f64, f64) {
        let h = self.half_width() as f64;
        let w = 2.0 * h / self.count as f64;
        (-h + w * k as f64, -h + w * (k + 1) as f64)
    }
}

/// Per-interval restricted log-partition sums of the two halves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedTraces {
    pub partition: IntervalPartition,
    /// `log Z^{(1)}_k`, `None` when no configuration has its block sum in `I_k`.
    pub log_z1: Vec<Option<f64>>,
    pub log_z2: Vec<Option<f64>>,
}

impl RestrictedTraces {
    /// Intervals empty for at least one half.
    pub fn empty_intervals(&self) -> Vec<usize> {
        (0..self.partition.count)
            .filter(|&k| self.log_z1[k].is_none() || self.log_z2[k].is_none())
            .collect()
    }

    /// `log(Z^{(1)}_k / Z^{(2)}_k)` for every interval where both are nonempty.
    pub fn log_ratios(&self) -> Vec<f64> {
        self.log_z1
            .iter()
            .zip(&self.log_z2)
            .filter_map(|(a, b)| Some((*a)? - (*b)?))
            .collect()
    }

    /// `log Σ_k Z^{(1)}_k Z^{(2)}_k`.
    pub fn log_sum_products(&self) -> f64 {
        let terms: Vec<f64> = self
            .log_z1
            .iter()
            .zip(&self.log_z2)
            .filter_map(|(a, b)| Some((*a)? + (*b)?))
            .collect();
        log_sum_exp(&terms)
    }

    /// `log Σ_k Z^{(1)}_k / Z^{(2)}_k`.
    pub fn log_sum_ratios(&self) -> f64 {
        log_sum_exp(&self.log_ratios())
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut s = NeumaierSum::default();
    for v in values {
        s.add((v - max).exp());
    }
    max + s.value().ln()
}

/// Restricted two-replica moments of the interpolating measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoReplicaMoments {
    /// `⟨(S_{N-1,1} - S_{N-1,2})²⟩'`
    pub block_diff_sq: f64,
    /// `⟨(q_{N-1,1} - q_{N-1,2})²⟩'` over two independent replicas.
    pub overlap_diff_sq: f64,
    /// Log of the restricted partition sum.
    pub log_z: f64,
}

/// Exact enumeration engine with a configurable spin cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactEngine {
    pub cap: usize,
}

impl Default for ExactEngine {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP }
    }
}

impl ExactEngine {
    pub fn with_cap(cap: usize) -> Self {
        Self { cap: cap.min(40) }
    }

    fn check_cap(&self, needed: usize) -> Result<()> {
        if needed > self.cap {
            Err(Error::CapExceeded { needed, cap: self.cap })
        } else {
            Ok(())
        }
    }

    pub fn gibbs(&self, r: &DisorderRealization, request: &GibbsRequest) -> Result<GibbsReport> {
        self.check_cap(r.n_sites())?;
        let m = CouplingMatrix::from_realization(r)?;
        let mut report = self.gibbs_matrix(&m, request)?;
        if request.bond_energy {
            let need_all = !matches!(request.pairs, PairSelection::All);
            let corr = if need_all {
                Some(self.gibbs_matrix(&m, &GibbsRequest::all_pairs())?)
            } else {
                None
            };
            let source = corr.as_ref().unwrap_or(&report);
            report.bond_energy = r
                .laws
                .laws
                .iter()
                .zip(&r.couplings)
                .map(|(law, c)| c * source.corr(law.bond.i, law.bond.j).unwrap_or(0.0))
                .collect();
        }
        Ok(report)
    }

    /// Same as [`ExactEngine::gibbs`] on a coupling matrix; bond energies are
    /// not available at this level.
    pub fn gibbs_matrix(&self, m: &CouplingMatrix, request: &GibbsRequest) -> Result<GibbsReport> {
        let n = m.n();
        self.check_cap(n)?;
        let lw = log_weights(m);
        let (log_z, probs) = normalise(&lw, |_| true).expect("unrestricted sum is nonempty");
        let pair_corr = pair_correlations(&probs, n, &request.pairs);
        let block_m2 = if request.block_moments { block_moments(&probs, n) } else { Vec::new() };
        Ok(GibbsReport { n_sites: n, log_z, pair_corr, block_m2, bond_energy: Vec::new() })
    }

    /// Restricted traces of two decoupled halves over a shared partition.
    pub fn restricted_traces(
        &self,
        half1: &CouplingMatrix,
        half2: &CouplingMatrix,
        partition: IntervalPartition,
    ) -> Result<RestrictedTraces> {
        let expected = 1usize << (partition.level - 1);
        for h in [half1, half2] {
            if h.n() != expected {
                return Err(Error::InvalidArgument(format!(
                    "half has {} sites, partition level {} needs {expected}",
                    h.n(),
                    partition.level
                )));
            }
            self.check_cap(2 * h.n())?;
        }
        Ok(RestrictedTraces {
            partition,
            log_z1: half_traces(half1, partition),
            log_z2: half_traces(half2, partition),
        })
    }

    /// Restricted traces of the two halves of a realization whose cross-half
    /// couplings vanish (the `t = 0` interpolation endpoint).
    pub fn restricted_traces_of(
        &self,
        r: &DisorderRealization,
        partition: IntervalPartition,
    ) -> Result<RestrictedTraces> {
        let (a, b) = split_halves(r)?;
        self.restricted_traces(&a, &b, partition)
    }

    /// `log Σ_k Tr_{S_1 ∈ I_k} Tr_{S_2 ∈ I_k} exp(H)` for one realization.
    pub fn restricted_log_partition(
        &self,
        r: &DisorderRealization,
        partition: IntervalPartition,
    ) -> Result<f64> {
        let n = r.n_sites();
        self.check_partition(n, partition)?;
        let m = CouplingMatrix::from_realization(r)?;
        let lw = log_weights(&m);
        let keep = same_interval_filter(n, partition);
        Ok(normalise(&lw, keep).map_or(f64::NEG_INFINITY, |(lz, _)| lz))
    }

    fn check_partition(&self, n: usize, partition: IntervalPartition) -> Result<()> {
        self.check_cap(n)?;
        if n != 1usize << partition.level {
            return Err(Error::InvalidArgument(format!(
                "{n} sites do not match partition level {}",
                partition.level
            )));
        }
        Ok(())
    }

    /// Block-difference and overlap-difference moments under the restricted
    /// measure, two replicas drawn independently from it.
    pub fn two_replica_restricted_moments(
        &self,
        r: &DisorderRealization,
        partition: IntervalPartition,
    ) -> Result<TwoReplicaMoments> {
        let n = r.n_sites();
        self.check_cap(2 * n)?;
        self.check_partition(n, partition)?;
        let m = CouplingMatrix::from_realization(r)?;
        let lw = log_weights(&m);
        let half = n / 2;
        let (log_z, probs) = normalise(&lw, same_interval_filter(n, partition))
            .ok_or_else(|| Error::InvalidArgument("restricted configuration set is empty".into()))?;
        let mut diff = NeumaierSum::default();
        for (c, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                let d = block_sum(c as u64, 0, half) - block_sum(c as u64, half, half);
                diff.add(p * (d * d) as f64);
            }
        }
        // Independent replicas: ⟨(q1 - q2)²⟩ = Σ_ij ε_i ε_j ⟨σ_i σ_j⟩'².
        let mut wh = probs;
        walsh_hadamard(&mut wh);
        let mut overlap = NeumaierSum::default();
        for i in 0..n {
            for j in 0..n {
                let c = if i == j { 1.0 } else { wh[(1usize << i) | (1usize << j)] };
                let sign = if (i < half) == (j < half) { 1.0 } else { -1.0 };
                overlap.add(sign * c * c);
            }
        }
        Ok(TwoReplicaMoments {
            block_diff_sq: diff.value(),
            overlap_diff_sq: overlap.value(),
            log_z,
        })
    }
}

fn same_interval_filter(n: usize, partition: IntervalPartition) -> impl Fn(usize) -> bool {
    let half = n / 2;
    move |c: usize| {
        let s1 = block_sum(c as u64, 0, half);
        let s2 = block_sum(c as u64, half, half);
        partition.index_of(s1) == partition.index_of(s2)
    }
}

fn half_traces(m: &CouplingMatrix, partition: IntervalPartition) -> Vec<Option<f64>> {
    let n = m.n();
    let lw = log_weights(m);
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); partition.count];
    for (c, v) in lw.iter().enumerate() {
        let s = block_sum(c as u64, 0, n);
        buckets[partition.index_of(s)].push(*v);
    }
    buckets
        .iter()
        .map(|b| (!b.is_empty()).then(|| log_sum_exp(b)))
        .collect()
}

/// Coupling matrices of the two halves; fails if the halves interact.
pub fn split_halves(r: &DisorderRealization) -> Result<(CouplingMatrix, CouplingMatrix)> {
    let n = r.n_sites();
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("{n} sites cannot be split into halves")));
    }
    let m = CouplingMatrix::from_realization(r)?;
    let half = n / 2;
    let cross = m.max_cross_coupling(0..half);
    if cross != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "halves are coupled (largest cross coupling {cross})"
        )));
    }
    Ok((m.sub(0..half), m.sub(half..n)))
}

fn pair_correlations(probs: &[f64], n: usize, selection: &PairSelection) -> Vec<PairCorrelation> {
    let mut pairs: Vec<(usize, usize)> = match selection {
        PairSelection::None => return Vec::new(),
        PairSelection::All => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        PairSelection::List(list) => list
            .iter()
            .filter(|(i, j)| i != j && *i < n && *j < n)
            .map(|&(i, j)| if i < j { (i, j) } else { (j, i) })
            .collect(),
    };
    pairs.sort_unstable();
    pairs.dedup();
    if pairs.len() > n {
        let mut wh = probs.to_vec();
        walsh_hadamard(&mut wh);
        pairs
            .into_iter()
            .map(|(i, j)| PairCorrelation { i, j, value: wh[(1 << i) | (1 << j)] })
            .collect()
    } else {
        pairs
            .into_iter()
            .map(|(i, j)| {
                let mut s = NeumaierSum::default();
                for (c, p) in probs.iter().enumerate() {
                    if (c >> i ^ c >> j) & 1 == 1 {
                        s.add(-p);
                    } else {
                        s.add(*p);
                    }
                }
                PairCorrelation { i, j, value: s.value() }
            })
            .collect()
    }
}

fn block_moments(probs: &[f64], n: usize) -> Vec<BlockMoment> {
    let layout = block_layout(n);
    let mut sums = vec![NeumaierSum::default(); layout.len()];
    for (c, p) in probs.iter().enumerate() {
        for (acc, &(level, r)) in sums.iter_mut().zip(&layout) {
            let size = 1usize << level;
            let s = block_sum(c as u64, (r - 1) * size, size);
            acc.add(p * (s * s) as f64);
        }
    }
    layout
        .iter()
        .zip(sums)
        .map(|(&(p, r), acc)| {
            let m2 = if p == 0 { 1.0 } else { acc.value() };
            BlockMoment { p, r, m2, normalized: m2 / (1u64 << (2 * p)) as f64 }
        })
        .collect()
}

/// Exact Gibbs observables with the default cap.
pub fn gibbs_exact(r: &DisorderRealization, request: &GibbsRequest) -> Result<GibbsReport> {
    ExactEngine::default().gibbs(r, request)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{realize, Bond, BondLaw, BondLaws, ModelSpec};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn fixed(n: usize, bonds: &[(usize, usize, f64)]) -> DisorderRealization {
        let laws = BondLaws {
            n_sites: n,
            laws: bonds
                .iter()
                .map(|&(i, j, _)| BondLaw { bond: Bond { i, j, level: 0 }, x: 1.0 })
                .collect(),
        };
        DisorderRealization {
            seed: 0,
            sample_index: 0,
            laws: Arc::new(laws),
            normals: vec![0.0; bonds.len()],
            couplings: bonds.iter().map(|b| b.2).collect(),
        }
    }

    #[test]
    fn independent_spins() {
        let r = fixed(4, &[(0, 1, 0.0), (2, 3, 0.0)]);
        let rep = gibbs_exact(&r, &GibbsRequest::everything()).unwrap();
        assert_abs_diff_eq!(rep.log_z, 4.0 * std::f64::consts::LN_2, epsilon = 1e-14);
        assert!(rep.pair_corr.iter().all(|p| p.value.abs() < 1e-15));
        assert_abs_diff_eq!(rep.block(1, 1).unwrap().m2, 2.0, epsilon = 1e-14);
        assert_eq!(rep.block(0, 3).unwrap().m2, 1.0);
    }

    #[test]
    fn two_spin_tanh() {
        for k in 0..50 {
            let j = -3.0 + 0.123 * k as f64;
            let r = fixed(2, &[(0, 1, j)]);
            let rep = gibbs_exact(&r, &GibbsRequest::all_pairs()).unwrap();
            assert_abs_diff_eq!(rep.corr(0, 1).unwrap(), j.tanh(), epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_couplings_dyson_blocks() {
        let laws = Arc::new(ModelSpec::dyson(3, 1.25, 0.0).laws().unwrap());
        let r = realize(laws, 1, 0).unwrap();
        let rep = gibbs_exact(&r, &GibbsRequest::blocks()).unwrap();
        for b in &rep.block_m2 {
            assert_abs_diff_eq!(b.m2, (1u64 << b.p) as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(b.normalized, 1.0 / (1u64 << b.p) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_couplings_do_not_overflow() {
        let r = fixed(3, &[(0, 1, 900.0), (1, 2, 800.0), (0, 2, -700.0)]);
        let rep = gibbs_exact(&r, &GibbsRequest::all_pairs()).unwrap();
        assert!(rep.log_z.is_finite());
        assert!(rep.pair_corr.iter().all(|p| p.value.is_finite() && p.value.abs() <= 1.0));
    }

    #[test]
    fn cap_and_nonfinite_are_rejected() {
        let r = fixed(5, &[(0, 1, 1.0)]);
        assert!(matches!(
            ExactEngine::with_cap(4).gibbs(&r, &GibbsRequest::default()),
            Err(Error::CapExceeded { needed: 5, cap: 4 })
        ));
        let bad = fixed(2, &[(0, 1, f64::NAN)]);
        assert!(matches!(
            gibbs_exact(&bad, &GibbsRequest::default()),
            Err(Error::NonFiniteCoupling { .. })
        ));
    }

    #[test]
    fn partition_membership() {
        let p = IntervalPartition::new(2, 2).unwrap();
        assert_eq!(p.index_of(-2), 0);
        assert_eq!(p.index_of(0), 1);
        assert_eq!(p.index_of(2), 1);
        let p = IntervalPartition::new(3, 4).unwrap();
        // boundaries at -4, -2, 0, 2, 4
        assert_eq!(p.index_of(-4), 0);
        assert_eq!(p.index_of(-2), 1);
        assert_eq!(p.index_of(0), 2);
        assert_eq!(p.index_of(2), 3);
        assert_eq!(p.index_of(4), 3);
        assert_eq!(p.bounds(1), (-2.0, 0.0));
        assert!(IntervalPartition::new(2, 0).is_err());
    }

    #[test]
    fn single_spin_halves() {
        let part = IntervalPartition::new(1, 2).unwrap();
        let half = CouplingMatrix::zeros(1);
        let t = ExactEngine::default().restricted_traces(&half, &half, part).unwrap();
        assert_eq!(t.log_z1, vec![Some(0.0), Some(0.0)]);
        assert_eq!(t.log_z2, vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn restricted_traces_cover_the_half() {
        let spec = ModelSpec::dyson(3, 1.25, 1.5);
        let laws = Arc::new(crate::model::interpolate_dyson(&spec, 0.0).unwrap());
        let r = realize(laws, 3, 1).unwrap();
        let (h1, h2) = split_halves(&r).unwrap();
        for count in 1..=6 {
            let part = IntervalPartition::new(3, count).unwrap();
            let t = ExactEngine::default().restricted_traces(&h1, &h2, part).unwrap();
            let full1 = ExactEngine::default().gibbs_matrix(&h1, &GibbsRequest::default()).unwrap();
            let parts: Vec<f64> = t.log_z1.iter().flatten().copied().collect();
            assert_abs_diff_eq!(log_sum_exp(&parts), full1.log_z, epsilon = 1e-9);
            if count == 1 {
                assert_abs_diff_eq!(t.log_z1[0].unwrap(), full1.log_z, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn coupled_halves_cannot_be_split() {
        let r = fixed(4, &[(0, 3, 0.5)]);
        assert!(split_halves(&r).is_err());
    }

    #[test]
    fn two_replica_zero_couplings() {
        let r = fixed(2, &[(0, 1, 0.0)]);
        let part = IntervalPartition::new(1, 1).unwrap();
        let m = ExactEngine::default().two_replica_restricted_moments(&r, part).unwrap();
        assert_abs_diff_eq!(m.block_diff_sq, 2.0, epsilon = 1e-14);
        // q1 - q2 = τ1 - τ2 with independent τ: second moment 2
        assert_abs_diff_eq!(m.overlap_diff_sq, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn block_layout_counts() {
        assert_eq!(block_layout(8).len(), 8 + 4 + 2 + 1);
        assert_eq!(block_layout(12).len(), 12 + 6 + 3 + 1);
    }
}
