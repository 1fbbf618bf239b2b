//! Metropolis and replica-exchange sampling at fixed disorder.
//!
//! A sweep is `n` single-spin Metropolis updates at uniformly drawn sites, so
//! the visiting order is random and the chain stays aperiodic even when every
//! proposal is accepted (zero couplings). The log-weight change of flipping
//! `σ_i` is `-2σ_i h_i` with `h_i = Σ_j w_ij σ_j`; local fields are updated on
//! acceptance and recomputed from scratch every [`RESYNC_SWEEPS`] sweeps.
//!
//! Tempering rungs share the standard normals `z_b` of one realization and
//! rebuild their couplings as `x_b(β') + √x_b(β')·z_b`, so each rung sees the
//! disorder ensemble that belongs to its own temperature.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{block_layout, CouplingMatrix, PairSelection};
use crate::model::{realize_with_normals, DisorderRealization, ModelSpec};
use crate::rng::chain_rng;
use crate::stats::{blocking, BlockingResult};

const RESYNC_SWEEPS: u64 = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MCConfig {
    /// Total sweeps, burn-in included.
    pub sweeps: u64,
    pub burn_in: u64,
    /// Sweeps between recorded measurements.
    pub thinning: u64,
    /// Inverse temperatures, ascending, including the target.
    pub ladder: Vec<f64>,
    /// Sweeps between exchange attempts.
    pub swap_interval: u64,
    pub chain_seed: u64,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self { sweeps: 20_000, burn_in: 2_000, thinning: 1, ladder: Vec::new(), swap_interval: 1, chain_seed: 0 }
    }
}

impl MCConfig {
    pub fn new(sweeps: u64, burn_in: u64, chain_seed: u64) -> Self {
        Self { sweeps, burn_in, chain_seed, ..Self::default() }
    }

    pub fn with_ladder(mut self, ladder: Vec<f64>) -> Self {
        self.ladder = ladder;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMcConfig(m));
        if self.sweeps == 0 || self.thinning == 0 || self.swap_interval == 0 {
            return bad("sweeps, thinning and swap_interval must be positive".into());
        }
        if self.burn_in >= self.sweeps {
            return bad(format!("burn_in {} must be below sweeps {}", self.burn_in, self.sweeps));
        }
        if self.kept_samples() < 2 {
            return bad("fewer than two measurements would be kept".into());
        }
        if self.ladder.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return bad("ladder entries must be finite and non-negative".into());
        }
        if self.ladder.windows(2).any(|w| w[1] < w[0]) {
            return bad("ladder must be sorted ascending".into());
        }
        Ok(())
    }

    /// Index of `target` in the ladder.
    pub fn target_rung(&self, target: f64) -> Result<usize> {
        let tol = 1e-12 * target.abs().max(1.0);
        self.ladder
            .iter()
            .position(|b| (b - target).abs() <= tol)
            .ok_or_else(|| Error::InvalidMcConfig(format!("target beta {target} is not on the ladder")))
    }

    pub fn kept_samples(&self) -> u64 {
        self.sweeps.saturating_sub(self.burn_in) / self.thinning.max(1)
    }
}

/// Observables to record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MCRequest {
    pub pairs: PairSelection,
    pub block_moments: bool,
    /// Keep a per-measurement trace of energy and block sums.
    pub trace: bool,
}

impl MCRequest {
    pub fn pairs(list: Vec<(usize, usize)>) -> Self {
        Self { pairs: PairSelection::List(list), ..Self::default() }
    }

    pub fn blocks() -> Self {
        Self { block_moments: true, ..Self::default() }
    }

    pub fn everything() -> Self {
        Self { pairs: PairSelection::All, block_moments: true, trace: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub i: usize,
    pub j: usize,
    pub estimate: BlockingResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub p: u32,
    pub r: usize,
    /// `⟨S_{p,r}²⟩`
    pub m2: BlockingResult,
}

impl BlockEstimate {
    /// `(mean, se)` of `⟨S_{p,r}²⟩ / 2^{2p}`.
    pub fn normalized(&self) -> (f64, f64) {
        let s = (2.0 * f64::from(self.p)).exp2();
        (self.m2.mean / s, self.m2.se / s)
    }
}

/// Normalised block moment averaged over every block of one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub p: u32,
    pub normalized: BlockingResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sweep: u64,
    pub energy: f64,
    pub block_sums: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub n_sites: usize,
    pub kept_samples: usize,
    /// Single-spin acceptance at the measured rung.
    pub acceptance_rate: f64,
    /// Exchange acceptance for each adjacent rung pair.
    pub swap_acceptance: Vec<f64>,
    /// Effective Hamiltonian `-Σ_b J̃_b σ_iσ_j`.
    pub energy: BlockingResult,
    pub pairs: Vec<PairEstimate>,
    pub blocks: Vec<BlockEstimate>,
    pub levels: Vec<LevelEstimate>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRow>,
}

impl MCEstimate {
    pub fn corr(&self, i: usize, j: usize) -> Option<&BlockingResult> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().find(|e| (e.i, e.j) == key).map(|e| &e.estimate)
    }

    pub fn block(&self, p: u32, r: usize) -> Option<&BlockEstimate> {
        self.blocks.iter().find(|b| b.p == p && b.r == r)
    }

    pub fn level(&self, p: u32) -> Option<&BlockingResult> {
        self.levels.iter().find(|l| l.p == p).map(|l| &l.normalized)
    }

    /// Whether every reported error bar reached a blocking plateau.
    pub fn all_plateau(&self) -> bool {
        self.energy.plateau
            && self.pairs.iter().all(|e| e.estimate.plateau || e.estimate.se == 0.0)
            && self.blocks.iter().all(|b| b.m2.plateau || b.m2.se == 0.0)
    }

    /// Trace as CSV: `sweep,energy,block_1,...`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let width = self.trace.first().map_or(0, |t| t.block_sums.len());
        let mut header = vec!["sweep".to_string(), "energy".to_string()];
        header.extend((1..=width).map(|k| format!("block_{k}")));
        w.write_record(&header)?;
        for row in &self.trace {
            let mut rec = vec![row.sweep.to_string(), format!("{:e}", row.energy)];
            rec.extend(row.block_sums.iter().map(|s| s.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Single-spin-flip Metropolis chain for one coupling matrix.
#[derive(Clone, Debug)]
pub struct MetropolisChain {
    m: CouplingMatrix,
    spins: Vec<f64>,
    fields: Vec<f64>,
    sweeps: u64,
    accepted: u64,
    attempted: u64,
}

impl MetropolisChain {
    /// Chain started from a uniformly random configuration.
    pub fn new(m: CouplingMatrix, rng: &mut ChaCha8Rng) -> Self {
        let n = m.n();
        let spins = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let mut chain = Self {
            m,
            spins,
            fields: vec![0.0; n],
            sweeps: 0,
            accepted: 0,
            attempted: 0,
        };
        chain.resync();
        chain
    }

    fn resync(&mut self) {
        let n = self.m.n();
        for i in 0..n {
            self.fields[i] = self.m.row(i).iter().zip(&self.spins).map(|(w, s)| w * s).sum();
        }
    }

    pub fn sweep(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.spins.len();
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            let delta = -2.0 * self.spins[i] * self.fields[i];
            self.attempted += 1;
            if delta >= 0.0 || rng.gen::<f64>() < delta.exp() {
                let s_new = -self.spins[i];
                self.spins[i] = s_new;
                let change = 2.0 * s_new;
                for (h, w) in self.fields.iter_mut().zip(self.m.row(i)) {
                    *h += change * w;
                }
                self.accepted += 1;
            }
        }
        self.sweeps += 1;
        if self.sweeps % RESYNC_SWEEPS == 0 {
            self.resync();
        }
    }

    pub fn spins(&self) -> &[f64] {
        &self.spins
    }

    /// Configuration index, bit `i` set when `σ_i = -1`.
    pub fn config(&self) -> u64 {
        self.spins
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, s)| if *s < 0.0 { acc | 1 << i } else { acc })
    }

    /// `Σ_{i<j} w_ij σ_iσ_j + Σ_i d_i`.
    pub fn log_weight(&self) -> f64 {
        log_weight_of(&self.m, &self.spins)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }

    fn set_spins(&mut self, spins: Vec<f64>) {
        self.spins = spins;
        self.resync();
    }
}

fn log_weight_of(m: &CouplingMatrix, spins: &[f64]) -> f64 {
    let mut e = 0.0;
    for i in 0..m.n() {
        let row = m.row(i);
        let mut h = 0.0;
        for j in i + 1..m.n() {
            h += row[j] * spins[j];
        }
        e += spins[i] * h;
    }
    e + m.diagonal_constant()
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Monte Carlo needs at least two sites, got {n}")));
    }
    if n > 64 {
        return Err(Error::Unsupported(format!("Monte Carlo supports at most 64 sites, got {n}")));
    }
    Ok(())
}

struct Recorder {
    pairs: Vec<(usize, usize)>,
    blocks: Vec<(u32, usize)>,
    level_ids: Vec<u32>,
    trace_level: Option<u32>,
    energy: Vec<f64>,
    pair_series: Vec<Vec<f64>>,
    block_series: Vec<Vec<f64>>,
    level_series: Vec<Vec<f64>>,
    trace: Vec<TraceRow>,
}

impl Recorder {
    fn new(n: usize, request: &MCRequest, capacity: usize) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = match &request.pairs {
            PairSelection::None => Vec::new(),
            PairSelection::All => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
            PairSelection::List(list) => {
                let mut v = Vec::with_capacity(list.len());
                for &(i, j) in list {
                    if i == j || i >= n || j >= n {
                        return Err(Error::InvalidArgument(format!("pair ({i}, {j}) invalid for {n} sites")));
                    }
                    v.push((i.min(j), i.max(j)));
                }
                v.sort_unstable();
                v.dedup();
                v
            }
        };
        let layout = block_layout(n);
        let top = layout.last().map(|b| b.0);
        let blocks = if request.block_moments || request.trace { layout } else { Vec::new() };
        let mut level_ids: Vec<u32> = if request.block_moments { blocks.iter().map(|b| b.0).collect() } else { Vec::new() };
        level_ids.dedup();
        let trace_level = if request.trace { top.map(|t| t.saturating_sub(1)) } else { None };
        let series = |k: usize| (0..k).map(|_| Vec::with_capacity(capacity)).collect::<Vec<_>>();
        Ok(Self {
            pair_series: series(pairs.len()),
            block_series: series(if request.block_moments { blocks.len() } else { 0 }),
            level_series: series(level_ids.len()),
            energy: Vec::with_capacity(capacity),
            trace: Vec::new(),
            pairs,
            blocks,
            level_ids,
            trace_level,
        })
    }

    fn record(&mut self, chain: &MetropolisChain, sweep: u64) {
        let s = chain.spins();
        let energy = -chain.log_weight();
        self.energy.push(energy);
        for (series, &(i, j)) in self.pair_series.iter_mut().zip(&self.pairs) {
            series.push(s[i] * s[j]);
        }
        let sums: Vec<i64> = self
            .blocks
            .iter()
            .map(|&(p, r)| {
                let size = 1usize << p;
                s[(r - 1) * size..r * size].iter().sum::<f64>() as i64
            })
            .collect();
        for (series, sum) in self.block_series.iter_mut().zip(&sums) {
            series.push((sum * sum) as f64);
        }
        for (series, &p) in self.level_series.iter_mut().zip(&self.level_ids) {
            let scale = (2.0 * f64::from(p)).exp2();
            let (mut tot, mut cnt) = (0.0, 0usize);
            for (&(q, _), sum) in self.blocks.iter().zip(&sums) {
                if q == p {
                    tot += (sum * sum) as f64 / scale;
                    cnt += 1;
                }
            }
            series.push(tot / cnt as f64);
        }
        if let Some(level) = self.trace_level {
            let block_sums =
                self.blocks.iter().zip(&sums).filter(|(b, _)| b.0 == level).map(|(_, s)| *s).collect();
            self.trace.push(TraceRow { sweep, energy, block_sums });
        }
    }

    fn finish(self, n: usize, acceptance_rate: f64, swap_acceptance: Vec<f64>, block_moments: bool) -> MCEstimate {
        let kept = self.energy.len();
        let pairs = self
            .pairs
            .iter()
            .zip(&self.pair_series)
            .map(|(&(i, j), s)| PairEstimate { i, j, estimate: blocking(s) })
            .collect();
        let blocks = if block_moments {
            self.blocks
                .iter()
                .zip(&self.block_series)
                .map(|(&(p, r), s)| BlockEstimate { p, r, m2: blocking(s) })
                .collect()
        } else {
            Vec::new()
        };
        let levels = self
            .level_ids
            .iter()
            .zip(&self.level_series)
            .map(|(&p, s)| LevelEstimate { p, normalized: blocking(s) })
            .collect();
        MCEstimate {
            n_sites: n,
            kept_samples: kept,
            acceptance_rate,
            swap_acceptance,
            energy: blocking(&self.energy),
            pairs,
            blocks,
            levels,
            trace: self.trace,
        }
    }
}

/// Metropolis estimate of Gibbs averages for one realization. The ladder in
/// `config` is ignored.
pub fn metropolis_run(r: &DisorderRealization, config: &MCConfig, request: &MCRequest) -> Result<MCEstimate> {
    config.validate()?;
    let m = CouplingMatrix::from_realization(r)?;
    metropolis_matrix(m, config, request, r.sample_index)
}

/// [`metropolis_run`] on an explicit coupling matrix; `stream` selects the
/// chain's random stream.
pub fn metropolis_matrix(m: CouplingMatrix, config: &MCConfig, request: &MCRequest, stream: u64) -> Result<MCEstimate> {
    config.validate()?;
    let n = m.n();
    check_size(n)?;
    let mut rng = chain_rng(config.chain_seed, stream);
    let mut chain = MetropolisChain::new(m, &mut rng);
    let mut rec = Recorder::new(n, request, config.kept_samples() as usize)?;
    for sweep in 1..=config.sweeps {
        chain.sweep(&mut rng);
        if sweep > config.burn_in && (sweep - config.burn_in) % config.thinning == 0 {
            rec.record(&chain, sweep);
        }
    }
    Ok(rec.finish(n, chain.acceptance_rate(), Vec::new(), request.block_moments))
}

/// Replica-exchange estimate at the target rung `spec.beta`.
///
/// Every rung reuses `z.normals`; rung `β'` draws its couplings from the laws
/// of `spec.with_beta(β')`. A one-rung ladder runs exactly the Metropolis chain
/// of [`metropolis_run`].
pub fn tempering_run(
    z: &DisorderRealization,
    spec: &ModelSpec,
    config: &MCConfig,
    request: &MCRequest,
) -> Result<MCEstimate> {
    config.validate()?;
    if config.ladder.is_empty() {
        return Err(Error::InvalidMcConfig("tempering needs a non-empty ladder".into()));
    }
    let target = config.target_rung(spec.beta)?;
    let mut matrices = Vec::with_capacity(config.ladder.len());
    for &b in &config.ladder {
        let laws = Arc::new(spec.with_beta(b).laws()?);
        let rung = realize_with_normals(laws, z.normals.clone(), z.seed, z.sample_index)?;
        matrices.push(CouplingMatrix::from_realization(&rung)?);
    }
    let n = matrices[0].n();
    check_size(n)?;
    if n != z.n_sites() {
        return Err(Error::InvalidArgument(format!(
            "realization has {} sites but the spec builds {n}",
            z.n_sites()
        )));
    }
    let mut rng = chain_rng(config.chain_seed, z.sample_index);
    let mut chains: Vec<MetropolisChain> = matrices.into_iter().map(|m| MetropolisChain::new(m, &mut rng)).collect();
    let rungs = chains.len();
    let mut swaps_tried = vec![0u64; rungs.saturating_sub(1)];
    let mut swaps_done = vec![0u64; rungs.saturating_sub(1)];
    let mut rec = Recorder::new(n, request, config.kept_samples() as usize)?;
    let mut parity = 0;
    for sweep in 1..=config.sweeps {
        for c in chains.iter_mut() {
            c.sweep(&mut rng);
        }
        if rungs > 1 && sweep % config.swap_interval == 0 {
            let mut a = parity;
            while a + 1 < rungs {
                swaps_tried[a] += 1;
                if try_swap(&mut chains, a, &mut rng) {
                    swaps_done[a] += 1;
                }
                a += 2;
            }
            parity ^= 1;
        }
        if sweep > config.burn_in && (sweep - config.burn_in) % config.thinning == 0 {
            rec.record(&chains[target], sweep);
        }
    }
    let swap_acceptance = swaps_tried
        .iter()
        .zip(&swaps_done)
        .map(|(&t, &d)| if t == 0 { 0.0 } else { d as f64 / t as f64 })
        .collect();
    Ok(rec.finish(n, chains[target].acceptance_rate(), swap_acceptance, request.block_moments))
}

/// Exchange configurations of rungs `a` and `a + 1` with probability
/// `min(1, W_a(s_b)W_b(s_a) / W_a(s_a)W_b(s_b))`.
fn try_swap(chains: &mut [MetropolisChain], a: usize, rng: &mut ChaCha8Rng) -> bool {
    let (lo, hi) = chains.split_at_mut(a + 1);
    let (ca, cb) = (&mut lo[a], &mut hi[0]);
    let crossed = log_weight_of(&ca.m, &cb.spins) + log_weight_of(&cb.m, &ca.spins);
    let direct = log_weight_of(&ca.m, &ca.spins) + log_weight_of(&cb.m, &cb.spins);
    let delta = crossed - direct;
    let u: f64 = rng.gen();
    if delta >= 0.0 || u < delta.exp() {
        let sa = std::mem::take(&mut ca.spins);
        let sb = std::mem::replace(&mut cb.spins, sa);
        ca.set_spins(sb);
        cb.resync();
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{realize, ModelSpec};

    fn two_spin(c: f64) -> CouplingMatrix {
        let mut m = CouplingMatrix::zeros(2);
        m.add(0, 1, c);
        m
    }

    #[test]
    fn config_validation() {
        assert!(MCConfig::new(100, 100, 0).validate().is_err());
        assert!(MCConfig::new(100, 10, 0).validate().is_ok());
        let c = MCConfig::new(100, 10, 0).with_ladder(vec![1.0, 0.5]);
        assert!(c.validate().is_err());
        let c = MCConfig::new(100, 10, 0).with_ladder(vec![0.5, 1.0]);
        assert_eq!(c.target_rung(1.0).unwrap(), 1);
        assert!(c.target_rung(0.7).is_err());
    }

    #[test]
    fn two_spin_bond() {
        let cfg = MCConfig::new(200_000, 1_000, 11);
        let est = metropolis_matrix(two_spin(1.0), &cfg, &MCRequest::pairs(vec![(0, 1)]), 0).unwrap();
        let e = est.corr(0, 1).unwrap();
        assert!((e.mean - 1f64.tanh()).abs() <= 4.0 * e.se, "{} ± {}", e.mean, e.se);
        assert!(e.se > 0.0);
        assert!(e.n_eff <= est.kept_samples as f64);
    }

    #[test]
    fn free_spins_are_uncorrelated() {
        let cfg = MCConfig::new(4_000, 100, 5);
        let est = metropolis_matrix(CouplingMatrix::zeros(32), &cfg, &MCRequest::everything(), 0).unwrap();
        assert_eq!(est.acceptance_rate, 1.0);
        for p in &est.pairs {
            assert!(p.estimate.mean.abs() <= 4.5 * p.estimate.se, "{p:?}");
        }
    }

    #[test]
    fn chain_replay_is_deterministic() {
        let spec = ModelSpec::dyson(3, 1.25, 1.0);
        let r = realize(Arc::new(spec.laws().unwrap()), 3, 2).unwrap();
        let cfg = MCConfig::new(500, 50, 9);
        let a = metropolis_run(&r, &cfg, &MCRequest::everything()).unwrap();
        let b = metropolis_run(&r, &cfg, &MCRequest::everything()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_rung_ladder_is_plain_metropolis() {
        let spec = ModelSpec::dyson(3, 1.25, 1.0);
        let r = realize(Arc::new(spec.laws().unwrap()), 3, 2).unwrap();
        let cfg = MCConfig::new(500, 50, 9).with_ladder(vec![1.0]);
        let a = metropolis_run(&r, &cfg, &MCRequest::everything()).unwrap();
        let b = tempering_run(&r, &spec, &cfg, &MCRequest::everything()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equal_rungs_always_swap() {
        let spec = ModelSpec::dyson(3, 1.25, 1.0);
        let r = realize(Arc::new(spec.laws().unwrap()), 3, 2).unwrap();
        let cfg = MCConfig::new(300, 10, 1).with_ladder(vec![0.5, 1.0, 1.0]);
        let est = tempering_run(&r, &spec, &cfg, &MCRequest::default()).unwrap();
        assert_eq!(est.swap_acceptance[1], 1.0);
        assert!(est.swap_acceptance[0] > 0.0 && est.swap_acceptance[0] < 1.0);
    }

    #[test]
    fn trace_rows_match_measurements() {
        let spec = ModelSpec::dyson(3, 1.25, 1.0);
        let r = realize(Arc::new(spec.laws().unwrap()), 1, 0).unwrap();
        let mut cfg = MCConfig::new(100, 20, 2);
        cfg.thinning = 4;
        let req = MCRequest { trace: true, ..MCRequest::default() };
        let est = metropolis_run(&r, &cfg, &req).unwrap();
        assert_eq!(est.trace.len(), 20);
        assert_eq!(est.trace[0].sweep, 24);
        assert_eq!(est.trace[0].block_sums.len(), 2);
        let mut buf = Vec::new();
        est.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sweep,energy,block_1,block_2\n"));
        assert_eq!(text.lines().count(), 21);
    }
}
