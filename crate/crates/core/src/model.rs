//! Model families on the Nishimori line and their quenched disorder.
//!
//! Every engine in the crate works with the *effective* coupling `βJ`, which on
//! the Nishimori line is Gaussian with equal mean and variance `x`. The Boltzmann
//! weight of a configuration is `exp(Σ_b J̃_b σ_i σ_j)`, so β and α only enter
//! through the per-bond variance `x`.
//!
//! Sites are numbered from 0 inside the library. Text outputs (CSV tables,
//! reports) number them from 1.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NormalStream;

/// Bond with an explicit variance for [`Family::Custom`]. `variance` is the
/// variance of the bare coupling `J`; the effective variance is `β²·variance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CustomBond {
    pub i: usize,
    pub j: usize,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `sites` spins on a line, one bond per unordered pair, free boundaries.
    LongRange1D { sites: usize, alpha: f64 },
    /// `2^levels` spins with ordered-pair couplings inside every dyadic block.
    DysonHierarchical {
        levels: u32,
        alpha: f64,
        /// Replacement per-level effective variances `x_1..x_N`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variance_overrides: Option<Vec<f64>>,
    },
    Custom { sites: usize, bonds: Vec<CustomBond> },
}

fn default_true() -> bool {
    true
}

/// Declarative description of one model instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub beta: f64,
    /// Generate the `i = j` Dyson couplings. They only shift `log Z`.
    #[serde(default = "default_true")]
    pub include_diagonal: bool,
}

impl ModelSpec {
    pub fn long_range(sites: usize, alpha: f64, beta: f64) -> Self {
        Self { family: Family::LongRange1D { sites, alpha }, beta, include_diagonal: true }
    }

    pub fn dyson(levels: u32, alpha: f64, beta: f64) -> Self {
        Self {
            family: Family::DysonHierarchical { levels, alpha, variance_overrides: None },
            beta,
            include_diagonal: true,
        }
    }

    pub fn dyson_with_overrides(levels: u32, alpha: f64, beta: f64, overrides: Vec<f64>) -> Self {
        Self {
            family: Family::DysonHierarchical {
                levels,
                alpha,
                variance_overrides: Some(overrides),
            },
            beta,
            include_diagonal: true,
        }
    }

    pub fn custom(sites: usize, bonds: Vec<CustomBond>, beta: f64) -> Self {
        Self { family: Family::Custom { sites, bonds }, beta, include_diagonal: true }
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn site_count(&self) -> usize {
        match &self.family {
            Family::LongRange1D { sites, .. } | Family::Custom { sites, .. } => *sites,
            Family::DysonHierarchical { levels, .. } => 1usize << levels,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match &self.family {
            Family::LongRange1D { alpha, .. } | Family::DysonHierarchical { alpha, .. } => {
                Some(*alpha)
            }
            Family::Custom { .. } => None,
        }
    }

    pub fn dyson_levels(&self) -> Option<u32> {
        match &self.family {
            Family::DysonHierarchical { levels, .. } => Some(*levels),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidSpec(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        match &self.family {
            Family::LongRange1D { sites, alpha } => {
                if *sites < 2 {
                    return Err(Error::InvalidSpec(format!("L must be >= 2, got {sites}")));
                }
                check_alpha(*alpha)
            }
            Family::DysonHierarchical { levels, alpha, variance_overrides } => {
                if *levels < 1 {
                    return Err(Error::InvalidSpec("N must be >= 1".into()));
                }
                if *levels > 30 {
                    return Err(Error::InvalidSpec(format!("N = {levels} is too large")));
                }
                check_alpha(*alpha)?;
                if let Some(v) = variance_overrides {
                    if v.len() != *levels as usize {
                        return Err(Error::InvalidSpec(format!(
                            "variance_overrides has {} entries, expected {levels}",
                            v.len()
                        )));
                    }
                    if let Some(bad) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                        return Err(Error::InvalidSpec(format!(
                            "variance override {bad} is not a finite value >= 0"
                        )));
                    }
                }
                Ok(())
            }
            Family::Custom { sites, bonds } => {
                if *sites < 1 {
                    return Err(Error::InvalidSpec("custom model needs at least one site".into()));
                }
                for b in bonds {
                    if b.i >= *sites || b.j >= *sites {
                        return Err(Error::InvalidSpec(format!(
                            "custom bond ({}, {}) outside 0..{sites}",
                            b.i, b.j
                        )));
                    }
                    if !(b.variance >= 0.0) || !b.variance.is_finite() {
                        return Err(Error::InvalidSpec(format!(
                            "custom bond ({}, {}) has variance {}",
                            b.i, b.j, b.variance
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Bond laws for this spec, whatever the family.
    pub fn laws(&self) -> Result<BondLaws> {
        match &self.family {
            Family::LongRange1D { .. } => build_long_range(self),
            Family::DysonHierarchical { .. } => build_dyson(self),
            Family::Custom { sites, bonds } => {
                self.validate()?;
                let b2 = self.beta * self.beta;
                let laws = bonds
                    .iter()
                    .map(|b| BondLaw { bond: Bond { i: b.i, j: b.j, level: 0 }, x: b2 * b.variance })
                    .collect();
                Ok(BondLaws { n_sites: *sites, laws })
            }
        }
    }

    /// Effective per-level variance `x_q` of a Dyson spec, honouring overrides.
    pub fn dyson_level_variance(&self, q: u32) -> Result<f64> {
        match &self.family {
            Family::DysonHierarchical { levels, alpha, variance_overrides } => {
                if q < 1 || q > *levels {
                    return Err(Error::InvalidArgument(format!("level {q} outside 1..={levels}")));
                }
                Ok(match variance_overrides {
                    Some(v) => v[q as usize - 1],
                    None => dyson_variance(q, self.beta, *alpha),
                })
            }
            _ => Err(Error::InvalidSpec("not a Dyson hierarchical spec".into())),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("alpha must be finite and > 1, got {alpha}")))
    }
}

/// `x = β²·b_q/2^{2q}` with `b_q = 2^{(2-α)q}`.
fn dyson_variance(q: u32, beta: f64, alpha: f64) -> f64 {
    let q = f64::from(q);
    beta * beta * ((2.0 - alpha) * q).exp2() / (2.0 * q).exp2()
}

/// Ordered site pair plus hierarchy level (0 for non-hierarchical families).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub level: u32,
}

impl Bond {
    pub fn is_diagonal(&self) -> bool {
        self.i == self.j
    }
}

/// Gaussian law `N(x, x)` of one effective coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondLaw {
    pub bond: Bond,
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BondLaws {
    pub n_sites: usize,
    pub laws: Vec<BondLaw>,
}

impl BondLaws {
    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    /// Effective variance summed per unordered off-diagonal pair, as a dense
    /// upper-triangular lookup `(i, j) -> x_ij` with `i < j`.
    pub fn pair_variances(&self) -> Vec<Vec<f64>> {
        let n = self.n_sites;
        let mut out = vec![vec![0.0; n]; n];
        for law in &self.laws {
            let Bond { i, j, .. } = law.bond;
            if i != j {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                out[a][b] += law.x;
            }
        }
        out
    }
}

/// One law per unordered pair `i < j` with `x_ij = 4β²/|i-j|^α`.
pub fn build_long_range(spec: &ModelSpec) -> Result<BondLaws> {
    let Family::LongRange1D { sites, alpha } = spec.family else {
        return Err(Error::InvalidSpec("build_long_range needs a LongRange1D spec".into()));
    };
    spec.validate()?;
    let b2 = spec.beta * spec.beta;
    let mut laws = Vec::with_capacity(sites * (sites - 1) / 2);
    for i in 0..sites {
        for j in i + 1..sites {
            let d = (j - i) as f64;
            laws.push(BondLaw { bond: Bond { i, j, level: 0 }, x: 4.0 * b2 / d.powf(alpha) });
        }
    }
    Ok(BondLaws { n_sites: sites, laws })
}

fn push_level(laws: &mut Vec<BondLaw>, q: u32, n: usize, x: f64, diagonal: bool) {
    let block = 1usize << q;
    for start in (0..n).step_by(block) {
        push_block(laws, q, start, block, x, diagonal);
    }
}

fn push_block(laws: &mut Vec<BondLaw>, level: u32, start: usize, size: usize, x: f64, diagonal: bool) {
    for i in start..start + size {
        for j in start..start + size {
            if i == j && !diagonal {
                continue;
            }
            laws.push(BondLaw { bond: Bond { i, j, level }, x });
        }
    }
}

/// Ordered-pair laws for every level `q = 1..N` and every block of `2^q` sites.
/// Laws are ordered level by level, blocks left to right, then row-major.
pub fn build_dyson(spec: &ModelSpec) -> Result<BondLaws> {
    let Family::DysonHierarchical { levels, .. } = spec.family else {
        return Err(Error::InvalidSpec("build_dyson needs a DysonHierarchical spec".into()));
    };
    spec.validate()?;
    let n = 1usize << levels;
    let mut laws = Vec::new();
    for q in 1..=levels {
        push_level(&mut laws, q, n, spec.dyson_level_variance(q)?, spec.include_diagonal);
    }
    Ok(BondLaws { n_sites: n, laws })
}

/// Laws of the interpolating Hamiltonian at parameter `t`.
///
/// Levels below `N` are unchanged. The top level carries `t·x_N`, and each half
/// carries an extra set of ordered-pair laws with variance `2(1-t)·x_N`. The
/// extras come after the top level, so the first `build_dyson(spec).len()` laws
/// coincide with `build_dyson` at `t = 1`, and the bond list has the same shape
/// for every `t`.
pub fn interpolate_dyson(spec: &ModelSpec, t: f64) -> Result<BondLaws> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
    }
    let Family::DysonHierarchical { levels, .. } = spec.family else {
        return Err(Error::InvalidSpec("interpolate_dyson needs a DysonHierarchical spec".into()));
    };
    spec.validate()?;
    let n = 1usize << levels;
    let half = n / 2;
    let top = spec.dyson_level_variance(levels)?;
    let diag = spec.include_diagonal;
    let mut laws = Vec::new();
    for q in 1..levels {
        push_level(&mut laws, q, n, spec.dyson_level_variance(q)?, diag);
    }
    push_level(&mut laws, levels, n, t * top, diag);
    let extra = 2.0 * (1.0 - t) * top;
    push_block(&mut laws, levels - 1, 0, half, extra, diag);
    push_block(&mut laws, levels - 1, half, half, extra, diag);
    Ok(BondLaws { n_sites: n, laws })
}

/// A seeded draw of all effective couplings, `J̃_b = x_b + √x_b·z_b`.
#[derive(Clone, Debug)]
pub struct DisorderRealization {
    pub seed: u64,
    pub sample_index: u64,
    pub laws: Arc<BondLaws>,
    /// Standard normals `z_b`, one per law.
    pub normals: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl DisorderRealization {
    pub fn n_sites(&self) -> usize {
        self.laws.n_sites
    }

    /// Re-evaluate the couplings for different laws of identical shape while
    /// keeping the same standard normals.
    pub fn with_laws(&self, laws: Arc<BondLaws>) -> Result<Self> {
        realize_with_normals(laws, self.normals.clone(), self.seed, self.sample_index)
    }

    /// Write the bond table as CSV: `bond_i,bond_j,level,x,coupling`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bond_i", "bond_j", "level", "x", "coupling"])?;
        for (law, c) in self.laws.laws.iter().zip(&self.couplings) {
            w.write_record([
                (law.bond.i + 1).to_string(),
                (law.bond.j + 1).to_string(),
                law.bond.level.to_string(),
                format!("{:e}", law.x),
                format!("{c:e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draw every coupling from the counter-based stream keyed by
/// `(seed, sample_index, bond index)`.
pub fn realize(laws: Arc<BondLaws>, seed: u64, sample_index: u64) -> Result<DisorderRealization> {
    let mut stream = NormalStream::new(seed, sample_index);
    let normals = (0..laws.len()).map(|_| stream.next_normal()).collect();
    realize_with_normals(laws, normals, seed, sample_index)
}

pub fn realize_with_normals(
    laws: Arc<BondLaws>,
    normals: Vec<f64>,
    seed: u64,
    sample_index: u64,
) -> Result<DisorderRealization> {
    if normals.len() != laws.len() {
        return Err(Error::InvalidArgument(format!(
            "{} normals supplied for {} bonds",
            normals.len(),
            laws.len()
        )));
    }
    let mut couplings = Vec::with_capacity(laws.len());
    for (k, (law, z)) in laws.laws.iter().zip(&normals).enumerate() {
        if !(law.x >= 0.0) || !law.x.is_finite() {
            return Err(Error::InvalidArgument(format!("bond {k} has variance {}", law.x)));
        }
        couplings.push(if law.x == 0.0 { 0.0 } else { law.x + law.x.sqrt() * z });
    }
    Ok(DisorderRealization { seed, sample_index, laws, normals, couplings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn long_range_two_sites() {
        let laws = build_long_range(&ModelSpec::long_range(2, 2.0, 1.0)).unwrap();
        assert_eq!(laws.len(), 1);
        assert_eq!(laws.laws[0].x, 4.0);
    }

    #[test]
    fn long_range_direct_formula() {
        let laws = build_long_range(&ModelSpec::long_range(3, 1.5, 0.5)).unwrap();
        let x13 = laws.laws.iter().find(|l| l.bond.i == 0 && l.bond.j == 2).unwrap().x;
        assert_relative_eq!(x13, 0.353_553_390_593_273_8, max_relative = 1e-12);
    }

    #[test]
    fn zero_beta_means_zero_variance() {
        for spec in [ModelSpec::long_range(7, 1.3, 0.0), ModelSpec::dyson(3, 1.25, 0.0)] {
            assert!(spec.laws().unwrap().laws.iter().all(|l| l.x == 0.0));
        }
    }

    #[test]
    fn long_range_rejects_bad_input() {
        assert!(build_long_range(&ModelSpec::long_range(1, 1.5, 1.0)).is_err());
        assert!(build_long_range(&ModelSpec::long_range(4, 0.0, 1.0)).is_err());
        assert!(build_long_range(&ModelSpec::long_range(4, 1.5, -1.0)).is_err());
        assert!(build_long_range(&ModelSpec::dyson(2, 1.5, 1.0)).is_err());
    }

    #[test]
    fn long_range_variance_decays() {
        let laws = build_long_range(&ModelSpec::long_range(10, 1.1, 0.7)).unwrap();
        let row: Vec<f64> =
            laws.laws.iter().filter(|l| l.bond.i == 0).map(|l| l.x).collect();
        assert!(row.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn dyson_single_level() {
        let laws = build_dyson(&ModelSpec::dyson(1, 2.0, 1.0)).unwrap();
        assert_eq!(laws.len(), 4);
        assert!(laws.laws.iter().all(|l| l.x == 0.25));
    }

    #[test]
    fn dyson_level_two_variance() {
        let laws = build_dyson(&ModelSpec::dyson(2, 1.25, 1.0)).unwrap();
        let top: Vec<_> = laws.laws.iter().filter(|l| l.bond.level == 2).collect();
        assert_eq!(top.len(), 16);
        for l in top {
            assert_relative_eq!(l.x, 0.176_776_695_296_636_9, max_relative = 1e-12);
        }
    }

    #[test]
    fn dyson_level_counts() {
        for levels in 1..=5u32 {
            let laws = build_dyson(&ModelSpec::dyson(levels, 1.3, 1.0)).unwrap();
            for q in 1..=levels {
                let count = laws.laws.iter().filter(|l| l.bond.level == q).count();
                assert_eq!(count, (1usize << (levels - q)) << (2 * q));
            }
        }
    }

    #[test]
    fn dyson_without_diagonal() {
        let mut spec = ModelSpec::dyson(2, 1.25, 1.0);
        spec.include_diagonal = false;
        let laws = build_dyson(&spec).unwrap();
        assert_eq!(laws.len(), 24 - 8);
        assert!(laws.laws.iter().all(|l| !l.bond.is_diagonal()));
    }

    #[test]
    fn dyson_override_validation() {
        let ok = ModelSpec::dyson_with_overrides(2, 1.25, 1.0, vec![0.1, 0.2]);
        let laws = build_dyson(&ok).unwrap();
        assert!(laws.laws.iter().filter(|l| l.bond.level == 2).all(|l| l.x == 0.2));
        assert!(build_dyson(&ModelSpec::dyson_with_overrides(2, 1.25, 1.0, vec![0.1])).is_err());
        assert!(build_dyson(&ModelSpec::dyson_with_overrides(2, 1.25, 1.0, vec![0.1, -0.2])).is_err());
        assert!(build_dyson(&ModelSpec::dyson(0, 1.25, 1.0)).is_err());
    }

    #[test]
    fn interpolation_endpoints() {
        let spec = ModelSpec::dyson(3, 1.25, 1.0);
        let base = build_dyson(&spec).unwrap();
        let one = interpolate_dyson(&spec, 1.0).unwrap();
        assert_eq!(&one.laws[..base.len()], &base.laws[..]);
        assert!(one.laws[base.len()..].iter().all(|l| l.x == 0.0));

        let zero = interpolate_dyson(&spec, 0.0).unwrap();
        let x3 = spec.dyson_level_variance(3).unwrap();
        assert!(zero.laws.iter().filter(|l| l.bond.level == 3).all(|l| l.x == 0.0));
        let extras = &zero.laws[base.len()..];
        assert_eq!(extras.len(), 2 * 16);
        assert!(extras.iter().all(|l| l.bond.level == 2 && l.x == 2.0 * x3));
        // each half: extra 2·x_N on top of its own level-(N-1) x_{N-1}
        for half in [0usize, 4] {
            let total: f64 = zero
                .laws
                .iter()
                .filter(|l| l.bond.level == 2 && l.bond.i == half && l.bond.j == half + 3)
                .map(|l| l.x)
                .sum();
            assert_relative_eq!(total, 2.0 * x3 + spec.dyson_level_variance(2).unwrap());
        }
        assert!(interpolate_dyson(&spec, 1.5).is_err());
        assert!(interpolate_dyson(&spec, -0.1).is_err());
    }

    #[test]
    fn interpolation_midpoint() {
        let spec = ModelSpec::dyson(2, 1.25, 1.0);
        let laws = interpolate_dyson(&spec, 0.5).unwrap();
        let top = laws.laws.iter().find(|l| l.bond.level == 2).unwrap();
        assert_relative_eq!(top.x, 0.088_388_347_648_318_44, max_relative = 1e-12);
    }

    #[test]
    fn realization_is_deterministic() {
        let laws = Arc::new(build_dyson(&ModelSpec::dyson(3, 1.25, 1.0)).unwrap());
        let a = realize(laws.clone(), 11, 3).unwrap();
        let b = realize(laws.clone(), 11, 3).unwrap();
        let bits = |r: &DisorderRealization| r.couplings.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = realize(laws, 11, 4).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn realization_matches_keyed_normals() {
        let laws = Arc::new(build_long_range(&ModelSpec::long_range(5, 1.5, 1.0)).unwrap());
        let r = realize(laws.clone(), 99, 12).unwrap();
        for (k, law) in laws.laws.iter().enumerate() {
            let z = crate::rng::keyed_normal(99, 12, k as u64);
            assert_eq!(r.couplings[k].to_bits(), (law.x + law.x.sqrt() * z).to_bits());
        }
    }

    #[test]
    fn zero_variance_bond_is_exactly_zero() {
        let laws = Arc::new(BondLaws {
            n_sites: 2,
            laws: vec![BondLaw { bond: Bond { i: 0, j: 1, level: 0 }, x: 0.0 }],
        });
        for idx in 0..20 {
            assert_eq!(realize(laws.clone(), 1, idx).unwrap().couplings[0], 0.0);
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_bond() {
        let laws = Arc::new(build_dyson(&ModelSpec::dyson(2, 1.25, 1.0)).unwrap());
        let r = realize(laws, 5, 0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 24);
        assert!(text.starts_with("bond_i,bond_j,level,x,coupling\n"));
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = ModelSpec::dyson_with_overrides(3, 1.25, 2.0, vec![0.1, 0.2, 0.3]);
        let text = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
