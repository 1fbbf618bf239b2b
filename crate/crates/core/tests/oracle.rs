//! Exact engine against a direct sum over all 2^n configurations.

use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nlglass::exact::{gibbs_exact, GibbsRequest};
use nlglass::model::{realize, CustomBond, DisorderRealization, ModelSpec};

struct Naive {
    log_z: f64,
    corr: Vec<Vec<f64>>,
    /// `(p, r, <S^2>)`
    blocks: Vec<(u32, usize, f64)>,
    bond_energy: Vec<f64>,
}

fn naive(r: &DisorderRealization) -> Naive {
    let n = r.n_sites();
    let spins = |c: usize| -> Vec<f64> { (0..n).map(|i| if c >> i & 1 == 1 { -1.0 } else { 1.0 }).collect() };
    let energy = |s: &[f64]| -> f64 {
        r.laws.laws.iter().zip(&r.couplings).map(|(law, j)| j * s[law.bond.i] * s[law.bond.j]).sum()
    };
    let logs: Vec<f64> = (0..1usize << n).map(|c| energy(&spins(c))).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|l| (l - top).exp()).sum();

    let mut corr = vec![vec![0.0; n]; n];
    let mut bond_energy = vec![0.0; r.couplings.len()];
    let mut blocks = Vec::new();
    let mut p = 0u32;
    while 1usize << p <= n {
        for k in 1..=n >> p {
            blocks.push((p, k, 0.0));
        }
        p += 1;
    }
    for (c, l) in logs.iter().enumerate() {
        let w = (l - top).exp() / z;
        let s = spins(c);
        for i in 0..n {
            for j in 0..n {
                corr[i][j] += w * s[i] * s[j];
            }
        }
        for (b, (law, jb)) in r.laws.laws.iter().zip(&r.couplings).enumerate() {
            bond_energy[b] += w * jb * s[law.bond.i] * s[law.bond.j];
        }
        for (p, k, m2) in blocks.iter_mut() {
            let size = 1usize << *p;
            let sum: f64 = s[(*k - 1) * size..*k * size].iter().sum();
            *m2 += w * sum * sum;
        }
    }
    Naive { log_z: top + z.ln(), corr, blocks, bond_energy }
}

fn compare(spec: &ModelSpec, samples: u64) {
    let laws = Arc::new(spec.laws().unwrap());
    for k in 0..samples {
        let r = realize(laws.clone(), 17, k).unwrap();
        let g = gibbs_exact(&r, &GibbsRequest::everything()).unwrap();
        let o = naive(&r);
        assert_abs_diff_eq!(g.log_z, o.log_z, epsilon = 1e-9 * o.log_z.abs().max(1.0));
        for pc in &g.pair_corr {
            assert_abs_diff_eq!(pc.value, o.corr[pc.i][pc.j], epsilon = 1e-10);
        }
        for b in &g.block_m2 {
            let (_, _, m2) = o.blocks.iter().find(|x| x.0 == b.p && x.1 == b.r).expect("same layout");
            assert_abs_diff_eq!(b.m2, *m2, epsilon = 1e-9 * m2.max(1.0));
            assert_abs_diff_eq!(b.normalized, m2 / 4f64.powi(b.p as i32), epsilon = 1e-10);
        }
        assert_eq!(g.block_m2.len(), o.blocks.len());
        for (e, want) in g.bond_energy.iter().zip(&o.bond_energy) {
            assert_abs_diff_eq!(*e, *want, epsilon = 1e-9 * want.abs().max(1.0));
        }
    }
}

#[test]
fn dyson_levels_one_to_three() {
    for levels in 1..=3 {
        compare(&ModelSpec::dyson(levels, 1.25, 1.3), 5);
    }
}

#[test]
fn long_range_odd_and_even_sizes() {
    for sites in [3, 5, 8, 11] {
        compare(&ModelSpec::long_range(sites, 1.4, 0.7), 3);
    }
}

#[test]
fn long_range_twelve_sites() {
    compare(&ModelSpec::long_range(12, 1.1, 0.5), 1);
}

#[test]
fn custom_frustrated_triangle() {
    let bonds = vec![
        CustomBond { i: 0, j: 1, variance: 1.0 },
        CustomBond { i: 1, j: 2, variance: 2.0 },
        CustomBond { i: 0, j: 2, variance: 0.5 },
    ];
    compare(&ModelSpec::custom(3, bonds, 1.5), 10);
}

#[test]
fn strong_coupling_stays_finite() {
    compare(&ModelSpec::dyson(3, 1.25, 12.0), 3);
}
