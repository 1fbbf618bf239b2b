//! Single-chain Metropolis on one realization, compared against enumeration.

use std::sync::Arc;

use nlglass::exact::{gibbs_exact, GibbsRequest};
use nlglass::mc::{metropolis_run, MCConfig, MCRequest};
use nlglass::model::{realize, ModelSpec};

fn main() -> nlglass::error::Result<()> {
    let spec = ModelSpec::long_range(10, 1.4, 0.6);
    let r = realize(Arc::new(spec.laws()?), 11, 0)?;

    let mc = metropolis_run(&r, &MCConfig::new(50_000, 5_000, 1), &MCRequest::everything())?;
    let ex = gibbs_exact(&r, &GibbsRequest::all_pairs())?;

    println!("acceptance {:.3}", mc.acceptance_rate);
    println!("pair      exact      mc        se");
    for (i, j) in [(0, 1), (0, 5), (0, 9)] {
        let e = mc.corr(i, j).unwrap();
        println!("({:>2},{:>2})  {:+.4}  {:+.4}  {:.4}", i + 1, j + 1, ex.corr(i, j).unwrap(), e.mean, e.se);
    }
    Ok(())
}
