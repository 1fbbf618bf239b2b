//! Exact Gibbs averages for one disorder realization of a 3-level Dyson model.

use std::sync::Arc;

use nlglass::exact::{gibbs_exact, GibbsRequest};
use nlglass::model::{realize, ModelSpec};

fn main() -> nlglass::error::Result<()> {
    let spec = ModelSpec::dyson(3, 1.25, 1.0);
    let r = realize(Arc::new(spec.laws()?), 7, 0)?;
    let g = gibbs_exact(&r, &GibbsRequest::everything())?;

    println!("log Z = {:.6}", g.log_z);
    for (i, j) in [(0, 1), (0, 3), (0, 7)] {
        println!("<s{} s{}> = {:+.6}", i + 1, j + 1, g.corr(i, j).unwrap());
    }
    for p in 0..=3 {
        println!("f({p}) = {:.6}", g.mean_normalized(p).unwrap());
    }
    Ok(())
}
