//! Replica exchange over a temperature ladder ending at the target beta.

use std::sync::Arc;

use nlglass::mc::{tempering_run, MCConfig, MCRequest};
use nlglass::model::{realize, ModelSpec};

fn main() -> nlglass::error::Result<()> {
    let spec = ModelSpec::long_range(16, 1.2, 0.3);
    let r = realize(Arc::new(spec.laws()?), 5, 0)?;
    let config = MCConfig::new(40_000, 4_000, 9).with_ladder(vec![0.1, 0.15, 0.2, 0.25, 0.3]);

    let est = tempering_run(&r, &spec, &config, &MCRequest::blocks())?;
    println!("swap acceptance per rung pair: {:?}", est.swap_acceptance);
    for l in &est.levels {
        println!("f({}) = {:.4} +- {:.4}", l.p, l.normalized.mean, l.normalized.se);
    }
    Ok(())
}
