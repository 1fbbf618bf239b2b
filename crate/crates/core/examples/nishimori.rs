//! Disorder-averaged gauge identities: E<s_i s_j> = E<s_i s_j>^2 and the
//! closed-form internal energy.

use nlglass::model::ModelSpec;
use nlglass::verify::{check_internal_energy, check_nishimori_identity, VerifyPolicy};

fn main() -> nlglass::error::Result<()> {
    let policy = VerifyPolicy::default().with_samples(4000).with_seed(1);
    let spec = ModelSpec::dyson(3, 1.25, 1.0);
    for pair in [(0, 1), (0, 7)] {
        println!("{}", check_nishimori_identity(&spec, pair, &policy)?.summary_line());
    }
    println!("{}", check_internal_energy(&spec, &policy)?.summary_line());
    Ok(())
}
