//! Below the threshold, E<s_1 s_L> on a chain of L sites stays under the
//! closed-form envelope.

use nlglass::theory::{thm3_correlation_bound, thm3_threshold};
use nlglass::verify::{check_thm3_decay, VerifyPolicy};

fn main() -> nlglass::error::Result<()> {
    let alpha = 1.25;
    let beta = 0.5 * thm3_threshold(alpha)?;
    println!("beta {beta:.5}: E<s_1 s_L> <= {:.5} for every L", thm3_correlation_bound(beta, alpha)?);
    let policy = VerifyPolicy::default().with_samples(1000).with_seed(2);
    println!("{}", check_thm3_decay(&[6, 8, 10], alpha, beta, &policy)?.summary_line());
    Ok(())
}
