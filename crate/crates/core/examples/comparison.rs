//! Hierarchical couplings dominate the long-range ones, so their correlations
//! do too.

use nlglass::theory::{effective_pair_variance, merge_level};
use nlglass::verify::{check_thm2_correlations, check_thm2_couplings, VerifyPolicy};

fn main() -> nlglass::error::Result<()> {
    let (levels, alpha, beta) = (3, 1.25, 1.0);
    for (i, j) in [(0, 1), (0, 3), (3, 4), (0, 7)] {
        let c = effective_pair_variance(levels, merge_level(i, j, levels)?, alpha, beta, j - i)?;
        println!("sites ({}, {}): hierarchical {:.4}  long-range {:.4}", i + 1, j + 1, c.hierarchical, c.long_range);
    }
    let policy = VerifyPolicy::default().with_samples(2000).with_seed(4);
    println!("{}", check_thm2_couplings(12, alpha, &policy)?.summary_line());
    println!("{}", check_thm2_correlations(levels, alpha, beta, &[(0, 1), (0, 7), (3, 4)], &policy)?.summary_line());
    Ok(())
}
