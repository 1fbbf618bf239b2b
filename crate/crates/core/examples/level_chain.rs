//! The level-by-level argument: merging the top level, restricted traces,
//! the concentration estimate and the chained lower bound.

use nlglass::theory::level_quantities;
use nlglass::verify::{check_lemma5, check_lemma6, check_lemma7, check_lemma8_chain, VerifyPolicy};

fn main() -> nlglass::error::Result<()> {
    let (alpha, beta) = (1.25, 1.0);
    for n in 1..=4 {
        let q = level_quantities(n, alpha, beta)?;
        println!("N={n}: intervals {}, lipschitz {:.4}, correction {:?}", q.intervals, q.lipschitz, q.correction);
    }

    let policy = VerifyPolicy::default().with_samples(2000).with_seed(3);
    for report in [
        check_lemma5(3, alpha, beta, &policy)?,
        check_lemma6(2, alpha, beta, &policy)?,
        check_lemma7(2, alpha, beta, &policy)?,
        check_lemma8_chain(3, alpha, 8.0, &policy)?,
    ] {
        println!("{}", report.summary_line());
    }
    Ok(())
}
