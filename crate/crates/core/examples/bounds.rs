//! Closed-form side: the lower bound series, its validity region and the
//! high-temperature decay threshold.

use nlglass::theory::{thm3_threshold, zeta_partial, Theorem1Report, ZETA_TOL};

fn main() -> nlglass::error::Result<()> {
    for alpha in [1.1, 1.25, 1.4] {
        let z = zeta_partial(alpha, ZETA_TOL)?;
        println!("alpha {alpha}: zeta in [{:.8}, {:.8}], decay below beta = {:.5}", z.lower, z.upper, thm3_threshold(alpha)?);
        for beta in [1.0, 100.0, 1e4] {
            let r = Theorem1Report::evaluate(beta, alpha);
            println!("  beta {beta:>7}: total {:+.4e}  valid {}", r.total, r.validity.holds());
        }
    }
    Ok(())
}
