//! Derivative of the interpolated restricted pressure: the integration by
//! parts formula against a central finite difference.

use nlglass::verify::{check_dq_dt, VerifyPolicy};

fn main() -> nlglass::error::Result<()> {
    let policy = VerifyPolicy::default().with_samples(4000).with_seed(6);
    let report = check_dq_dt(2, 1.25, 1.0, 0.5, &policy)?;
    println!("{}", report.summary_line());
    println!("{}", serde_json::to_string_pretty(&report.details)?);
    Ok(())
}
