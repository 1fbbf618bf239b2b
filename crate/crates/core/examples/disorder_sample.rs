//! Draw a disorder realization and print its bond table. The same seed and
//! index always give the same table.

use std::sync::Arc;

use nlglass::model::{realize, ModelSpec};

fn main() -> nlglass::error::Result<()> {
    let laws = Arc::new(ModelSpec::long_range(6, 1.3, 0.8).laws()?);
    let r = realize(laws.clone(), 2024, 3)?;
    r.write_csv(std::io::stdout())?;

    let again = realize(laws, 2024, 3)?;
    assert_eq!(r.couplings, again.couplings);
    Ok(())
}
