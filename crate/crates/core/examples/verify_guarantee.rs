//! Audit of the greedy guarantee against exhaustive search on random
//! calibrated instances.

use tokcover::verify::{run_verify, VerifyConfig};

fn main() -> tokcover::Result<()> {
    let cfg = VerifyConfig { trials: 100, seed: 42, ..VerifyConfig::default() };
    let report = run_verify(&cfg)?;
    println!("{report}");
    Ok(())
}
