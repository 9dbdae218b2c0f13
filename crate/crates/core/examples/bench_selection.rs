//! Stage timings and gain-evaluation counts for one synthetic sample.

use tokcover::bench::{run_bench, BenchConfig};

fn main() -> tokcover::Result<()> {
    let cfg = BenchConfig { reps: 3, ..BenchConfig::default() };
    println!("{}", run_bench(&cfg)?);
    Ok(())
}
