//! How much a benchmark depends on the image: relative gain of the full
//! model over the same model with no vision tokens.

use tokcover::ic_metric;

fn main() -> tokcover::Result<()> {
    let rows = [
        ("MMB", 64.7, 19.33),
        ("POPE", 85.9, 44.64),
        ("MME", 1862.0, 970.89),
        ("SEED-I", 66.14, 37.03),
        ("GQA", 61.9, 37.65),
        ("TextVQA", 58.2, 41.66),
        ("SQA", 69.5, 56.92),
        ("MMMU", 36.3, 33.33),
    ];
    println!("{:<8} {:>8} {:>8} {:>7}", "task", "all", "zero", "IC");
    for (task, all, zero) in rows {
        println!("{task:<8} {all:>8} {zero:>8} {:>7.3}", ic_metric(all, zero)?);
    }
    Ok(())
}
