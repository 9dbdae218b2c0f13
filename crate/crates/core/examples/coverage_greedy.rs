//! Greedy maximum coverage on a small hand-written matrix, checked against
//! exhaustive search.

use tokcover::{coverage_value, exhaustive_opt, greedy_select, Objective, SimKind, SimilarityMatrix};

fn main() -> tokcover::Result<()> {
    // rows are text tokens, columns are candidate vision tokens
    let m = SimilarityMatrix::from_rows(
        SimKind::CalibratedTV,
        &[
            [0.9, 0.1, 0.8, 0.0, 0.3],
            [0.1, 0.9, 0.8, 0.0, 0.3],
            [0.0, 0.2, 0.1, 0.7, 0.3],
        ],
    )?;

    for k in 1..=3 {
        let res = greedy_select(&m, k);
        let (best, opt) = exhaustive_opt(&Objective::single(&m), k)?;
        println!(
            "k={k}: greedy {:?} gains {:.3?} value {:.4} | optimum {best:?} value {opt:.4}",
            res.selected,
            res.gains,
            res.objective_tv
        );
    }
    println!("f({{0, 1, 3}}) = {:.4}", coverage_value(&[0, 1, 3], &m)?);
    Ok(())
}
