//! Choosing the visual temperature so both coverage terms sit on the same
//! scale: grid search on the second-largest entry, and bisection.

use tokcover::similarity::kth_row_mean;
use tokcover::{adapt_tau_bisection, adapt_tau_grid_kth, build_tv, build_vv, calibrate, synth_sample};

fn main() -> tokcover::Result<()> {
    let s = synth_sample(64, 12, 0, 16, 16, 5);
    let tv = calibrate(&build_tv(&s.text, &s.vision_post)?, 0.02)?;
    let vv = build_vv(&s.vision_pre)?;
    println!("full-set text coverage {:.4}", kth_row_mean(&tv, 1));

    for tau in [0.05, 0.1, 0.15, 0.2] {
        let cal = calibrate(&vv, tau)?;
        println!(
            "tau_v {tau:<5} vision coverage {:.4}  second-largest {:.4}",
            kth_row_mean(&cal, 1),
            kth_row_mean(&cal, 2)
        );
    }
    let grid = adapt_tau_grid_kth(&tv, &vv, 2, &[0.05, 0.1, 0.15, 0.2])?;
    println!("grid (k=2) picks {grid}");

    let search = adapt_tau_bisection(&tv, &vv, 0.02, 0.2, 1e-4)?;
    println!(
        "bisection: tau {:.5} gap {:+.2e} after {} steps (bracketed: {})",
        search.tau, search.gap, search.iterations, search.bracketed
    );
    Ok(())
}
