//! Lazy greedy returns the eager sequence with far fewer gain evaluations.

use std::time::Instant;

use tokcover::{build_tv, build_vv, calibrate, greedy_select_fused, lazy_greedy_select_fused, synth_sample};

fn main() -> tokcover::Result<()> {
    let s = synth_sample(576, 40, 0, 64, 64, 3);
    let tv = calibrate(&build_tv(&s.text, &s.vision_post)?, 0.02)?;
    let vv = calibrate(&build_vv(&s.vision_pre)?, 0.2)?;

    let t = Instant::now();
    let eager = greedy_select_fused(&tv, &vv, 0.5, 64)?;
    let t_eager = t.elapsed();
    let t = Instant::now();
    let lazy = lazy_greedy_select_fused(&tv, &vv, 0.5, 64)?;
    let t_lazy = t.elapsed();

    println!("eager: {:>6} evaluations in {t_eager:?}", eager.gain_evaluations);
    println!("lazy:  {:>6} evaluations in {t_lazy:?}", lazy.gain_evaluations);
    println!("same sequence: {}", eager.selected == lazy.selected);
    println!("first picks: {:?}", &lazy.selected[..8]);
    Ok(())
}
