//! Text-vision and vision-vision coverage fused into one objective, on a
//! seeded synthetic sample.

use tokcover::{
    build_tv, build_vv, calibrate, greedy_select, greedy_select_fused, synth_sample,
    types::DEFAULT_EPSILON,
};

fn main() -> tokcover::Result<()> {
    // a narrow pre-projection width makes the vision tokens cluster
    let s = synth_sample(48, 10, 0, 3, 24, 7);
    let text = s.text.normalize(DEFAULT_EPSILON)?;
    let tv = calibrate(&build_tv(&text, &s.vision_post)?, 0.02)?;
    let vv = calibrate(&build_vv(&s.vision_pre)?, 0.2)?;

    let k = 8;
    let text_only = greedy_select(&tv, k);
    let vision_only = greedy_select(&vv, k);
    println!("text-vision only   {:?}", text_only.selected);
    println!("vision-vision only {:?}", vision_only.selected);
    for alpha in [0.0, 0.5, 5.0] {
        let r = greedy_select_fused(&tv, &vv, alpha, k)?;
        println!(
            "alpha {alpha:<4} {:?}  tv {:.4}  vv {:.4}  fused {:.4}",
            r.selected, r.objective_tv, r.objective_vv, r.objective_fused
        );
    }
    Ok(())
}
