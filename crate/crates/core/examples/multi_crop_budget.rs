//! Fixed-ratio budgets for multi-crop inputs: each crop keeps the same share
//! of its tokens and is selected independently.

use tokcover::{plan_budget, select_tokens, synth_sample, Budget, CoverageConfig, CropStrategy};

fn main() -> tokcover::Result<()> {
    for crops in [vec![576; 5], vec![576; 4], vec![576, 288]] {
        let plan = plan_budget(&crops, 160, 2880)?;
        println!("{} crops: per crop {:?}, total {}", crops.len(), plan.per_crop, plan.realized());
    }

    let sample = synth_sample(60, 6, 0, 16, 16, 4).with_crop_sizes(vec![20, 40])?;
    let budget = Budget::Ratio { max_budget: 12, max_tokens: 60 };
    for crop_strategy in [CropStrategy::PerCrop, CropStrategy::Global] {
        let cfg = CoverageConfig { budget, crop_strategy, ..CoverageConfig::default() };
        let r = select_tokens(&sample, &cfg)?;
        let first = r.selected.iter().filter(|&&j| j < 20).count();
        println!("{crop_strategy:?}: {} tokens, {first} from crop 0: {:?}", r.selected.len(), r.selected);
    }
    Ok(())
}
