//! Pooling subword tokens into words, before or after the similarity.

use tokcover::pipeline::synth_word_spans;
use tokcover::types::DEFAULT_EPSILON;
use tokcover::{
    build_tv, pool_post, pool_pre, select_tokens, synth_sample, CoverageConfig, MaxRule, PoolMethod, Pooling,
};

fn main() -> tokcover::Result<()> {
    let spans = synth_word_spans(14, 2);
    let s = synth_sample(40, 14, 0, 16, 16, 9).with_word_spans(spans.clone())?;
    println!("{} subword tokens in {} words: {:?}", spans.rows(), spans.len(), spans.as_slice());

    let pre = pool_pre(&s.text, &spans, PoolMethod::First, MaxRule::ElementWise, DEFAULT_EPSILON)?;
    let a = build_tv(&pre, &s.vision_post)?;
    let b = pool_post(&build_tv(&s.text, &s.vision_post)?, &spans, PoolMethod::First)?;
    println!("First pooling before == after similarity: {}", a == b);

    for pooling in [Pooling::None, Pooling::PreMean, Pooling::PreMax, Pooling::PostMean, Pooling::PostMax] {
        let cfg = CoverageConfig { pooling, ..CoverageConfig::default().with_budget(6) };
        println!("{pooling:?}: {:?}", select_tokens(&s, &cfg)?.selected);
    }
    Ok(())
}
