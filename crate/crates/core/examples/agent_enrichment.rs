//! Appending a helper model's answer tokens to the query so they pull in
//! vision tokens the question alone does not reach.

use tokcover::{select_tokens, CoverageConfig, Mode, Role, SampleInput, TokenMatrix};

fn basis(i: usize) -> [f32; 8] {
    let mut v = [0.0; 8];
    v[i] = 1.0;
    v
}

fn main() -> tokcover::Result<()> {
    let vision: Vec<[f32; 8]> = (0..8).map(basis).collect();
    let query = [basis(0), basis(1), basis(1)];
    let input = SampleInput {
        vision_pre: TokenMatrix::from_rows(Role::VisionPre, &vision)?,
        vision_post: TokenMatrix::from_rows(Role::VisionPost, &vision)?,
        text: TokenMatrix::from_rows(Role::TextQuery, &query)?,
        agent_text: None,
        word_spans: None,
        crop_sizes: None,
    };
    let cfg = CoverageConfig::default().with_budget(3).with_mode(Mode::TextVisionOnly);
    println!("query only:       {:?}", select_tokens(&input, &cfg)?.selected);

    let answer = TokenMatrix::from_rows(Role::AgentText, &[basis(6), basis(7)])?;
    let enriched = input.with_agent(answer)?;
    println!("query + answer:   {:?}", select_tokens(&enriched, &cfg)?.selected);
    Ok(())
}
