//! End-to-end token selection for one sample.

use std::ops::Range;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{AdaptiveTau, Budget, CoverageConfig, CropStrategy, Mode, Pooling, SelectionResult};
use crate::coverage::{lazy_greedy_run, Objective};
use crate::error::{Error, Result};
use crate::similarity::{
    adapt_tau_bisection, adapt_tau_grid_kth, build_tv, build_vv, calibrate, concat_agent,
    pool_post, pool_pre, PoolMethod, WordSpans,
};
use crate::types::{Role, TokenMatrix};

/// Everything needed to select vision tokens for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleInput {
    pub vision_pre: TokenMatrix,
    pub vision_post: TokenMatrix,
    pub text: TokenMatrix,
    pub agent_text: Option<TokenMatrix>,
    pub word_spans: Option<WordSpans>,
    /// Tokens per image crop, in source order.
    pub crop_sizes: Option<Vec<usize>>,
}

impl SampleInput {
    /// Number of candidate vision tokens.
    pub fn sources(&self) -> usize {
        self.vision_post.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let roles = [
            (&self.vision_pre, Role::VisionPre),
            (&self.vision_post, Role::VisionPost),
            (&self.text, Role::TextQuery),
        ];
        for (m, role) in roles {
            if m.role() != role {
                return Err(Error::invariant(format!(
                    "expected {role:?} matrix, got {:?}",
                    m.role()
                )));
            }
        }
        if self.vision_pre.rows() != self.vision_post.rows() {
            return Err(Error::invariant(format!(
                "{} pre-projection rows but {} post-projection rows",
                self.vision_pre.rows(),
                self.vision_post.rows()
            )));
        }
        if self.text.dim() != self.vision_post.dim() {
            return Err(Error::DimMismatch {
                expected: self.vision_post.dim(),
                found: self.text.dim(),
            });
        }
        if let Some(agent) = &self.agent_text {
            if agent.role() != Role::AgentText {
                return Err(Error::invariant("agent matrix must have the AgentText role"));
            }
            if agent.dim() != self.text.dim() {
                return Err(Error::DimMismatch {
                    expected: self.text.dim(),
                    found: agent.dim(),
                });
            }
        }
        if let Some(spans) = &self.word_spans {
            if spans.rows() != self.text.rows() {
                return Err(Error::BadSpans(format!(
                    "spans cover {} rows, text has {}",
                    spans.rows(),
                    self.text.rows()
                )));
            }
        }
        if let Some(crops) = &self.crop_sizes {
            if crops.is_empty() || crops.contains(&0) {
                return Err(Error::invariant("crop sizes must be non-empty and positive"));
            }
            let total: usize = crops.iter().sum();
            if total != self.sources() {
                return Err(Error::invariant(format!(
                    "crop sizes sum to {total}, sample has {} vision tokens",
                    self.sources()
                )));
            }
        }
        Ok(())
    }

    pub fn with_word_spans(mut self, spans: WordSpans) -> Result<Self> {
        self.word_spans = Some(spans);
        self.validate()?;
        Ok(self)
    }

    pub fn with_crop_sizes(mut self, crops: Vec<usize>) -> Result<Self> {
        self.crop_sizes = Some(crops);
        self.validate()?;
        Ok(self)
    }

    pub fn with_agent(mut self, agent: TokenMatrix) -> Result<Self> {
        self.agent_text = Some(agent);
        self.validate()?;
        Ok(self)
    }
}

/// Fixed-ratio split of a token budget across image crops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub global_budget: usize,
    pub ratio: f64,
    pub per_crop: Vec<usize>,
}

impl BudgetPlan {
    /// Tokens actually kept across all crops.
    pub fn realized(&self) -> usize {
        self.per_crop.iter().sum()
    }
}

/// Keeps `floor(crop * max_budget / max_tokens)` tokens per crop, at least
/// one per crop when the budget is non-zero.
pub fn plan_budget(crop_sizes: &[usize], max_budget: usize, max_tokens: usize) -> Result<BudgetPlan> {
    if max_budget > max_tokens || max_tokens == 0 {
        return Err(Error::BudgetExceedsTokens {
            budget: max_budget,
            tokens: max_tokens,
        });
    }
    if crop_sizes.is_empty() || crop_sizes.contains(&0) {
        return Err(Error::InvalidConfig("crop sizes must be non-empty and positive".into()));
    }
    let per_crop = crop_sizes
        .iter()
        .map(|&c| {
            let share = (c as u128 * max_budget as u128 / max_tokens as u128) as usize;
            if max_budget > 0 {
                share.clamp(1, c)
            } else {
                0
            }
        })
        .collect();
    Ok(BudgetPlan {
        global_budget: max_budget,
        ratio: max_budget as f64 / max_tokens as f64,
        per_crop,
    })
}

/// Relative gain from vision tokens: `(all - zero) / zero`.
pub fn ic_metric(perf_all: f64, perf_zero: f64) -> Result<f64> {
    if !(perf_zero > 0.0) {
        return Err(Error::ZeroBaseline);
    }
    Ok((perf_all - perf_zero) / perf_zero)
}

/// Wall-clock nanoseconds spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings {
    pub prepare_ns: u64,
    pub similarity_ns: u64,
    pub calibrate_ns: u64,
    pub adapt_ns: u64,
    pub select_ns: u64,
}

impl StageTimings {
    pub fn total_ns(&self) -> u64 {
        self.prepare_ns + self.similarity_ns + self.calibrate_ns + self.adapt_ns + self.select_ns
    }
}

/// Selection plus the bookkeeping gathered on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub result: SelectionResult,
    pub timings: StageTimings,
    /// Visual temperature used in each crop (one entry without crops).
    pub crop_tau_v: Vec<f64>,
    /// Crops where bisection found no sign change and fell back to an endpoint.
    pub unbracketed_crops: usize,
}

fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

fn pool_method(p: Pooling) -> Option<(bool, PoolMethod)> {
    match p {
        Pooling::None => None,
        Pooling::PreMean => Some((true, PoolMethod::Mean)),
        Pooling::PreMax => Some((true, PoolMethod::Max)),
        Pooling::PreFirst => Some((true, PoolMethod::First)),
        Pooling::PostMean => Some((false, PoolMethod::Mean)),
        Pooling::PostMax => Some((false, PoolMethod::Max)),
        Pooling::PostFirst => Some((false, PoolMethod::First)),
    }
}

/// Source ranges and their budgets.
fn plan_ranges(input: &SampleInput, config: &CoverageConfig) -> Result<Vec<(Range<usize>, usize)>> {
    let n = input.sources();
    let crops = input.crop_sizes.clone().unwrap_or_else(|| vec![n]);
    if n == 0 {
        return Ok(vec![(0..0, 0)]);
    }
    let plan = match config.budget {
        Budget::Tokens(k) => plan_budget(&crops, k.min(n), n)?,
        Budget::Ratio {
            max_budget,
            max_tokens,
        } => plan_budget(&crops, max_budget, max_tokens)?,
    };
    let whole = match config.budget {
        Budget::Tokens(k) if input.crop_sizes.is_none() => k.min(n),
        _ => plan.realized(),
    };
    if input.crop_sizes.is_none() || config.crop_strategy == CropStrategy::Global {
        return Ok(vec![(0..n, whole)]);
    }
    let mut start = 0;
    Ok(crops
        .iter()
        .zip(plan.per_crop)
        .map(|(&c, k)| {
            let r = start..start + c;
            start += c;
            (r, k)
        })
        .collect())
}

/// Runs the whole selection for one sample: normalize, pool, append agent
/// rows, build and calibrate similarities, adapt the visual temperature if
/// asked, then greedily pick tokens within each crop's budget.
pub fn select_tokens(input: &SampleInput, config: &CoverageConfig) -> Result<SelectionResult> {
    select_tokens_detailed(input, config).map(|o| o.result)
}

pub fn select_tokens_detailed(input: &SampleInput, config: &CoverageConfig) -> Result<PipelineOutput> {
    config.validate()?;
    input.validate()?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let eps = config.epsilon;
    let vision_pre = input.vision_pre.normalize(eps)?;
    let vision_post = input.vision_post.normalize(eps)?;
    let mut text = input.text.normalize(eps)?;
    let spans = input
        .word_spans
        .clone()
        .unwrap_or_else(|| WordSpans::singletons(text.rows()));
    let pooling = pool_method(config.pooling);
    if let Some((true, method)) = pooling {
        text = pool_pre(&text, &spans, method, config.max_rule, eps)?;
    }
    let agent_rows = match &input.agent_text {
        Some(agent) => {
            let agent = agent.normalize(eps)?;
            text = concat_agent(&text, &agent)?;
            agent.rows()
        }
        None => 0,
    };
    timings.prepare_ns += elapsed_ns(t);

    let needs_tv = config.mode != Mode::VisionVisionOnly || config.adaptive_tau != AdaptiveTau::Off;
    let needs_vv = config.mode != Mode::TextVisionOnly;

    let mut result = SelectionResult {
        selected: Vec::new(),
        gains: Vec::new(),
        objective_tv: 0.0,
        objective_vv: 0.0,
        objective_fused: 0.0,
        effective_tau_v: config.tau_v,
        gain_evaluations: 0,
    };
    let mut crop_tau_v = Vec::new();
    let mut unbracketed_crops = 0;

    for (range, k) in plan_ranges(input, config)? {
        let offset = range.start;
        let t = Instant::now();
        let tv_raw = if needs_tv {
            let post = vision_post.slice_rows(range.clone());
            let mut m = build_tv(&text, &post)?;
            if let Some((false, method)) = pooling {
                // agent rows are not part of any word and pool as singletons
                m = pool_post(&m, &spans.extended(agent_rows), method)?;
            }
            Some(m)
        } else {
            None
        };
        let vv_raw = if needs_vv {
            Some(build_vv(&vision_pre.slice_rows(range.clone()))?)
        } else {
            None
        };
        timings.similarity_ns += elapsed_ns(t);

        let t = Instant::now();
        let tv = tv_raw.as_ref().map(|m| calibrate(m, config.tau_t)).transpose()?;
        timings.calibrate_ns += elapsed_ns(t);

        let t = Instant::now();
        let tau_v = match (&config.adaptive_tau, &tv, &vv_raw) {
            (AdaptiveTau::Bisection { tol }, Some(tv), Some(vv)) => {
                let s = adapt_tau_bisection(tv, vv, config.tau_t, config.tau_v, *tol)?;
                if !s.bracketed {
                    unbracketed_crops += 1;
                }
                s.tau
            }
            (AdaptiveTau::GridKth { k, grid }, Some(tv), Some(vv)) => {
                adapt_tau_grid_kth(tv, vv, *k, grid)?
            }
            _ => config.tau_v,
        };
        timings.adapt_ns += elapsed_ns(t);
        crop_tau_v.push(tau_v);

        let t = Instant::now();
        let vv = vv_raw.as_ref().map(|m| calibrate(m, tau_v)).transpose()?;
        timings.calibrate_ns += elapsed_ns(t);

        let t = Instant::now();
        let (obj, alpha) = match config.mode {
            Mode::TextVisionOnly => (Objective::single(tv.as_ref().expect("tv built")), 0.0),
            Mode::VisionVisionOnly => (Objective::single(vv.as_ref().expect("vv built")), 1.0),
            Mode::Multimodal => (
                Objective::fused(
                    tv.as_ref().expect("tv built"),
                    vv.as_ref().expect("vv built"),
                    config.alpha,
                )?,
                config.alpha,
            ),
        };
        let run = lazy_greedy_run(&obj, k);
        timings.select_ns += elapsed_ns(t);

        let (tv_value, vv_value) = match config.mode {
            Mode::TextVisionOnly => (run.term_values[0], 0.0),
            Mode::VisionVisionOnly => (0.0, run.term_values[0]),
            Mode::Multimodal => (run.term_values[0], run.term_values[1]),
        };
        result.objective_tv += tv_value;
        result.objective_vv += vv_value;
        result.objective_fused += match config.mode {
            Mode::TextVisionOnly => tv_value,
            Mode::VisionVisionOnly => vv_value,
            Mode::Multimodal => tv_value + alpha * vv_value,
        };
        result.selected.extend(run.selected.iter().map(|j| j + offset));
        result.gains.extend(run.gains);
        result.gain_evaluations += run.gain_evaluations;
    }
    result.effective_tau_v = crop_tau_v.iter().sum::<f64>() / crop_tau_v.len().max(1) as f64;

    Ok(PipelineOutput {
        result,
        timings,
        crop_tau_v,
        unbracketed_crops,
    })
}

fn gaussian_unit_rows(
    rng: &mut ChaCha8Rng,
    rows: usize,
    dim: usize,
    role: Role,
) -> TokenMatrix {
    let mut data = Vec::with_capacity(rows * dim);
    let mut row = vec![0.0f64; dim];
    for _ in 0..rows {
        loop {
            row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-6 {
                data.extend(row.iter().map(|v| (v / norm) as f32));
                break;
            }
        }
    }
    TokenMatrix::new(rows, dim, role, data).expect("sized by construction")
}

/// Seeded sample of unit-norm Gaussian rows. No agent rows when `o == 0`;
/// no word spans or crops.
pub fn synth_sample(
    n: usize,
    m: usize,
    o: usize,
    dim_pre: usize,
    dim_post: usize,
    seed: u64,
) -> SampleInput {
    assert!(dim_pre >= 1 && dim_post >= 1, "embedding widths must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vision_pre = gaussian_unit_rows(&mut rng, n, dim_pre, Role::VisionPre);
    let vision_post = gaussian_unit_rows(&mut rng, n, dim_post, Role::VisionPost);
    let text = gaussian_unit_rows(&mut rng, m, dim_post, Role::TextQuery);
    let agent_text = (o > 0).then(|| gaussian_unit_rows(&mut rng, o, dim_post, Role::AgentText));
    SampleInput {
        vision_pre,
        vision_post,
        text,
        agent_text,
        word_spans: None,
        crop_sizes: None,
    }
}

/// Random word segmentation of `rows` tokens into words of 1 to 3 tokens.
pub fn synth_word_spans(rows: usize, seed: u64) -> WordSpans {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spans = Vec::new();
    let mut start = 0;
    while start < rows {
        let len = rng.random_range(1..=3).min(rows - start);
        spans.push((start, start + len));
        start += len;
    }
    WordSpans::new(spans, rows).expect("tiles the rows by construction")
}
