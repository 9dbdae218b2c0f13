//! Selection settings and results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TAU_T: f64 = 0.02;
pub const DEFAULT_TAU_V: f64 = 0.2;
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Text temperature used for Qwen-style models.
pub const QWEN_TAU_T: f64 = 0.01;
pub const DEFAULT_TAU_GRID: [f64; 4] = [0.05, 0.1, 0.15, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    TextVisionOnly,
    VisionVisionOnly,
    Multimodal,
}

/// How the visual temperature is chosen per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AdaptiveTau {
    Off,
    /// Bisection on `(tau_t, tau_v]` using the full-set row maxima.
    Bisection { tol: f64 },
    /// Grid search using the `k`-th largest entry of each vision row.
    GridKth { k: usize, grid: Vec<f64> },
}

impl AdaptiveTau {
    pub fn default_grid() -> Self {
        AdaptiveTau::GridKth {
            k: 2,
            grid: DEFAULT_TAU_GRID.to_vec(),
        }
    }

    pub fn default_bisection() -> Self {
        AdaptiveTau::Bisection { tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pooling {
    None,
    PreMean,
    PreMax,
    PreFirst,
    PostMean,
    PostMax,
    PostFirst,
}

/// Which row wins when max-pooling token embeddings before similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MaxRule {
    /// Element-wise maximum over the word's subword rows, renormalized.
    #[default]
    ElementWise,
    /// The whole subword row holding the single largest feature value.
    PeakFeature,
}

/// Token budget: an absolute count, or a fixed ratio `max_budget / max_tokens`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Budget {
    Tokens(usize),
    Ratio { max_budget: usize, max_tokens: usize },
}

/// Selection strategy for inputs made of several image crops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CropStrategy {
    /// Independent greedy within each crop under its planned share.
    #[default]
    PerCrop,
    /// One greedy across all crops with the realized total budget.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub tau_t: f64,
    pub tau_v: f64,
    pub alpha: f64,
    pub budget: Budget,
    pub mode: Mode,
    pub adaptive_tau: AdaptiveTau,
    pub pooling: Pooling,
    pub max_rule: MaxRule,
    pub crop_strategy: CropStrategy,
    pub epsilon: f64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            tau_t: DEFAULT_TAU_T,
            tau_v: DEFAULT_TAU_V,
            alpha: DEFAULT_ALPHA,
            budget: Budget::Tokens(64),
            mode: Mode::Multimodal,
            adaptive_tau: AdaptiveTau::Off,
            pooling: Pooling::None,
            max_rule: MaxRule::ElementWise,
            crop_strategy: CropStrategy::PerCrop,
            epsilon: crate::types::DEFAULT_EPSILON,
        }
    }
}

impl CoverageConfig {
    /// Defaults with the lower text temperature used for Qwen-style models.
    pub fn qwen() -> Self {
        Self {
            tau_t: QWEN_TAU_T,
            ..Self::default()
        }
    }

    pub fn with_budget(mut self, k: usize) -> Self {
        self.budget = Budget::Tokens(k);
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_t > 0.0) {
            return Err(Error::NonPositiveTau(self.tau_t));
        }
        if !(self.tau_v > 0.0) {
            return Err(Error::NonPositiveTau(self.tau_v));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be a non-negative number, got {}",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if let Budget::Ratio {
            max_budget,
            max_tokens,
        } = self.budget
        {
            if max_tokens == 0 || max_budget > max_tokens {
                return Err(Error::BudgetExceedsTokens {
                    budget: max_budget,
                    tokens: max_tokens,
                });
            }
        }
        match &self.adaptive_tau {
            AdaptiveTau::Off => {}
            AdaptiveTau::Bisection { tol } => {
                if !(*tol > 0.0) {
                    return Err(Error::InvalidConfig("bisection tolerance must be positive".into()));
                }
                if !(self.tau_t < self.tau_v) {
                    return Err(Error::InvalidConfig(
                        "bisection searches (tau_t, tau_v] and needs tau_t < tau_v".into(),
                    ));
                }
            }
            AdaptiveTau::GridKth { k, grid } => {
                if *k < 2 {
                    return Err(Error::InvalidConfig("grid search needs k >= 2".into()));
                }
                validate_grid(grid)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("temperature grid is empty".into()));
    }
    if grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidConfig("grid temperatures must be positive".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig(
            "temperature grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Outcome of one greedy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Source indices in the order they were picked.
    pub selected: Vec<usize>,
    /// Marginal gain of each pick.
    pub gains: Vec<f64>,
    pub objective_tv: f64,
    pub objective_vv: f64,
    pub objective_fused: f64,
    pub effective_tau_v: f64,
    /// Number of single-candidate gain evaluations performed.
    pub gain_evaluations: u64,
}
