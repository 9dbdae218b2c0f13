//! Vision-token selection by maximum coverage.
//!
//! Given text-query token embeddings and the vision tokens of an image, the
//! crate scores how well a subset of vision tokens covers the text (through
//! post-projection features) and the image itself (through pre-projection
//! features), calibrates both similarity matrices with a temperature softmax
//! so they are comparable, and greedily picks the subset that maximizes
//!
//! ```text
//! f(S) = coverage(S; text-vision) + alpha * coverage(S; vision-vision)
//! coverage(S; M) = mean over target rows i of max_{j in S} M[i][j]
//! ```
//!
//! The objective is monotone submodular, so greedy selection is within
//! `1 - 1/e` of optimal; [`verify`] checks this against exhaustive search.
//!
//! Module map:
//!
//! - [`types`]: token and similarity matrices, normalization
//! - [`similarity`]: matrix construction, calibration, pooling, temperature search
//! - [`coverage`]: the objective, eager and lazy greedy, exhaustive oracle
//! - [`pipeline`]: per-sample selection, multi-crop budgets, image-contribution metric
//! - [`dump`], [`record`], [`cli`]: the binary dump format, output records and CLI
//!
//! See `examples/` for one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod coverage;
pub mod dump;
pub mod error;
pub mod pipeline;
pub mod record;
pub mod similarity;
pub mod types;
pub mod verify;

pub use config::{
    AdaptiveTau, Budget, CoverageConfig, CropStrategy, MaxRule, Mode, Pooling, SelectionResult,
};
pub use coverage::{
    check_submodular, coverage_value, exhaustive_opt, fused_value, greedy_select,
    greedy_select_fused, lazy_greedy_select, lazy_greedy_select_fused, Objective,
};
pub use dump::{read_dump, write_dump};
pub use error::{Error, Result};
pub use pipeline::{ic_metric, plan_budget, select_tokens, synth_sample, BudgetPlan, SampleInput};
pub use similarity::{
    adapt_tau_bisection, adapt_tau_grid_kth, build_tv, build_vv, calibrate, concat_agent,
    pool_post, pool_pre, PoolMethod, WordSpans,
};
pub use types::{Role, SimKind, SimilarityMatrix, TokenMatrix};
