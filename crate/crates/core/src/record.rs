//! One JSON object per line per processed sample.

use serde::{Deserialize, Serialize};

use crate::config::SelectionResult;
use crate::pipeline::{PipelineOutput, StageTimings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub sample_id: String,
    pub selected: Vec<usize>,
    pub gains: Vec<f64>,
    pub objective_tv: f64,
    pub objective_vv: f64,
    pub objective_fused: f64,
    pub tau_t: f64,
    pub effective_tau_v: f64,
    pub alpha: f64,
    pub gain_evaluations: u64,
    /// Set only when bisection could not bracket the temperature in some crop.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tau_unbracketed: bool,
    /// Per-stage wall time; omitted unless requested so output stays
    /// byte-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ns: Option<StageTimings>,
}

impl ResultRecord {
    pub fn new(sample_id: impl Into<String>, tau_t: f64, alpha: f64, out: &PipelineOutput, timing: bool) -> Self {
        let SelectionResult {
            selected,
            gains,
            objective_tv,
            objective_vv,
            objective_fused,
            effective_tau_v,
            gain_evaluations,
        } = out.result.clone();
        Self {
            sample_id: sample_id.into(),
            selected,
            gains,
            objective_tv,
            objective_vv,
            objective_fused,
            tau_t,
            effective_tau_v,
            alpha,
            gain_evaluations,
            tau_unbracketed: out.unbracketed_crops > 0,
            timing_ns: timing.then_some(out.timings),
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("records contain only finite numbers");
        s.push('\n');
        s
    }
}
