//! Randomized audit of the greedy guarantee, lazy/eager agreement and
//! submodularity on small instances where exhaustive search is cheap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{
    check_submodular, exhaustive_opt, greedy_run, lazy_greedy_run, Objective, RunOutcome,
    SubmodularReport,
};
use crate::error::Result;
use crate::pipeline::synth_sample;
use crate::similarity::{build_tv, build_vv, calibrate};
use crate::types::SimilarityMatrix;

/// `1 - 1/e`.
pub const GREEDY_BOUND: f64 = 1.0 - 1.0 / std::f64::consts::E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    pub max_n: usize,
    pub max_k: usize,
    /// Submodularity chains sampled per trial and objective.
    pub chains_per_trial: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0,
            max_n: 12,
            max_k: 4,
            chains_per_trial: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub min_ratio_single: f64,
    pub min_ratio_fused: f64,
    pub bound_violations: usize,
    pub equivalence_failures: usize,
    pub submodular: SubmodularReport,
}

impl VerifyReport {
    pub fn min_ratio(&self) -> f64 {
        self.min_ratio_single.min(self.min_ratio_fused)
    }

    pub fn passed(&self) -> bool {
        self.bound_violations == 0 && self.equivalence_failures == 0 && self.submodular.is_clean()
    }
}

/// A calibrated random instance: text-vision and vision-vision matrices over
/// the same `n` sources, plus the fusion weight.
#[derive(Debug, Clone)]
pub struct Instance {
    pub tv: SimilarityMatrix,
    pub vv: SimilarityMatrix,
    pub alpha: f64,
    pub k: usize,
}

/// Draws `m, n` in `1..=max_n` and `k` in `1..=max_k`, random embeddings in
/// a low dimension and log-uniform temperatures in `[0.01, 1]`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize) -> Result<Instance> {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_n);
    let k = rng.random_range(1..=max_k);
    let dim = rng.random_range(2..=8);
    let sample = synth_sample(n, m, 0, dim, dim, rng.random());
    let tau = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-2.0..=0.0));
    let tv = calibrate(&build_tv(&sample.text, &sample.vision_post)?, tau(rng))?;
    let vv = calibrate(&build_vv(&sample.vision_pre)?, tau(rng))?;
    let alpha = rng.random_range(0.0..=1.0);
    Ok(Instance { tv, vv, alpha, k })
}

fn ratio(value: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        value / opt
    } else {
        1.0
    }
}

/// Runs the audit with the library's eager greedy.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    run_verify_with(cfg, &greedy_run)
}

/// Runs the audit with `select` standing in for the eager greedy, so a
/// faulty selector can be checked to be caught.
pub fn run_verify_with(
    cfg: &VerifyConfig,
    select: &dyn Fn(&Objective, usize) -> RunOutcome,
) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = VerifyReport {
        trials: cfg.trials,
        min_ratio_single: f64::INFINITY,
        min_ratio_fused: f64::INFINITY,
        bound_violations: 0,
        equivalence_failures: 0,
        submodular: SubmodularReport::default(),
    };
    for _ in 0..cfg.trials {
        let inst = random_instance(&mut rng, cfg.max_n.max(1), cfg.max_k.max(1))?;
        let single = Objective::single(&inst.tv);
        let fused = Objective::fused(&inst.tv, &inst.vv, inst.alpha)?;
        for (obj, is_fused) in [(&single, false), (&fused, true)] {
            let eager = select(obj, inst.k);
            let lazy = lazy_greedy_run(obj, inst.k);
            if eager.selected != lazy.selected {
                report.equivalence_failures += 1;
            }
            let (_, opt) = exhaustive_opt(obj, inst.k)?;
            let value = obj.value(&eager.selected)?;
            if value < GREEDY_BOUND * opt {
                report.bound_violations += 1;
            }
            let r = ratio(value, opt);
            let slot = if is_fused {
                &mut report.min_ratio_fused
            } else {
                &mut report.min_ratio_single
            };
            *slot = slot.min(r);
            let sub = check_submodular(obj, cfg.chains_per_trial, rng.random())?;
            report.submodular.merge(&sub);
        }
    }
    Ok(report)
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "trials                 {}", self.trials)?;
        writeln!(f, "min ratio (text)       {:.6}", self.min_ratio_single)?;
        writeln!(f, "min ratio (fused)      {:.6}", self.min_ratio_fused)?;
        writeln!(f, "bound (1 - 1/e)        {GREEDY_BOUND:.6}")?;
        writeln!(f, "bound violations       {}", self.bound_violations)?;
        writeln!(f, "lazy/eager mismatches  {}", self.equivalence_failures)?;
        writeln!(f, "chains checked         {}", self.submodular.trials)?;
        writeln!(f, "submodular violations  {}", self.submodular.submodular_violations)?;
        writeln!(f, "monotone violations    {}", self.submodular.monotone_violations)?;
        write!(f, "result                 {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}
