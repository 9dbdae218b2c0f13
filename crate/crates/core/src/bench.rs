//! Timing harness comparing eager and lazy greedy on synthetic samples.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{DEFAULT_ALPHA, DEFAULT_TAU_T, DEFAULT_TAU_V};
use crate::coverage::{greedy_run, lazy_greedy_run, Objective};
use crate::error::{Error, Result};
use crate::pipeline::synth_sample;
use crate::similarity::{build_tv, build_vv, calibrate};
use crate::types::DEFAULT_EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    /// Width of pre-projection rows; defaults to `dim`.
    pub dim_pre: Option<usize>,
    pub budget: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 576,
            m: 40,
            dim: 4096,
            dim_pre: None,
            budget: 64,
            reps: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p95_ns: u64,
}

impl Summary {
    fn of(samples: &mut [u64]) -> Self {
        samples.sort_unstable();
        let pick = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
        Self {
            mean_ns: samples.iter().sum::<u64>() as f64 / samples.len() as f64,
            p50_ns: pick(0.5),
            p95_ns: pick(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub prepare: Summary,
    pub similarity: Summary,
    pub calibrate: Summary,
    pub eager_select: Summary,
    pub lazy_select: Summary,
    pub eager_evaluations: u64,
    pub lazy_evaluations: u64,
    /// Lazy selection; identical across reps and to the eager one.
    pub selected: Vec<usize>,
    pub lazy_matches_eager: bool,
}

fn ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

/// Times each stage of a multimodal selection `reps` times on one seeded sample.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.reps == 0 || cfg.n == 0 || cfg.dim == 0 {
        return Err(Error::InvalidConfig("bench needs n, dim and reps >= 1".into()));
    }
    let sample = synth_sample(cfg.n, cfg.m, 0, cfg.dim_pre.unwrap_or(cfg.dim), cfg.dim, cfg.seed);
    let mut times = [(); 5].map(|_| Vec::with_capacity(cfg.reps));
    let mut selected: Option<Vec<usize>> = None;
    let mut consistent = true;
    let (mut eager_evals, mut lazy_evals) = (0, 0);
    for _ in 0..cfg.reps {
        let t = Instant::now();
        let text = sample.text.normalize(DEFAULT_EPSILON)?;
        let pre = sample.vision_pre.normalize(DEFAULT_EPSILON)?;
        let post = sample.vision_post.normalize(DEFAULT_EPSILON)?;
        times[0].push(ns(t));

        let t = Instant::now();
        let tv_raw = build_tv(&text, &post)?;
        let vv_raw = build_vv(&pre)?;
        times[1].push(ns(t));

        let t = Instant::now();
        let tv = calibrate(&tv_raw, DEFAULT_TAU_T)?;
        let vv = calibrate(&vv_raw, DEFAULT_TAU_V)?;
        times[2].push(ns(t));

        let obj = Objective::fused(&tv, &vv, DEFAULT_ALPHA)?;
        let t = Instant::now();
        let eager = greedy_run(&obj, cfg.budget);
        times[3].push(ns(t));
        let t = Instant::now();
        let lazy = lazy_greedy_run(&obj, cfg.budget);
        times[4].push(ns(t));

        consistent &= eager.selected == lazy.selected;
        eager_evals = eager.gain_evaluations;
        lazy_evals = lazy.gain_evaluations;
        match &selected {
            None => selected = Some(lazy.selected),
            Some(prev) => consistent &= *prev == lazy.selected,
        }
    }
    let [mut a, mut b, mut c, mut d, mut e] = times;
    Ok(BenchReport {
        config: cfg.clone(),
        prepare: Summary::of(&mut a),
        similarity: Summary::of(&mut b),
        calibrate: Summary::of(&mut c),
        eager_select: Summary::of(&mut d),
        lazy_select: Summary::of(&mut e),
        eager_evaluations: eager_evals,
        lazy_evaluations: lazy_evals,
        selected: selected.unwrap_or_default(),
        lazy_matches_eager: consistent,
    })
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "n={} m={} dim={} dim_pre={} budget={} reps={}",
            c.n,
            c.m,
            c.dim,
            c.dim_pre.unwrap_or(c.dim),
            c.budget,
            c.reps
        )?;
        writeln!(f, "{:<14}{:>14}{:>14}{:>14}", "stage", "mean ms", "p50 ms", "p95 ms")?;
        let rows = [
            ("prepare", &self.prepare),
            ("similarity", &self.similarity),
            ("calibrate", &self.calibrate),
            ("eager select", &self.eager_select),
            ("lazy select", &self.lazy_select),
        ];
        for (name, s) in rows {
            writeln!(
                f,
                "{name:<14}{:>14.3}{:>14.3}{:>14.3}",
                s.mean_ns / 1e6,
                s.p50_ns as f64 / 1e6,
                s.p95_ns as f64 / 1e6
            )?;
        }
        writeln!(f, "gain evaluations  eager={} lazy={}", self.eager_evaluations, self.lazy_evaluations)?;
        write!(f, "lazy matches eager  {}", self.lazy_matches_eager)
    }
}
