//! Coverage objective and its maximizers.
//!
//! For a target-by-source matrix `M` and a set `S` of source columns, the
//! coverage value is the mean over target rows of `max_{j in S} M[i][j]`,
//! with the empty set scoring 0. The multimodal objective is a weighted sum
//! of such terms sharing one source set. Both are monotone submodular on
//! non-negative matrices, so greedy selection is within `1 - 1/e` of optimal
//! and lazy evaluation of stale gains is exact.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SelectionResult;
use crate::error::{Error, Result};
use crate::types::{SimKind, SimilarityMatrix};

/// Largest number of subsets [`exhaustive_opt`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 2_000_000;

/// Slack allowed by [`check_submodular`] before reporting a violation.
pub const SUBMODULAR_SLACK: f64 = 1e-9;

/// Eager greedy switches to parallel gain sweeps above this many entries.
const PAR_THRESHOLD: usize = 1 << 16;
const PAR_CHUNK: usize = 256;

/// Coverage value of `set` on `m`.
pub fn coverage_value(set: &[usize], m: &SimilarityMatrix) -> Result<f64> {
    for &j in set {
        if j >= m.sources() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: m.sources(),
            });
        }
    }
    if set.is_empty() || m.targets() == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for row in m.iter_rows() {
        total += set.iter().map(|&j| row[j]).fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(total / m.targets() as f64)
}

/// `coverage(set, tv) + alpha * coverage(set, vv)`.
pub fn fused_value(
    set: &[usize],
    tv: &SimilarityMatrix,
    vv: &SimilarityMatrix,
    alpha: f64,
) -> Result<f64> {
    Objective::fused(tv, vv, alpha)?.value(set)
}

/// A weighted sum of coverage terms over a common source set.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    terms: Vec<(&'a SimilarityMatrix, f64)>,
    sources: usize,
}

impl<'a> Objective<'a> {
    pub fn single(m: &'a SimilarityMatrix) -> Self {
        Self {
            terms: vec![(m, 1.0)],
            sources: m.sources(),
        }
    }

    pub fn fused(tv: &'a SimilarityMatrix, vv: &'a SimilarityMatrix, alpha: f64) -> Result<Self> {
        if tv.sources() != vv.sources() {
            return Err(Error::SourceCountMismatch {
                tv: tv.sources(),
                vv: vv.sources(),
            });
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be a non-negative number, got {alpha}"
            )));
        }
        Ok(Self {
            terms: vec![(tv, 1.0), (vv, alpha)],
            sources: tv.sources(),
        })
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn terms(&self) -> &[(&'a SimilarityMatrix, f64)] {
        &self.terms
    }

    /// Value of each term, unweighted.
    pub fn term_values(&self, set: &[usize]) -> Result<Vec<f64>> {
        self.terms
            .iter()
            .map(|(m, _)| coverage_value(set, m))
            .collect()
    }

    pub fn value(&self, set: &[usize]) -> Result<f64> {
        let vals = self.term_values(set)?;
        Ok(self.combine(vals.into_iter()))
    }

    fn combine(&self, parts: impl Iterator<Item = f64>) -> f64 {
        self.terms
            .iter()
            .zip(parts)
            .fold(0.0, |acc, ((_, w), v)| acc + w * v)
    }

    /// True when every term has only non-negative entries. Lazy evaluation
    /// relies on this for the first step, whose gains come from the empty set.
    fn non_negative(&self) -> bool {
        self.terms.iter().all(|(m, _)| m.min_value() >= 0.0)
    }
}

#[inline(always)]
fn positive_part(d: f64) -> f64 {
    if d > 0.0 {
        d
    } else {
        0.0
    }
}

/// Per-target running maxima for one coverage term.
#[derive(Debug, Clone)]
pub struct CoverState {
    best_per_target: Vec<f64>,
    empty: bool,
}

impl CoverState {
    pub fn new(targets: usize) -> Self {
        Self {
            best_per_target: vec![0.0; targets],
            empty: true,
        }
    }

    pub fn best_per_target(&self) -> &[f64] {
        &self.best_per_target
    }

    /// Current coverage value.
    pub fn value(&self) -> f64 {
        if self.empty || self.best_per_target.is_empty() {
            return 0.0;
        }
        self.best_per_target.iter().fold(0.0, |s, &v| s + v) / self.best_per_target.len() as f64
    }

    /// Gain of adding a source whose scores against every target are
    /// `column`, summed over targets in order.
    fn gain(&self, column: &[f64]) -> f64 {
        if column.is_empty() {
            return 0.0;
        }
        let mut acc = 0.0;
        if self.empty {
            for &x in column {
                acc += x;
            }
        } else {
            for (&x, &b) in column.iter().zip(&self.best_per_target) {
                acc += positive_part(x - b);
            }
        }
        acc / column.len() as f64
    }

    /// Gains of every source in `cols`, written to `out`. Each entry is
    /// accumulated exactly as [`CoverState::gain`] does, so the two agree
    /// bit for bit.
    fn sweep(&self, m: &SimilarityMatrix, cols: std::ops::Range<usize>, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let rows = m.targets();
        if rows == 0 {
            return;
        }
        for (i, row) in m.iter_rows().enumerate() {
            let row = &row[cols.clone()];
            if self.empty {
                for (o, &x) in out.iter_mut().zip(row) {
                    *o += x;
                }
            } else {
                let b = self.best_per_target[i];
                for (o, &x) in out.iter_mut().zip(row) {
                    *o += positive_part(x - b);
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= rows as f64);
    }

    fn commit(&mut self, m: &SimilarityMatrix, j: usize) {
        for (i, b) in self.best_per_target.iter_mut().enumerate() {
            let x = m.get(i, j);
            *b = if self.empty { x } else { b.max(x) };
        }
        self.empty = false;
    }
}

struct Greedy<'o, 'a> {
    obj: &'o Objective<'a>,
    states: Vec<CoverState>,
    selected: Vec<usize>,
    taken: Vec<bool>,
    gains: Vec<f64>,
    evaluations: u64,
    /// Column-major copy of each term, for single-candidate evaluation.
    columns: Vec<Vec<f64>>,
}

fn transpose(m: &SimilarityMatrix) -> Vec<f64> {
    let (rows, n) = (m.targets(), m.sources());
    let mut out = vec![0.0; rows * n];
    for (i, row) in m.iter_rows().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            out[j * rows + i] = x;
        }
    }
    out
}

impl<'o, 'a> Greedy<'o, 'a> {
    fn new(obj: &'o Objective<'a>) -> Self {
        Self {
            obj,
            states: obj.terms.iter().map(|(m, _)| CoverState::new(m.targets())).collect(),
            selected: Vec::new(),
            taken: vec![false; obj.sources],
            gains: Vec::new(),
            evaluations: 0,
            columns: Vec::new(),
        }
    }

    fn with_columns(mut self) -> Self {
        self.columns = self.obj.terms.iter().map(|(m, _)| transpose(m)).collect();
        self
    }

    fn gain(&mut self, j: usize) -> f64 {
        self.evaluations += 1;
        let parts = self.obj.terms.iter().zip(&self.states).zip(&self.columns).map(
            |(((m, _), s), cols)| {
                let rows = m.targets();
                s.gain(&cols[j * rows..(j + 1) * rows])
            },
        );
        self.obj.combine(parts)
    }

    fn sweep_all(&mut self, out: &mut [f64], scratch: &mut [Vec<f64>]) {
        let n = self.obj.sources;
        for ((t, st), buf) in self.obj.terms.iter().zip(&self.states).zip(scratch.iter_mut()) {
            let m = t.0;
            if m.targets() * n >= PAR_THRESHOLD {
                buf.par_chunks_mut(PAR_CHUNK).enumerate().for_each(|(c, chunk)| {
                    let start = c * PAR_CHUNK;
                    st.sweep(m, start..start + chunk.len(), chunk);
                });
            } else {
                st.sweep(m, 0..n, buf);
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.obj.combine(scratch.iter().map(|b| b[j]));
        }
        self.evaluations += (n - self.selected.len()) as u64;
    }

    fn take(&mut self, j: usize, gain: f64) {
        for ((m, _), st) in self.obj.terms.iter().zip(self.states.iter_mut()) {
            st.commit(m, j);
        }
        self.taken[j] = true;
        self.selected.push(j);
        self.gains.push(gain);
    }

    fn finish(self) -> (Vec<usize>, Vec<f64>, Vec<f64>, u64) {
        let values = self.states.iter().map(CoverState::value).collect();
        (self.selected, self.gains, values, self.evaluations)
    }
}

/// Eager greedy: every step evaluates every remaining candidate and keeps
/// the largest gain, lowest index first on ties.
pub fn greedy_run(obj: &Objective, k: usize) -> RunOutcome {
    let n = obj.sources;
    let k = k.min(n);
    let mut g = Greedy::new(obj);
    let mut gains = vec![0.0; n];
    let mut scratch = vec![vec![0.0; n]; obj.terms.len()];
    for _ in 0..k {
        g.sweep_all(&mut gains, &mut scratch);
        let mut best: Option<(usize, f64)> = None;
        for (j, &gain) in gains.iter().enumerate() {
            if g.taken[j] {
                continue;
            }
            if best.is_none_or(|(_, b)| gain > b) {
                best = Some((j, gain));
            }
        }
        let (j, gain) = best.expect("k <= n leaves a candidate");
        g.take(j, gain);
    }
    RunOutcome::from(g.finish())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound {
    gain: f64,
    index: usize,
    round: usize,
}

impl Eq for Bound {}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy greedy with a max-heap of stale gains.
///
/// A candidate whose gain was computed in the current round and still sits
/// on top of the heap beats every other candidate's upper bound, so it is
/// the eager choice. Gains only shrink as the per-target maxima grow, and the
/// floating-point gain computation preserves that order exactly, so the
/// selected sequence matches [`greedy_run`] index for index.
pub fn lazy_greedy_run(obj: &Objective, k: usize) -> RunOutcome {
    let n = obj.sources;
    let k = k.min(n);
    let g = Greedy::new(obj);
    if k == 0 {
        return RunOutcome::from(g.finish());
    }
    let mut g = g.with_columns();
    let mut heap: BinaryHeap<Bound> = (0..n)
        .map(|index| Bound {
            gain: g.gain(index),
            index,
            round: 0,
        })
        .collect();
    // With negative scores the empty-set gains are not upper bounds for
    // later rounds, so those bounds are refreshed once after the first pick.
    let refresh_after_first = !obj.non_negative();
    for round in 0..k {
        if round == 1 && refresh_after_first {
            let stale: Vec<usize> = heap.drain().map(|b| b.index).collect();
            heap = stale
                .into_iter()
                .map(|index| Bound {
                    gain: g.gain(index),
                    index,
                    round,
                })
                .collect();
        }
        loop {
            let top = heap.pop().expect("k <= n leaves a candidate");
            if top.round == round {
                g.take(top.index, top.gain);
                break;
            }
            heap.push(Bound {
                gain: g.gain(top.index),
                index: top.index,
                round,
            });
        }
    }
    RunOutcome::from(g.finish())
}

/// Raw greedy output for an arbitrary [`Objective`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub selected: Vec<usize>,
    pub gains: Vec<f64>,
    /// Unweighted value of each term for the final set.
    pub term_values: Vec<f64>,
    pub gain_evaluations: u64,
}

impl From<(Vec<usize>, Vec<f64>, Vec<f64>, u64)> for RunOutcome {
    fn from((selected, gains, term_values, gain_evaluations): (Vec<usize>, Vec<f64>, Vec<f64>, u64)) -> Self {
        Self {
            selected,
            gains,
            term_values,
            gain_evaluations,
        }
    }
}

impl RunOutcome {
    /// Weighted objective value of the selected set.
    pub fn value(&self, obj: &Objective) -> f64 {
        obj.combine(self.term_values.iter().copied())
    }
}

fn single_result(m: &SimilarityMatrix, run: RunOutcome) -> SelectionResult {
    let value = run.term_values[0];
    let is_vv = matches!(m.kind(), SimKind::RawVV | SimKind::CalibratedVV);
    SelectionResult {
        selected: run.selected,
        gains: run.gains,
        objective_tv: if is_vv { 0.0 } else { value },
        objective_vv: if is_vv { value } else { 0.0 },
        objective_fused: value,
        effective_tau_v: if is_vv { m.temperature().unwrap_or(0.0) } else { 0.0 },
        gain_evaluations: run.gain_evaluations,
    }
}

fn fused_result(vv: &SimilarityMatrix, alpha: f64, run: RunOutcome) -> SelectionResult {
    let (tv_value, vv_value) = (run.term_values[0], run.term_values[1]);
    SelectionResult {
        selected: run.selected,
        gains: run.gains,
        objective_tv: tv_value,
        objective_vv: vv_value,
        objective_fused: tv_value + alpha * vv_value,
        effective_tau_v: vv.temperature().unwrap_or(0.0),
        gain_evaluations: run.gain_evaluations,
    }
}

/// Greedy coverage of the target rows of `m` with `k` source columns.
pub fn greedy_select(m: &SimilarityMatrix, k: usize) -> SelectionResult {
    single_result(m, greedy_run(&Objective::single(m), k))
}

/// Greedy maximization of `coverage(tv) + alpha * coverage(vv)`.
pub fn greedy_select_fused(
    tv: &SimilarityMatrix,
    vv: &SimilarityMatrix,
    alpha: f64,
    k: usize,
) -> Result<SelectionResult> {
    let obj = Objective::fused(tv, vv, alpha)?;
    Ok(fused_result(vv, alpha, greedy_run(&obj, k)))
}

pub fn lazy_greedy_select(m: &SimilarityMatrix, k: usize) -> SelectionResult {
    single_result(m, lazy_greedy_run(&Objective::single(m), k))
}

pub fn lazy_greedy_select_fused(
    tv: &SimilarityMatrix,
    vv: &SimilarityMatrix,
    alpha: f64,
    k: usize,
) -> Result<SelectionResult> {
    let obj = Objective::fused(tv, vv, alpha)?;
    Ok(fused_result(vv, alpha, lazy_greedy_run(&obj, k)))
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exact maximizer over all `k`-subsets (`k` clamped to the source count).
/// Returns the lexicographically smallest maximizer.
pub fn exhaustive_opt(obj: &Objective, k: usize) -> Result<(Vec<usize>, f64)> {
    let n = obj.sources;
    let k = k.min(n);
    let subsets = binomial(n, k);
    if subsets > EXHAUSTIVE_LIMIT {
        return Err(Error::InstanceTooLarge { subsets });
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best = (idx.clone(), obj.value(&idx)?);
    // advance to the next combination in lexicographic order
    while let Some(p) = (0..k).rev().find(|&p| idx[p] < n - k + p) {
        idx[p] += 1;
        for q in p + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
        let v = obj.value(&idx)?;
        if v > best.1 {
            best = (idx.clone(), v);
        }
    }
    Ok(best)
}

/// Findings of a randomized submodularity and monotonicity audit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubmodularReport {
    pub trials: usize,
    pub submodular_violations: usize,
    pub monotone_violations: usize,
    /// Largest amount by which either inequality failed (0 if none did).
    pub worst_excess: f64,
}

impl SubmodularReport {
    pub fn is_clean(&self) -> bool {
        self.submodular_violations == 0 && self.monotone_violations == 0
    }

    pub fn merge(&mut self, other: &SubmodularReport) {
        self.trials += other.trials;
        self.submodular_violations += other.submodular_violations;
        self.monotone_violations += other.monotone_violations;
        self.worst_excess = self.worst_excess.max(other.worst_excess);
    }
}

/// Samples chains `A ⊆ B ⊆ N` with `s ∉ B` and checks
/// `f(A+s) - f(A) >= f(B+s) - f(B)` and `f(A) <= f(B)`.
pub fn check_submodular(obj: &Objective, trials: usize, seed: u64) -> Result<SubmodularReport> {
    let n = obj.sources;
    let mut report = SubmodularReport {
        trials,
        ..Default::default()
    };
    if n == 0 {
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let s = rng.random_range(0..n);
        let p_b: f64 = rng.random();
        let p_a: f64 = rng.random();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for j in (0..n).filter(|&j| j != s) {
            if rng.random_bool(p_b) {
                b.push(j);
                if rng.random_bool(p_a) {
                    a.push(j);
                }
            }
        }
        let fa = obj.value(&a)?;
        let fb = obj.value(&b)?;
        a.push(s);
        b.push(s);
        let da = obj.value(&a)? - fa;
        let db = obj.value(&b)? - fb;
        let sub_excess = db - da;
        if sub_excess > SUBMODULAR_SLACK {
            report.submodular_violations += 1;
            report.worst_excess = report.worst_excess.max(sub_excess);
        }
        let mono_excess = fa - fb;
        if mono_excess > SUBMODULAR_SLACK {
            report.monotone_violations += 1;
            report.worst_excess = report.worst_excess.max(mono_excess);
        }
    }
    Ok(report)
}
