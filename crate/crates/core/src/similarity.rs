//! Raw and calibrated similarity matrices, word pooling, agent-text
//! enrichment and visual temperature adaptation.

use rayon::prelude::*;

use crate::config::{validate_grid, MaxRule};
use crate::error::{Error, Result};
use crate::types::{dot, Role, SimKind, SimilarityMatrix, TokenMatrix};

/// Below this many output entries the matrix builders stay on one thread.
const PAR_THRESHOLD: usize = 1 << 14;

/// Half-open ranges of text-token rows that belong to the same word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSpans {
    spans: Vec<(usize, usize)>,
}

impl WordSpans {
    /// Spans must be non-empty, sorted and tile `0..rows` exactly.
    pub fn new(spans: Vec<(usize, usize)>, rows: usize) -> Result<Self> {
        let mut expected = 0;
        for (i, &(start, end)) in spans.iter().enumerate() {
            if start != expected {
                return Err(Error::BadSpans(format!(
                    "span {i} starts at {start}, expected {expected}"
                )));
            }
            if end <= start {
                return Err(Error::BadSpans(format!("span {i} is empty")));
            }
            expected = end;
        }
        if expected != rows {
            return Err(Error::BadSpans(format!(
                "spans cover {expected} rows, matrix has {rows}"
            )));
        }
        Ok(Self { spans })
    }

    /// One span per row.
    pub fn singletons(rows: usize) -> Self {
        Self {
            spans: (0..rows).map(|i| (i, i + 1)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Total rows covered.
    pub fn rows(&self) -> usize {
        self.spans.last().map_or(0, |s| s.1)
    }

    pub fn as_slice(&self) -> &[(usize, usize)] {
        &self.spans
    }

    /// Appends `extra` singleton spans after the covered rows.
    pub fn extended(&self, extra: usize) -> Self {
        let start = self.rows();
        let mut spans = self.spans.clone();
        spans.extend((start..start + extra).map(|i| (i, i + 1)));
        Self { spans }
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if self.rows() != rows {
            return Err(Error::BadSpans(format!(
                "spans cover {} rows, matrix has {rows}",
                self.rows()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMethod {
    Mean,
    Max,
    First,
}

fn require_role(m: &TokenMatrix, role: Role, what: &str) -> Result<()> {
    if m.role() != role {
        return Err(Error::Shape(format!(
            "{what} expects {role:?} rows, got {:?}",
            m.role()
        )));
    }
    Ok(())
}

/// Rows of the left operand handled per pass over a right-hand row.
const BLOCK: usize = 4;

/// Fills `out` (the rows `first..first + out.len() / n` of a product matrix)
/// with `dot(left[i], right[j])` for `j >= start(i)`.
fn fill_block(
    left: &TokenMatrix,
    right: &TokenMatrix,
    first: usize,
    out: &mut [f64],
    start: impl Fn(usize) -> usize,
) {
    let n = right.rows();
    let rows = out.len() / n;
    if rows == BLOCK {
        let lhs: [&[f32]; BLOCK] = std::array::from_fn(|r| left.row(first + r));
        for j in start(first)..n {
            let d = crate::types::dot_block(lhs, right.row(j));
            for (r, v) in d.into_iter().enumerate() {
                out[r * n + j] = v;
            }
        }
    } else {
        for r in 0..rows {
            let a = left.row(first + r);
            for j in start(first + r)..n {
                out[r * n + j] = dot(a, right.row(j));
            }
        }
    }
}

fn fill_product(
    left: &TokenMatrix,
    right: &TokenMatrix,
    data: &mut [f64],
    start: impl Fn(usize) -> usize + Sync,
) {
    let n = right.rows();
    if n == 0 {
        return;
    }
    let fill = |(b, out): (usize, &mut [f64])| fill_block(left, right, b * BLOCK, out, &start);
    if data.len() >= PAR_THRESHOLD {
        data.par_chunks_mut(BLOCK * n).enumerate().for_each(fill);
    } else {
        data.chunks_mut(BLOCK * n).enumerate().for_each(fill);
    }
}

/// Text-vision similarity: inner products of text rows with post-projection
/// vision rows. Inputs are expected to be normalized.
pub fn build_tv(text: &TokenMatrix, vision_post: &TokenMatrix) -> Result<SimilarityMatrix> {
    require_role(vision_post, Role::VisionPost, "text-vision similarity")?;
    if text.dim() != vision_post.dim() {
        return Err(Error::DimMismatch {
            expected: vision_post.dim(),
            found: text.dim(),
        });
    }
    let (m, n) = (text.rows(), vision_post.rows());
    let mut data = vec![0.0; m * n];
    fill_product(text, vision_post, &mut data, |_| 0);
    Ok(SimilarityMatrix::from_parts(m, n, SimKind::RawTV, None, data))
}

/// Vision-vision similarity over pre-projection rows. Symmetric by
/// construction: the upper triangle is computed and mirrored.
pub fn build_vv(vision_pre: &TokenMatrix) -> Result<SimilarityMatrix> {
    require_role(vision_pre, Role::VisionPre, "vision-vision similarity")?;
    let n = vision_pre.rows();
    let mut data = vec![0.0; n * n];
    fill_product(vision_pre, vision_pre, &mut data, |i| i);
    for i in 0..n {
        for j in 0..i {
            data[i * n + j] = data[j * n + i];
        }
    }
    Ok(SimilarityMatrix::from_parts(n, n, SimKind::RawVV, None, data))
}

/// Writes `exp((x - max) / tau)` for each entry of `row` into `out` and
/// returns the sum of those terms, added left to right.
fn softmax_terms(row: &[f64], tau: f64, out: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = ((x - max) / tau).exp();
        sum += *o;
    }
    sum
}

/// Row-wise softmax with temperature `tau`.
///
/// The row maximum is subtracted before exponentiation. Calibrating an
/// already calibrated matrix is allowed and simply applies another softmax.
pub fn calibrate(m: &SimilarityMatrix, tau: f64) -> Result<SimilarityMatrix> {
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau(tau));
    }
    let n = m.sources();
    let mut data = vec![0.0; m.targets() * n];
    if n > 0 {
        data.chunks_mut(n).zip(m.iter_rows()).for_each(|(out, row)| {
            let sum = softmax_terms(row, tau, out);
            out.iter_mut().for_each(|v| *v /= sum);
        });
    }
    Ok(SimilarityMatrix::from_parts(
        m.targets(),
        n,
        m.kind().calibrated(),
        Some(tau),
        data,
    ))
}

/// Appends agent-answer rows after the query rows.
pub fn concat_agent(text: &TokenMatrix, agent: &TokenMatrix) -> Result<TokenMatrix> {
    if agent.rows() == 0 {
        return Ok(text.clone());
    }
    if text.dim() != agent.dim() {
        return Err(Error::DimMismatch {
            expected: text.dim(),
            found: agent.dim(),
        });
    }
    let mut data = Vec::with_capacity(text.data().len() + agent.data().len());
    data.extend_from_slice(text.data());
    data.extend_from_slice(agent.data());
    TokenMatrix::new(text.rows() + agent.rows(), text.dim(), text.role(), data)
}

/// Pools subword token embeddings into one row per word before similarity.
///
/// `Mean` and `Max` results are renormalized to unit length. `First` and
/// single-token words copy the row unchanged, which keeps `First` pooling
/// here bit-identical to `First` pooling applied to the similarity matrix.
pub fn pool_pre(
    text: &TokenMatrix,
    spans: &WordSpans,
    method: PoolMethod,
    max_rule: MaxRule,
    epsilon: f64,
) -> Result<TokenMatrix> {
    spans.check_rows(text.rows())?;
    let dim = text.dim();
    let mut data = Vec::with_capacity(spans.len() * dim);
    for (w, &(start, end)) in spans.as_slice().iter().enumerate() {
        if end - start == 1 || method == PoolMethod::First {
            data.extend_from_slice(text.row(start));
            continue;
        }
        let pooled: Vec<f64> = match (method, max_rule) {
            (PoolMethod::Mean, _) => {
                let mut acc = vec![0.0f64; dim];
                for i in start..end {
                    for (a, &x) in acc.iter_mut().zip(text.row(i)) {
                        *a += f64::from(x);
                    }
                }
                let count = (end - start) as f64;
                acc.into_iter().map(|a| a / count).collect()
            }
            (PoolMethod::Max, MaxRule::ElementWise) => {
                let mut acc = vec![f64::NEG_INFINITY; dim];
                for i in start..end {
                    for (a, &x) in acc.iter_mut().zip(text.row(i)) {
                        *a = a.max(f64::from(x));
                    }
                }
                acc
            }
            (PoolMethod::Max, MaxRule::PeakFeature) => {
                // first row holding the largest single coordinate
                let mut best = (start, f32::NEG_INFINITY);
                for i in start..end {
                    let peak = text.row(i).iter().copied().fold(f32::NEG_INFINITY, f32::max);
                    if peak > best.1 {
                        best = (i, peak);
                    }
                }
                data.extend_from_slice(text.row(best.0));
                continue;
            }
            (PoolMethod::First, _) => unreachable!(),
        };
        let norm = pooled.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm >= epsilon) {
            return Err(Error::DegenerateRow { index: w });
        }
        data.extend(pooled.iter().map(|&v| (v / norm) as f32));
    }
    TokenMatrix::new(spans.len(), dim, text.role(), data)
}

/// Pools the target rows of a similarity matrix, one row per word.
pub fn pool_post(
    m: &SimilarityMatrix,
    spans: &WordSpans,
    method: PoolMethod,
) -> Result<SimilarityMatrix> {
    spans.check_rows(m.targets())?;
    let n = m.sources();
    let mut data = Vec::with_capacity(spans.len() * n);
    for &(start, end) in spans.as_slice() {
        match method {
            PoolMethod::First => data.extend_from_slice(m.row(start)),
            PoolMethod::Mean => {
                let count = (end - start) as f64;
                for j in 0..n {
                    let mut s = 0.0;
                    for i in start..end {
                        s += m.get(i, j);
                    }
                    data.push(s / count);
                }
            }
            PoolMethod::Max => {
                for j in 0..n {
                    let mut best = f64::NEG_INFINITY;
                    for i in start..end {
                        best = best.max(m.get(i, j));
                    }
                    data.push(best);
                }
            }
        }
    }
    Ok(SimilarityMatrix::from_parts(
        spans.len(),
        n,
        m.kind(),
        m.temperature(),
        data,
    ))
}

/// Mean over target rows of each row's `k`-th largest entry (`k` is 1-based
/// and clamped to the row length). With `k = 1` this is the coverage value
/// of the full source set.
pub fn kth_row_mean(m: &SimilarityMatrix, k: usize) -> f64 {
    if m.targets() == 0 || m.sources() == 0 {
        return 0.0;
    }
    let k = k.clamp(1, m.sources());
    let mut scratch = vec![0.0; m.sources()];
    let mut total = 0.0;
    for row in m.iter_rows() {
        total += kth_largest(row, k, &mut scratch);
    }
    total / m.targets() as f64
}

fn kth_largest(row: &[f64], k: usize, scratch: &mut [f64]) -> f64 {
    if k == 1 {
        return row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    scratch.copy_from_slice(row);
    let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *kth
}

/// Same value as `kth_row_mean(&calibrate(raw, tau)?, k)` without
/// materializing the calibrated matrix.
pub fn calibrated_kth_row_mean(raw: &SimilarityMatrix, tau: f64, k: usize) -> f64 {
    let n = raw.sources();
    if raw.targets() == 0 || n == 0 {
        return 0.0;
    }
    let k = k.clamp(1, n);
    let mut terms = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut total = 0.0;
    for row in raw.iter_rows() {
        let sum = softmax_terms(row, tau, &mut terms);
        terms.iter_mut().for_each(|v| *v /= sum);
        total += kth_largest(&terms, k, &mut scratch);
    }
    total / raw.targets() as f64
}

fn require_kinds(tv: &SimilarityMatrix, vv: &SimilarityMatrix) -> Result<()> {
    if tv.kind() != SimKind::CalibratedTV {
        return Err(Error::Shape(format!(
            "temperature search needs a calibrated text-vision matrix, got {:?}",
            tv.kind()
        )));
    }
    if vv.kind() != SimKind::RawVV {
        return Err(Error::Shape(format!(
            "temperature search needs a raw vision-vision matrix, got {:?}",
            vv.kind()
        )));
    }
    Ok(())
}

/// Result of a bisection temperature search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSearch {
    pub tau: f64,
    /// Full-set text coverage minus full-set vision coverage at `tau`.
    pub gap: f64,
    pub iterations: u32,
    /// False when the gap had the same sign at both ends of the interval;
    /// `tau` is then the endpoint with the smaller gap.
    pub bracketed: bool,
}

/// Finds the visual temperature whose full-set vision coverage matches the
/// full-set calibrated text coverage, by bisection on `[lo, hi]`.
///
/// Full-set vision coverage (mean of calibrated row maxima) falls as the
/// temperature rises; every probe is checked against the current bracket and
/// a violation is reported as [`Error::NonMonotone`]. Stops once the bracket
/// is narrower than `tol` and returns its midpoint.
pub fn adapt_tau_bisection(
    tv_cal: &SimilarityMatrix,
    vv_raw: &SimilarityMatrix,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<TauSearch> {
    require_kinds(tv_cal, vv_raw)?;
    if !(lo > 0.0) {
        return Err(Error::NonPositiveTau(lo));
    }
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "bisection needs lo < hi and tol > 0 (lo={lo}, hi={hi}, tol={tol})"
        )));
    }
    let target = kth_row_mean(tv_cal, 1);
    let value = |tau: f64| calibrated_kth_row_mean(vv_raw, tau, 1);
    let (mut v_lo, mut v_hi) = (value(lo), value(hi));
    if v_lo < v_hi {
        return Err(Error::NonMonotone { lo, hi });
    }
    let (g_lo, g_hi) = (target - v_lo, target - v_hi);
    let done = |tau, gap, iterations| TauSearch {
        tau,
        gap,
        iterations,
        bracketed: true,
    };
    if g_hi == 0.0 {
        return Ok(done(hi, g_hi, 0));
    }
    if g_lo == 0.0 {
        return Ok(done(lo, g_lo, 0));
    }
    if g_lo.signum() == g_hi.signum() {
        let (tau, gap) = if g_lo.abs() < g_hi.abs() {
            (lo, g_lo)
        } else {
            (hi, g_hi)
        };
        return Ok(TauSearch {
            tau,
            gap,
            iterations: 0,
            bracketed: false,
        });
    }
    let (mut a, mut b) = (lo, hi);
    let lo_sign = g_lo.signum();
    let mut iterations = 0;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let v_mid = value(mid);
        iterations += 1;
        if v_mid > v_lo || v_mid < v_hi {
            return Err(Error::NonMonotone { lo: a, hi: b });
        }
        let g_mid = target - v_mid;
        if g_mid == 0.0 {
            return Ok(done(mid, g_mid, iterations));
        }
        if g_mid.signum() == lo_sign {
            a = mid;
            v_lo = v_mid;
        } else {
            b = mid;
            v_hi = v_mid;
        }
    }
    let tau = 0.5 * (a + b);
    Ok(done(tau, target - value(tau), iterations))
}

/// Picks the grid temperature whose `k`-th-largest vision coverage is
/// closest to the full-set calibrated text coverage. Ties go to the smaller
/// temperature.
pub fn adapt_tau_grid_kth(
    tv_cal: &SimilarityMatrix,
    vv_raw: &SimilarityMatrix,
    k: usize,
    grid: &[f64],
) -> Result<f64> {
    require_kinds(tv_cal, vv_raw)?;
    validate_grid(grid)?;
    let target = kth_row_mean(tv_cal, 1);
    let mut best = (grid[0], f64::INFINITY);
    for &tau in grid {
        let gap = (target - calibrated_kth_row_mean(vv_raw, tau, k)).abs();
        if gap < best.1 {
            best = (tau, gap);
        }
    }
    Ok(best.0)
}
