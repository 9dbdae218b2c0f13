//! Dense token and similarity matrices.
//!
//! Token embeddings are stored as `f32`, row-major. Every reduction over a
//! row (dot products, norms, row sums) accumulates in `f64` with a fixed
//! order, so results do not depend on how work is split across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows with an L2 norm below this are rejected by [`TokenMatrix::normalize`].
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Number of independent accumulators used by [`dot`].
const LANES: usize = 8;

/// Inner product of two equal-length `f32` slices with `f64` accumulation.
///
/// Element `i` is added into accumulator `i % 8`; the tail past the last full
/// block of eight goes into accumulators `0..tail` the same way. Accumulators
/// are then summed left to right. Products of two `f32` values are exact in
/// `f64`, so only the additions round, and always in the same order.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    dot_block([a], b)[0]
}

/// `R` dot products against the same right-hand side in one pass over it.
/// Each result is bit-identical to [`dot`] on the same pair.
pub fn dot_block<const R: usize>(rows: [&[f32]; R], b: &[f32]) -> [f64; R] {
    let len = b.len();
    debug_assert!(rows.iter().all(|r| r.len() == len));
    let mut acc = [[0.0f64; LANES]; R];
    let full = len - len % LANES;
    let mut c = 0;
    while c < full {
        let cb = &b[c..c + LANES];
        for (r, row) in rows.iter().enumerate() {
            let ca = &row[c..c + LANES];
            for l in 0..LANES {
                acc[r][l] += f64::from(ca[l]) * f64::from(cb[l]);
            }
        }
        c += LANES;
    }
    for (r, row) in rows.iter().enumerate() {
        for (l, i) in (full..len).enumerate() {
            acc[r][l] += f64::from(row[i]) * f64::from(b[i]);
        }
    }
    acc.map(|a| a.iter().fold(0.0, |s, &v| s + v))
}

/// Which part of the model a [`TokenMatrix`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    TextQuery,
    /// Vision-encoder output before the multimodal projector.
    VisionPre,
    /// Vision tokens after the projector, aligned with the text space.
    VisionPost,
    AgentText,
}

/// Dense row-major matrix of token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    dim: usize,
    role: Role,
    data: Vec<f32>,
}

impl TokenMatrix {
    pub fn new(rows: usize, dim: usize, role: Role, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding width must be at least 1".into()));
        }
        if data.len() != rows * dim {
            return Err(Error::Shape(format!(
                "{} values cannot fill {rows}x{dim}",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            dim,
            role,
            data,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f32]>>(role: Role, rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, role, data)
    }

    pub fn empty(dim: usize, role: Role) -> Result<Self> {
        Self::new(0, dim, role, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Copies out the rows in `range`.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            rows: range.len(),
            dim: self.dim,
            role: self.role,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
        }
    }

    /// Scales every row to unit L2 norm.
    ///
    /// Rows whose norm is below `epsilon` are an error rather than being
    /// zero-filled.
    pub fn normalize(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "normalization epsilon must be positive, got {epsilon}"
            )));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for (index, row) in self.iter_rows().enumerate() {
            let norm = dot(row, row).sqrt();
            if !(norm >= epsilon) {
                return Err(Error::DegenerateRow { index });
            }
            data.extend(row.iter().map(|&x| (f64::from(x) / norm) as f32));
        }
        Ok(Self { data, ..*self })
    }

    /// Largest deviation of any row norm from 1.
    pub fn max_norm_deviation(&self) -> f64 {
        self.iter_rows()
            .map(|r| (dot(r, r).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// What a [`SimilarityMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimKind {
    RawTV,
    RawVV,
    CalibratedTV,
    CalibratedVV,
}

impl SimKind {
    pub fn is_calibrated(self) -> bool {
        matches!(self, SimKind::CalibratedTV | SimKind::CalibratedVV)
    }

    pub fn calibrated(self) -> Self {
        match self {
            SimKind::RawTV | SimKind::CalibratedTV => SimKind::CalibratedTV,
            SimKind::RawVV | SimKind::CalibratedVV => SimKind::CalibratedVV,
        }
    }
}

/// Target-by-source score matrix, row-major, `f64`.
///
/// Rows are coverage targets (text tokens, or vision tokens for the
/// vision-vision matrix); columns are the candidate vision tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    targets: usize,
    sources: usize,
    kind: SimKind,
    temperature: Option<f64>,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps raw scores. Calibrated kinds must go through
    /// [`crate::similarity::calibrate`] so the temperature is recorded.
    pub fn new(targets: usize, sources: usize, kind: SimKind, data: Vec<f64>) -> Result<Self> {
        if data.len() != targets * sources {
            return Err(Error::Shape(format!(
                "{} values cannot fill {targets}x{sources}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("similarity scores must be finite".into()));
        }
        Ok(Self {
            targets,
            sources,
            kind,
            temperature: None,
            data,
        })
    }

    /// Convenience constructor for small hand-written matrices.
    pub fn from_rows<R: AsRef<[f64]>>(kind: SimKind, rows: &[R]) -> Result<Self> {
        let sources = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * sources);
        for r in rows {
            if r.as_ref().len() != sources {
                return Err(Error::Shape("ragged rows".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), sources, kind, data)
    }

    pub(crate) fn from_parts(
        targets: usize,
        sources: usize,
        kind: SimKind,
        temperature: Option<f64>,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), targets * sources);
        Self {
            targets,
            sources,
            kind,
            temperature,
            data,
        }
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn kind(&self) -> SimKind {
        self.kind
    }

    pub fn temperature(&self) -> Option<f64> {
        self.temperature
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, target: usize, source: usize) -> f64 {
        self.data[target * self.sources + source]
    }

    pub fn row(&self, target: usize) -> &[f64] {
        &self.data[target * self.sources..(target + 1) * self.sources]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.sources.max(1)).take(self.targets)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Restricts to the source columns in `range`, keeping every target row.
    pub fn select_sources(&self, range: std::ops::Range<usize>) -> Self {
        let mut data = Vec::with_capacity(self.targets * range.len());
        for row in self.iter_rows() {
            data.extend_from_slice(&row[range.clone()]);
        }
        Self::from_parts(self.targets, range.len(), self.kind, self.temperature, data)
    }
}
