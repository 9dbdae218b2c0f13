#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokcover::types::DEFAULT_EPSILON;
use tokcover::{Role, SimKind, SimilarityMatrix, TokenMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform entries in [-1, 1], rows normalized.
pub fn unit_rows(rng: &mut ChaCha8Rng, rows: usize, dim: usize, role: Role) -> TokenMatrix {
    let data: Vec<f32> = (0..rows * dim).map(|_| rng.random_range(-1.0f32..=1.0)).collect();
    TokenMatrix::new(rows, dim, role, data)
        .unwrap()
        .normalize(DEFAULT_EPSILON)
        .unwrap()
}

/// Entries uniform in `[lo, hi)`.
pub fn random_sim(rng: &mut ChaCha8Rng, m: usize, n: usize, kind: SimKind, lo: f64, hi: f64) -> SimilarityMatrix {
    let data = (0..m * n).map(|_| rng.random_range(lo..hi)).collect();
    SimilarityMatrix::new(m, n, kind, data).unwrap()
}

pub fn naive_dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

pub fn naive_softmax(row: &[f64], tau: f64) -> Vec<f64> {
    let e: Vec<f64> = row.iter().map(|x| (x / tau).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn naive_coverage(set: &[usize], m: &SimilarityMatrix) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..m.targets() {
        let mut best = f64::NEG_INFINITY;
        for &j in set {
            if m.get(i, j) > best {
                best = m.get(i, j);
            }
        }
        total += best;
    }
    total / m.targets() as f64
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..row.len() {
        if row[j] > row[best] {
            best = j;
        }
    }
    best
}

/// A sample carrying every optional dump section.
pub fn full_sample(seed: u64) -> tokcover::SampleInput {
    let mut r = rng(seed);
    let n = r.random_range(2..40);
    let m = r.random_range(1..12);
    let o = r.random_range(1..5);
    let (dp, dq) = (r.random_range(1..20), r.random_range(1..20));
    let cut = r.random_range(1..n);
    tokcover::synth_sample(n, m, o, dp, dq, r.random())
        .with_word_spans(tokcover::pipeline::synth_word_spans(m, r.random()))
        .unwrap()
        .with_crop_sizes(vec![cut, n - cut])
        .unwrap()
}

pub type ErrorCheck = fn(&tokcover::Error) -> bool;

fn put_u32(bytes: &mut [u8], at: usize, v: u32) {
    bytes[at..at + 4].copy_from_slice(&v.to_le_bytes());
}

fn get_u32(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
}

/// Corrupted variants of a valid dump that carries all optional sections,
/// each with the error it must produce.
pub fn corrupted_fixtures(valid: &[u8]) -> Vec<(&'static str, Vec<u8>, ErrorCheck)> {
    use tokcover::Error;
    let c = |i: usize| get_u32(valid, 12 + 4 * i);
    let (n, m, o, dp, dq, ns) = (c(0), c(1), c(2), c(3), c(4), c(5));
    let spans_at = 40 + 4 * (n * dp + n * dq + m * dq + o * dq);
    let crops_at = spans_at + 8 * ns;
    let edit = |f: &dyn Fn(&mut Vec<u8>)| {
        let mut b = valid.to_vec();
        f(&mut b);
        b
    };
    vec![
        ("bad magic", edit(&|b| b[0] = b'X'), |e| matches!(e, Error::BadMagic(_))),
        ("bad version", edit(&|b| put_u32(b, 4, 2)), |e| matches!(e, Error::BadVersion(2))),
        ("short header", valid[..20].to_vec(), |e| matches!(e, Error::TruncatedFile(_))),
        ("empty file", Vec::new(), |e| matches!(e, Error::TruncatedFile(_))),
        ("short payload", valid[..valid.len() - 5].to_vec(), |e| matches!(e, Error::TruncatedFile(_))),
        ("agent rows without flag", edit(&|b| put_u32(b, 8, 2 | 4)), |e| {
            matches!(e, Error::InvariantViolation { .. })
        }),
        ("spans without flag", edit(&|b| put_u32(b, 8, 1 | 4)), |e| {
            matches!(e, Error::InvariantViolation { .. })
        }),
        ("crops without flag", edit(&|b| put_u32(b, 8, 1 | 2)), |e| {
            matches!(e, Error::InvariantViolation { .. })
        }),
        ("unknown flag", edit(&|b| put_u32(b, 8, 7 | 8)), |e| matches!(e, Error::InvariantViolation { .. })),
        ("trailing bytes", edit(&|b| b.push(0)), |e| matches!(e, Error::InvariantViolation { .. })),
        ("span gap", edit(&|b| put_u32(b, spans_at, 1)), |e| matches!(e, Error::InvariantViolation { .. })),
        ("crop sum", edit(&|b| put_u32(b, crops_at, get_u32(valid, crops_at) as u32 + 1)), |e| {
            matches!(e, Error::InvariantViolation { .. })
        }),
        ("nan payload", edit(&|b| b[40..44].copy_from_slice(&f32::NAN.to_le_bytes())), |e| {
            matches!(e, Error::InvariantViolation { .. })
        }),
        ("zero row", edit(&|b| b[40..40 + 4 * dp].iter_mut().for_each(|x| *x = 0)), |e| {
            matches!(e, Error::InvariantViolation { .. })
        }),
    ]
}
