//! Binary embedding dump.
//!
//! Layout, all little-endian with no padding:
//!
//! ```text
//! magic      4 bytes  "MMCV"
//! version    u32      1
//! flags      u32      bit0 agent rows, bit1 word spans, bit2 crop sizes
//! n m o      u32 x3   vision tokens, text tokens, agent tokens
//! dim_pre    u32
//! dim_post   u32
//! num_spans  u32
//! num_crops  u32
//! vision_pre   n x dim_pre   f32
//! vision_post  n x dim_post  f32
//! text         m x dim_post  f32
//! agent        o x dim_post  f32    (bit0)
//! spans        num_spans x 2 u32    (bit1, start then end)
//! crop_sizes   num_crops     u32    (bit2)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::SampleInput;
use crate::similarity::WordSpans;
use crate::types::{dot, Role, TokenMatrix, DEFAULT_EPSILON};

pub const MAGIC: [u8; 4] = *b"MMCV";
pub const VERSION: u32 = 1;
pub const FLAG_AGENT: u32 = 1;
pub const FLAG_SPANS: u32 = 1 << 1;
pub const FLAG_CROPS: u32 = 1 << 2;
pub const HEADER_LEN: usize = 40;

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invariant(format!("{what} = {v} does not fit in u32")))
}

/// Serializes a sample. The sample is validated first.
pub fn encode(input: &SampleInput) -> Result<Vec<u8>> {
    input.validate()?;
    let mut flags = 0;
    if input.agent_text.is_some() {
        flags |= FLAG_AGENT;
    }
    if input.word_spans.is_some() {
        flags |= FLAG_SPANS;
    }
    if input.crop_sizes.is_some() {
        flags |= FLAG_CROPS;
    }
    let o = input.agent_text.as_ref().map_or(0, TokenMatrix::rows);
    let spans = input.word_spans.as_ref().map_or(&[][..], WordSpans::as_slice);
    let crops = input.crop_sizes.as_deref().unwrap_or(&[]);
    let counts = [
        ("n", input.sources()),
        ("m", input.text.rows()),
        ("o", o),
        ("dim_pre", input.vision_pre.dim()),
        ("dim_post", input.vision_post.dim()),
        ("num_spans", spans.len()),
        ("num_crops", crops.len()),
    ];

    let floats = input.vision_pre.data().len()
        + input.vision_post.data().len()
        + input.text.data().len()
        + input.agent_text.as_ref().map_or(0, |a| a.data().len());
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (floats + 2 * spans.len() + crops.len()));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    for (what, v) in counts {
        out.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
    }
    let mut put_f32 = |m: &TokenMatrix| {
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    put_f32(&input.vision_pre);
    put_f32(&input.vision_post);
    put_f32(&input.text);
    if let Some(a) = &input.agent_text {
        put_f32(a);
    }
    for &(s, e) in spans {
        out.extend_from_slice(&to_u32(s, "span start")?.to_le_bytes());
        out.extend_from_slice(&to_u32(e, "span end")?.to_le_bytes());
    }
    for &c in crops {
        out.extend_from_slice(&to_u32(c, "crop size")?.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).ok_or(Error::TruncatedFile(what))?;
        let s = self.bytes.get(self.pos..end).ok_or(Error::TruncatedFile(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u32s(&mut self, count: usize, what: &'static str) -> Result<Vec<usize>> {
        let b = self.take(count.checked_mul(4).ok_or(Error::TruncatedFile(what))?, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect())
    }

    fn matrix(&mut self, rows: usize, dim: usize, role: Role, what: &'static str) -> Result<TokenMatrix> {
        let len = rows
            .checked_mul(dim)
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::invariant(format!("{what} size overflows")))?;
        let b = self.take(len, what)?;
        let data: Vec<f32> = b
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant(format!("{what} contains non-finite values")));
        }
        let m = TokenMatrix::new(rows, dim, role, data)?;
        if let Some(i) = m.iter_rows().position(|r| !(dot(r, r).sqrt() >= DEFAULT_EPSILON)) {
            return Err(Error::invariant(format!("{what} row {i} has zero norm")));
        }
        Ok(m)
    }
}

/// Parses and fully validates a dump.
pub fn decode(bytes: &[u8]) -> Result<SampleInput> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let flags = r.u32("flags")?;
    let mut counts = [0usize; 7];
    for c in counts.iter_mut() {
        *c = r.u32("header counts")? as usize;
    }
    let [n, m, o, dim_pre, dim_post, num_spans, num_crops] = counts;

    if flags & !(FLAG_AGENT | FLAG_SPANS | FLAG_CROPS) != 0 {
        return Err(Error::invariant(format!("unknown flag bits {flags:#x}")));
    }
    if flags & FLAG_AGENT == 0 && o > 0 {
        return Err(Error::invariant(format!("{o} agent rows declared without the agent flag")));
    }
    if flags & FLAG_SPANS == 0 && num_spans > 0 {
        return Err(Error::invariant(format!("{num_spans} spans declared without the spans flag")));
    }
    if flags & FLAG_CROPS == 0 && num_crops > 0 {
        return Err(Error::invariant(format!("{num_crops} crops declared without the crops flag")));
    }
    if dim_pre == 0 || dim_post == 0 {
        return Err(Error::invariant("embedding widths must be positive"));
    }

    let vision_pre = r.matrix(n, dim_pre, Role::VisionPre, "vision_pre")?;
    let vision_post = r.matrix(n, dim_post, Role::VisionPost, "vision_post")?;
    let text = r.matrix(m, dim_post, Role::TextQuery, "text")?;
    let agent_text = if flags & FLAG_AGENT != 0 {
        Some(r.matrix(o, dim_post, Role::AgentText, "agent")?)
    } else {
        None
    };
    let word_spans = if flags & FLAG_SPANS != 0 {
        let raw = r.u32s(num_spans * 2, "spans")?;
        let spans = raw.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        Some(WordSpans::new(spans, m).map_err(|e| Error::invariant(e.to_string()))?)
    } else {
        None
    };
    let crop_sizes = if flags & FLAG_CROPS != 0 {
        Some(r.u32s(num_crops, "crop_sizes")?)
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::invariant(format!(
            "{} trailing bytes after payload",
            bytes.len() - r.pos
        )));
    }
    let sample = SampleInput {
        vision_pre,
        vision_post,
        text,
        agent_text,
        word_spans,
        crop_sizes,
    };
    sample.validate().map_err(|e| match e {
        e @ Error::InvariantViolation { .. } => e,
        other => Error::invariant(other.to_string()),
    })?;
    Ok(sample)
}

pub fn write_dump(input: &SampleInput, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(input)?)?;
    Ok(())
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<SampleInput> {
    decode(&fs::read(path)?)
}
