//! Binary sketch file.
//!
//! ```text
//! "EHS1" | version u8 = 1 | kind u8 | b u8 | seed u64 LE | [base u8, TailCut only] | payload
//! ```
//!
//! The payload is the packed register array (if any) followed by the bit
//! array (if any), both least-significant-bit first.

use crate::error::{Error, Result};
use crate::hashing::BucketLayout;
use crate::register_store::{BitArray, PackedRegisterArray};
use crate::sketches::{
    AnySketch, CardinalitySketch, EhllSketch, HllSketch, PcsaSketch, SketchKind,
};
use crate::tailcut::{EhllTcSketch, HllTcSketch, OFFSET_WIDTH};

pub const MAGIC: &[u8; 4] = b"EHS1";
pub const VERSION: u8 = 1;

fn packed_len(len: usize, width: u8) -> usize {
    (len * width as usize).div_ceil(8)
}

pub fn serialize(sketch: &AnySketch) -> Result<Vec<u8>> {
    let layout = sketch.layout();
    let b = layout.precision().ok_or_else(|| {
        Error::Format(format!(
            "sketch files store a precision b; {} registers is not a power of two",
            layout.registers()
        ))
    })?;
    let mut out = Vec::with_capacity(16 + sketch.memory_bits() as usize / 8);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(sketch.kind().tag());
    out.push(b);
    out.extend_from_slice(&sketch.seed().to_le_bytes());
    match sketch {
        AnySketch::Pcsa(s) => out.extend_from_slice(s.bitmaps().as_bytes()),
        AnySketch::Hll(s) => out.extend_from_slice(s.registers_array().as_bytes()),
        AnySketch::Ehll(s) => {
            out.extend_from_slice(s.levels().as_bytes());
            out.extend_from_slice(s.neighbors().as_bytes());
        }
        AnySketch::HllTc(s) => {
            out.push(s.base());
            out.extend_from_slice(s.offsets().as_bytes());
        }
        AnySketch::EhllTc(s) => {
            out.push(s.base());
            out.extend_from_slice(s.offsets().as_bytes());
            out.extend_from_slice(s.neighbors().as_bytes());
        }
    }
    Ok(out)
}

/// Parses a sketch file. Every field is validated; trailing bytes are an error.
pub fn deserialize(bytes: &[u8]) -> Result<AnySketch> {
    let header = bytes
        .get(..15)
        .ok_or_else(|| Error::Format("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if header[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", header[4])));
    }
    let kind = SketchKind::from_tag(header[5])
        .ok_or_else(|| Error::Format(format!("unknown sketch kind tag {}", header[5])))?;
    let layout = BucketLayout::with_precision(header[6])?;
    let seed = u64::from_le_bytes(header[7..15].try_into().expect("8 bytes"));
    let m = layout.registers() as usize;
    let mut rest = &bytes[15..];
    let mut take = |n: usize| -> Result<&[u8]> {
        if rest.len() < n {
            return Err(Error::Format("truncated payload".into()));
        }
        let (head, tail) = rest.split_at(n);
        rest = tail;
        Ok(head)
    };
    let sketch = match kind {
        SketchKind::Pcsa => {
            let bits = m * layout.max_geo() as usize;
            let bitmaps = BitArray::from_bytes(bits, take(bits.div_ceil(8))?)?;
            AnySketch::Pcsa(PcsaSketch::from_bitmaps(layout, seed, bitmaps)?)
        }
        SketchKind::Hll => {
            let regs = PackedRegisterArray::from_bytes(m, 6, take(packed_len(m, 6))?)?;
            AnySketch::Hll(HllSketch::from_registers(layout, seed, regs)?)
        }
        SketchKind::Ehll => {
            let levels = PackedRegisterArray::from_bytes(m, 6, take(packed_len(m, 6))?)?;
            let neighbors = BitArray::from_bytes(m, take(m.div_ceil(8))?)?;
            AnySketch::Ehll(EhllSketch::from_parts(layout, seed, levels, neighbors)?)
        }
        SketchKind::HllTc => {
            let base = take(1)?[0];
            let offsets = PackedRegisterArray::from_bytes(
                m,
                OFFSET_WIDTH,
                take(packed_len(m, OFFSET_WIDTH))?,
            )?;
            AnySketch::HllTc(HllTcSketch::from_parts(layout, seed, base, offsets)?)
        }
        SketchKind::EhllTc => {
            let base = take(1)?[0];
            let offsets = PackedRegisterArray::from_bytes(
                m,
                OFFSET_WIDTH,
                take(packed_len(m, OFFSET_WIDTH))?,
            )?;
            let neighbors = BitArray::from_bytes(m, take(m.div_ceil(8))?)?;
            AnySketch::EhllTc(EhllTcSketch::from_parts(
                layout, seed, base, offsets, neighbors,
            )?)
        }
    };
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(sketch)
}
