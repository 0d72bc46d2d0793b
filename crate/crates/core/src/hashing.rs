//! Seeded 64-bit hashing and the split of a hash into a bucket index and a
//! geometric value.
//!
//! For `m = 2^b` registers the bucket is the top `b` bits of the hash and the
//! geometric value is `rho` of the remaining `64 - b` bits. Register counts that
//! are not a power of two (used for matched-memory comparisons) take the bucket
//! from the high 32 bits by multiply-shift range reduction and the geometric
//! value from the low 32 bits, so the two stay independent.

use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};

pub const MIN_PRECISION: u8 = 4;
pub const MAX_PRECISION: u8 = 18;
pub const MIN_REGISTERS: u32 = 1 << MIN_PRECISION;
pub const MAX_REGISTERS: u32 = 1 << MAX_PRECISION;

/// A 64-bit hash of one stream element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashedElement {
    pub raw: u64,
}

impl HashedElement {
    pub const fn new(raw: u64) -> Self {
        Self { raw }
    }
}

/// A hash routed to one register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BucketizedHash {
    pub bucket: u32,
    pub geo: u8,
}

/// Hashes `element` with XXH3-64 under `seed`.
#[inline]
pub fn hash64(element: &[u8], seed: u64) -> HashedElement {
    HashedElement::new(xxh3_64_with_seed(element, seed))
}

/// 1-indexed position of the least significant set bit among the low `width`
/// bits of `y`; `width + 1` when those bits are all zero.
#[inline]
pub fn rho(y: u64, width: u32) -> u32 {
    debug_assert!((1..=64).contains(&width));
    let masked = if width >= 64 {
        y
    } else {
        y & ((1u64 << width) - 1)
    };
    if masked == 0 {
        width + 1
    } else {
        masked.trailing_zeros() + 1
    }
}

/// Splits `h` for `2^b` registers: bucket from the top `b` bits, geo from the rest.
pub fn bucketize(h: HashedElement, b: u8) -> Result<BucketizedHash> {
    Ok(BucketLayout::with_precision(b)?.split(h))
}

/// How hashes are routed to a fixed number of registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BucketLayout {
    registers: u32,
    /// `b` for power-of-two layouts, 0 otherwise.
    precision: u8,
}

impl BucketLayout {
    pub fn with_precision(b: u8) -> Result<Self> {
        if !(MIN_PRECISION..=MAX_PRECISION).contains(&b) {
            return Err(Error::InvalidPrecision(b));
        }
        Ok(Self {
            registers: 1 << b,
            precision: b,
        })
    }

    /// Any register count in `16..=2^18`; powers of two get the precision layout.
    pub fn with_registers(m: u32) -> Result<Self> {
        if !(MIN_REGISTERS..=MAX_REGISTERS).contains(&m) {
            return Err(Error::InvalidRegisterCount(m));
        }
        if m.is_power_of_two() {
            return Self::with_precision(m.trailing_zeros() as u8);
        }
        Ok(Self {
            registers: m,
            precision: 0,
        })
    }

    #[inline]
    pub fn registers(&self) -> u32 {
        self.registers
    }

    /// `Some(b)` when the register count is `2^b`.
    pub fn precision(&self) -> Option<u8> {
        (self.precision != 0).then_some(self.precision)
    }

    /// Number of hash bits available to `rho`.
    #[inline]
    pub fn geo_bits(&self) -> u32 {
        if self.precision != 0 {
            64 - self.precision as u32
        } else {
            32
        }
    }

    /// Largest geometric value a hash can produce (`rho` saturation).
    #[inline]
    pub fn max_geo(&self) -> u8 {
        (self.geo_bits() + 1) as u8
    }

    #[inline]
    pub fn split(&self, h: HashedElement) -> BucketizedHash {
        if self.precision != 0 {
            let w = 64 - self.precision as u32;
            BucketizedHash {
                bucket: (h.raw >> w) as u32,
                geo: rho(h.raw, w) as u8,
            }
        } else {
            let bucket = (((h.raw >> 32) * self.registers as u64) >> 32) as u32;
            BucketizedHash {
                bucket,
                geo: rho(h.raw & 0xffff_ffff, 32) as u8,
            }
        }
    }
}
