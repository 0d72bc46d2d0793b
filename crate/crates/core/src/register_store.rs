//! Bit-packed register arrays.
//!
//! Registers are stored least-significant-bit first and may straddle byte
//! boundaries, so an array of `m` registers of `w` bits occupies exactly
//! `ceil(m * w / 8)` bytes.

use crate::error::{Error, Result};

/// Fixed-width unsigned registers (1 to 8 bits each) packed into bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PackedRegisterArray {
    len: usize,
    width: u8,
    buf: Vec<u8>,
}

impl PackedRegisterArray {
    pub fn new(len: usize, width: u8, fill: u8) -> Result<Self> {
        if !(1..=8).contains(&width) {
            return Err(Error::InvalidWidth(width));
        }
        if len == 0 {
            return Err(Error::Domain(
                "register array must hold at least one register".into(),
            ));
        }
        let max = Self::max_for(width);
        if fill > max {
            return Err(Error::ValueOverflow { value: fill, width });
        }
        let mut array = Self {
            len,
            width,
            buf: vec![0; byte_len(len, width)],
        };
        if fill != 0 {
            for j in 0..len {
                array.set(j, fill);
            }
        }
        Ok(array)
    }

    /// Rebuilds an array from its packed bytes. Padding bits must be zero.
    pub fn from_bytes(len: usize, width: u8, bytes: &[u8]) -> Result<Self> {
        let empty = Self::new(len, width, 0)?;
        if bytes.len() != empty.buf.len() {
            return Err(Error::Format(format!(
                "expected {} register bytes, found {}",
                empty.buf.len(),
                bytes.len()
            )));
        }
        let used = len * width as usize;
        if !used.is_multiple_of(8) && bytes[bytes.len() - 1] >> (used % 8) != 0 {
            return Err(Error::Format("nonzero padding bits".into()));
        }
        Ok(Self {
            buf: bytes.to_vec(),
            ..empty
        })
    }

    #[inline]
    fn max_for(width: u8) -> u8 {
        (((1u16) << width) - 1) as u8
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn width(&self) -> u8 {
        self.width
    }

    /// Largest storable value, `2^width - 1`.
    #[inline]
    pub fn max_value(&self) -> u8 {
        Self::max_for(self.width)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    /// Payload size in bits (`len * width`), excluding byte padding.
    pub fn memory_bits(&self) -> u64 {
        self.len as u64 * self.width as u64
    }

    /// Reads register `j`. Panics if `j >= len`.
    #[inline]
    pub fn get(&self, j: usize) -> u8 {
        assert!(
            j < self.len,
            "register index {j} out of bounds for length {}",
            self.len
        );
        let bit = j * self.width as usize;
        let byte = bit / 8;
        let shift = bit % 8;
        let mut word = self.buf[byte] as u16;
        if shift + self.width as usize > 8 {
            word |= (self.buf[byte + 1] as u16) << 8;
        }
        ((word >> shift) as u8) & self.max_value()
    }

    /// Writes register `j`. Panics if `j >= len` or `v` does not fit.
    #[inline]
    pub fn set(&mut self, j: usize, v: u8) {
        assert!(
            j < self.len,
            "register index {j} out of bounds for length {}",
            self.len
        );
        assert!(
            v <= self.max_value(),
            "value {v} does not fit in {} bits",
            self.width
        );
        let bit = j * self.width as usize;
        let byte = bit / 8;
        let shift = bit % 8;
        let mask = (self.max_value() as u16) << shift;
        let value = (v as u16) << shift;
        self.buf[byte] = (self.buf[byte] & !(mask as u8)) | value as u8;
        if shift + self.width as usize > 8 {
            let hi = &mut self.buf[byte + 1];
            *hi = (*hi & !((mask >> 8) as u8)) | (value >> 8) as u8;
        }
    }

    pub fn checked_get(&self, j: usize) -> Result<u8> {
        if j >= self.len {
            return Err(Error::IndexOutOfBounds {
                index: j,
                len: self.len,
            });
        }
        Ok(self.get(j))
    }

    pub fn checked_set(&mut self, j: usize, v: u8) -> Result<()> {
        if j >= self.len {
            return Err(Error::IndexOutOfBounds {
                index: j,
                len: self.len,
            });
        }
        if v > self.max_value() {
            return Err(Error::ValueOverflow {
                value: v,
                width: self.width,
            });
        }
        self.set(j, v);
        Ok(())
    }

    /// Writes `min(v, max_value)`.
    pub fn set_saturating(&mut self, j: usize, v: u8) {
        self.set(j, v.min(self.max_value()));
    }

    /// Number of registers equal to zero.
    pub fn zero_count(&self) -> usize {
        self.iter().filter(|&v| v == 0).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }
}

/// A packed array of bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitArray {
    len: usize,
    buf: Vec<u8>,
}

impl BitArray {
    pub fn new(len: usize, fill: bool) -> Self {
        let mut buf = vec![if fill { 0xff } else { 0 }; byte_len(len, 1)];
        if fill && !len.is_multiple_of(8) {
            let last = buf.len() - 1;
            buf[last] = (1u8 << (len % 8)) - 1;
        }
        Self { len, buf }
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != byte_len(len, 1) {
            return Err(Error::Format(format!(
                "expected {} bit-array bytes, found {}",
                byte_len(len, 1),
                bytes.len()
            )));
        }
        if !len.is_multiple_of(8) && bytes[bytes.len() - 1] >> (len % 8) != 0 {
            return Err(Error::Format("nonzero padding bits".into()));
        }
        Ok(Self {
            len,
            buf: bytes.to_vec(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn memory_bits(&self) -> u64 {
        self.len as u64
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        assert!(
            j < self.len,
            "bit index {j} out of bounds for length {}",
            self.len
        );
        (self.buf[j / 8] >> (j % 8)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, v: bool) {
        assert!(
            j < self.len,
            "bit index {j} out of bounds for length {}",
            self.len
        );
        let mask = 1u8 << (j % 8);
        if v {
            self.buf[j / 8] |= mask;
        } else {
            self.buf[j / 8] &= !mask;
        }
    }

    pub fn checked_get(&self, j: usize) -> Result<bool> {
        if j >= self.len {
            return Err(Error::IndexOutOfBounds {
                index: j,
                len: self.len,
            });
        }
        Ok(self.get(j))
    }

    pub fn checked_set(&mut self, j: usize, v: bool) -> Result<()> {
        if j >= self.len {
            return Err(Error::IndexOutOfBounds {
                index: j,
                len: self.len,
            });
        }
        self.set(j, v);
        Ok(())
    }

    pub fn count_ones(&self) -> usize {
        self.buf.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn zero_count(&self) -> usize {
        self.len - self.count_ones()
    }

    /// Bitwise OR with an array of the same length.
    pub fn or_assign(&mut self, other: &BitArray) {
        assert_eq!(self.len, other.len, "bit arrays differ in length");
        for (a, b) in self.buf.iter_mut().zip(&other.buf) {
            *a |= *b;
        }
    }
}

#[inline]
fn byte_len(len: usize, width: u8) -> usize {
    (len * width as usize).div_ceil(8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fill_and_size() {
        let a = PackedRegisterArray::new(16, 6, 0).unwrap();
        assert!(a.iter().all(|v| v == 0));
        let b = PackedRegisterArray::new(8, 1, 1).unwrap();
        assert!(b.iter().all(|v| v == 1));
        let c = PackedRegisterArray::new(1024, 6, 0).unwrap();
        assert_eq!(c.memory_bits(), 6144);
        assert_eq!(c.as_bytes().len(), 768);
        let d = PackedRegisterArray::new(13, 7, 127).unwrap();
        assert_eq!(d.as_bytes().len(), 12);
        assert!(d.iter().all(|v| v == 127));
    }

    #[test]
    fn invalid_construction() {
        assert_eq!(
            PackedRegisterArray::new(4, 0, 0),
            Err(Error::InvalidWidth(0))
        );
        assert_eq!(
            PackedRegisterArray::new(4, 9, 0),
            Err(Error::InvalidWidth(9))
        );
        assert_eq!(
            PackedRegisterArray::new(4, 4, 16),
            Err(Error::ValueOverflow {
                value: 16,
                width: 4
            })
        );
    }

    #[test]
    fn round_trip_and_isolation() {
        let mut a = PackedRegisterArray::new(16, 6, 0).unwrap();
        a.set(3, 63);
        assert_eq!(a.get(3), 63);
        a.set(3, 5);
        assert_eq!(a.get(2), 0);
        assert_eq!(a.get(4), 0);
        assert_eq!(a.get(3), 5);
        assert_eq!(
            a.checked_get(16),
            Err(Error::IndexOutOfBounds { index: 16, len: 16 })
        );
        assert_eq!(
            a.checked_set(0, 64),
            Err(Error::ValueOverflow {
                value: 64,
                width: 6
            })
        );
        a.set_saturating(0, 200);
        assert_eq!(a.get(0), 63);
    }

    #[test]
    fn zero_count_tracks_writes() {
        let mut a = PackedRegisterArray::new(16, 6, 0).unwrap();
        assert_eq!(a.zero_count(), 16);
        a.set(7, 1);
        assert_eq!(a.zero_count(), 15);
    }

    #[test]
    fn fuzz_against_mirror() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for width in 1..=8u8 {
            let len = rng.gen_range(1..500);
            let mut packed = PackedRegisterArray::new(len, width, 0).unwrap();
            let mut mirror = vec![0u8; len];
            let max = packed.max_value();
            for _ in 0..100_000 / 8 {
                let j = rng.gen_range(0..len);
                let v = rng.gen_range(0..=max);
                packed.set(j, v);
                mirror[j] = v;
                let k = rng.gen_range(0..len);
                assert_eq!(packed.get(k), mirror[k]);
            }
            assert!(packed.iter().eq(mirror.iter().copied()));
            assert_eq!(
                packed.zero_count(),
                mirror.iter().filter(|&&v| v == 0).count()
            );
        }
    }

    #[test]
    fn bit_array_basics() {
        let mut bits = BitArray::new(13, true);
        assert_eq!(bits.count_ones(), 13);
        assert_eq!(bits.as_bytes(), &[0xff, 0x1f]);
        bits.set(4, false);
        assert!(!bits.get(4));
        assert!(bits.get(3) && bits.get(5));
        assert_eq!(bits.zero_count(), 1);
        let mut other = BitArray::new(13, false);
        other.set(12, true);
        let mut empty = BitArray::new(13, false);
        empty.or_assign(&other);
        assert_eq!(empty.count_ones(), 1);
        assert!(BitArray::from_bytes(13, &[0, 0x20]).is_err());
        assert!(BitArray::from_bytes(13, &[0]).is_err());
    }

    proptest! {
        #[test]
        fn packed_ops_match_mirror(
            width in 1u8..=8,
            len in 1usize..200,
            ops in proptest::collection::vec((any::<usize>(), any::<u8>()), 0..400),
        ) {
            let mut packed = PackedRegisterArray::new(len, width, 0).unwrap();
            let mut mirror = vec![0u8; len];
            for (j, v) in ops {
                let j = j % len;
                let v = v & packed.max_value();
                packed.set(j, v);
                mirror[j] = v;
            }
            prop_assert!(packed.iter().eq(mirror.iter().copied()));
            prop_assert_eq!(packed.as_bytes().len(), (len * width as usize).div_ceil(8));
            let rebuilt = PackedRegisterArray::from_bytes(len, width, packed.as_bytes()).unwrap();
            prop_assert_eq!(rebuilt, packed);
        }

        #[test]
        fn bit_ops_match_mirror(
            len in 1usize..300,
            ops in proptest::collection::vec((any::<usize>(), any::<bool>()), 0..400),
        ) {
            let mut bits = BitArray::new(len, false);
            let mut mirror = vec![false; len];
            for (j, v) in ops {
                bits.set(j % len, v);
                mirror[j % len] = v;
            }
            for (j, &v) in mirror.iter().enumerate() {
                prop_assert_eq!(bits.get(j), v);
            }
            prop_assert_eq!(bits.count_ones(), mirror.iter().filter(|&&v| v).count());
        }
    }
}
