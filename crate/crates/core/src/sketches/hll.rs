use super::{
    check_compatible, corrected_estimate, pow2_term, CardinalitySketch, ChangeProbability,
    RawEstimate,
};
use crate::analysis;
use crate::error::{Error, Result};
use crate::hashing::{BucketLayout, HashedElement};
use crate::register_store::PackedRegisterArray;

pub(crate) const REGISTER_WIDTH: u8 = 6;

/// HyperLogLog: one 6-bit register per bucket holding the largest `rho` seen.
#[derive(Debug, Clone, PartialEq)]
pub struct HllSketch {
    layout: BucketLayout,
    seed: u64,
    registers: PackedRegisterArray,
    zeros: u32,
    term_sum: u128,
    alpha: f64,
}

impl HllSketch {
    pub fn new(b: u8, seed: u64) -> Result<Self> {
        Self::with_layout(BucketLayout::with_precision(b)?, seed)
    }

    pub fn with_layout(layout: BucketLayout, seed: u64) -> Result<Self> {
        let m = layout.registers();
        Ok(Self {
            layout,
            seed,
            registers: PackedRegisterArray::new(m as usize, REGISTER_WIDTH, 0)?,
            zeros: m,
            term_sum: m as u128 * pow2_term(0),
            alpha: analysis::alpha_m(m)?,
        })
    }

    /// Rebuilds a sketch from stored registers, validating their range.
    pub fn from_registers(
        layout: BucketLayout,
        seed: u64,
        registers: PackedRegisterArray,
    ) -> Result<Self> {
        if registers.len() != layout.registers() as usize || registers.width() != REGISTER_WIDTH {
            return Err(Error::Format(
                "register array does not match the layout".into(),
            ));
        }
        if let Some(v) = registers.iter().find(|&v| v > layout.max_geo()) {
            return Err(Error::Format(format!(
                "register value {v} exceeds the maximum rho"
            )));
        }
        let mut sketch = Self::with_layout(layout, seed)?;
        sketch.registers = registers;
        sketch.zeros = sketch.registers.zero_count() as u32;
        sketch.resync_terms();
        Ok(sketch)
    }

    pub fn registers_array(&self) -> &PackedRegisterArray {
        &self.registers
    }

    #[inline]
    pub fn register(&self, j: usize) -> u8 {
        self.registers.get(j)
    }

    /// `Z = (Σ 2^-C[j])^-1`.
    pub fn indicator(&self) -> f64 {
        super::TERM_ONE as f64 / self.term_sum as f64
    }

    /// Quadrature bias correction used by [`CardinalitySketch::estimate`].
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn estimate_with_bias(&self, alpha: f64) -> RawEstimate {
        corrected_estimate(alpha, self.layout.registers(), self.term_sum, self.zeros)
    }

    /// Cell-wise maximum.
    pub fn merge(&mut self, other: &HllSketch) -> Result<()> {
        check_compatible((self.layout, self.seed), (other.layout, other.seed))?;
        for j in 0..self.registers.len() {
            let v = other.registers.get(j);
            if v > self.registers.get(j) {
                self.registers.set(j, v);
            }
        }
        self.zeros = self.registers.zero_count() as u32;
        self.resync_terms();
        Ok(())
    }
}

impl CardinalitySketch for HllSketch {
    fn layout(&self) -> BucketLayout {
        self.layout
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn insert_hash(&mut self, h: HashedElement) -> bool {
        let s = self.layout.split(h);
        let j = s.bucket as usize;
        let current = self.registers.get(j);
        if s.geo <= current {
            return false;
        }
        self.registers.set(j, s.geo);
        self.term_sum = self.term_sum - pow2_term(current) + pow2_term(s.geo);
        if current == 0 {
            self.zeros -= 1;
        }
        true
    }

    fn estimate(&self) -> RawEstimate {
        self.estimate_with_bias(self.alpha)
    }

    fn memory_bits(&self) -> u64 {
        self.registers.memory_bits()
    }
}

impl ChangeProbability for HllSketch {
    fn term_sum(&self) -> u128 {
        self.term_sum
    }

    fn term_sum_from_scratch(&self) -> u128 {
        self.registers.iter().map(pow2_term).sum()
    }

    fn resync_terms(&mut self) {
        self.term_sum = self.term_sum_from_scratch();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketches::Regime;

    /// A hash that lands in `bucket` with the given `geo` for precision `b`.
    fn crafted(b: u8, bucket: u64, geo: u8) -> HashedElement {
        HashedElement::new((bucket << (64 - b)) | (1u64 << (geo - 1)))
    }

    #[test]
    fn insert_and_idempotence() {
        let mut s = HllSketch::new(4, 0).unwrap();
        assert!(s.insert_hash(crafted(4, 3, 1)));
        assert_eq!(s.register(3), 1);
        assert!(!s.insert_hash(crafted(4, 3, 1)));
        assert!(s.insert(b"x"));
        assert!(!s.insert(b"x"));
    }

    #[test]
    fn indicator_values() {
        let mut s = HllSketch::new(4, 0).unwrap();
        assert_eq!(s.indicator(), 1.0 / 16.0);
        assert_eq!(s.change_probability(), 1.0);
        // Z = 1 / (14 + 1/2 + 1/4)
        s.insert_hash(crafted(4, 0, 1));
        s.insert_hash(crafted(4, 1, 2));
        assert_eq!(s.indicator(), 1.0 / 14.75);
        assert_eq!(s.term_sum(), s.term_sum_from_scratch());
    }

    #[test]
    fn empty_estimate_is_zero() {
        let s = HllSketch::new(10, 0).unwrap();
        let e = s.estimate();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.regime, Regime::LinearCounting);
        assert_eq!(s.memory_bits(), 6144);
    }

    #[test]
    fn linear_counting_for_one_element() {
        let mut s = HllSketch::new(10, 0).unwrap();
        for _ in 0..1000 {
            s.insert(b"token");
        }
        let e = s.estimate();
        assert_eq!(e.regime, Regime::LinearCounting);
        assert!((e.value - 1024.0 * (1024.0f64 / 1023.0).ln()).abs() < 1e-12);
        assert!((e.value - 1.0005).abs() < 1e-4);
    }

    #[test]
    fn saturated_small_sketch_uses_raw() {
        // every register at 1: raw = alpha * m^2 / (m / 2) < 2.5 m but no zeros
        let mut s = HllSketch::new(4, 0).unwrap();
        for j in 0..16 {
            s.insert_hash(crafted(4, j, 1));
        }
        let e = s.estimate();
        assert_eq!(e.regime, Regime::Raw);
        assert!((e.value - s.alpha() * 32.0).abs() < 1e-12);
        assert!(e.value < 2.5 * 16.0);
    }

    #[test]
    fn merge_mismatch() {
        let mut a = HllSketch::new(4, 0).unwrap();
        assert!(a.merge(&HllSketch::new(5, 0).unwrap()).is_err());
        assert!(a.merge(&HllSketch::new(4, 1).unwrap()).is_err());
    }

    #[test]
    fn non_power_of_two_layout() {
        let layout = BucketLayout::with_registers(1195).unwrap();
        let mut s = HllSketch::with_layout(layout, 3).unwrap();
        for i in 0u64..5000 {
            s.insert(&i.to_le_bytes());
        }
        assert_eq!(s.memory_bits(), 7170);
        let e = s.estimate().value;
        assert!((e / 5000.0 - 1.0).abs() < 0.15, "{e}");
    }
}
