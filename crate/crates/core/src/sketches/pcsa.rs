use super::{
    check_compatible, pow2_term, CardinalitySketch, ChangeProbability, RawEstimate, Regime,
};
use crate::error::{Error, Result};
use crate::hashing::{BucketLayout, HashedElement};
use crate::register_store::BitArray;

/// Bias constant of the leftmost-zero statistic, `E[R] ≈ log2(φ n)`.
pub const PCSA_PHI: f64 = 0.77351;

/// Probabilistic counting with stochastic averaging: one FM85 bitmap of
/// `max_geo` bits per bucket, all stored in a single bit array.
#[derive(Debug, Clone, PartialEq)]
pub struct PcsaSketch {
    layout: BucketLayout,
    seed: u64,
    bitmaps: BitArray,
    term_sum: u128,
}

impl PcsaSketch {
    pub fn new(b: u8, seed: u64) -> Result<Self> {
        Ok(Self::with_layout(BucketLayout::with_precision(b)?, seed))
    }

    pub fn with_layout(layout: BucketLayout, seed: u64) -> Self {
        let m = layout.registers() as usize;
        let width = layout.max_geo() as usize;
        Self {
            layout,
            seed,
            bitmaps: BitArray::new(m * width, false),
            term_sum: m as u128 * super::TERM_ONE,
        }
    }

    pub fn from_bitmaps(layout: BucketLayout, seed: u64, bitmaps: BitArray) -> Result<Self> {
        let mut sketch = Self::with_layout(layout, seed);
        if bitmaps.len() != sketch.bitmaps.len() {
            return Err(Error::Format(
                "bitmap length does not match the layout".into(),
            ));
        }
        sketch.bitmaps = bitmaps;
        sketch.resync_terms();
        Ok(sketch)
    }

    /// Bits per bucket.
    pub fn bitmap_width(&self) -> usize {
        self.layout.max_geo() as usize
    }

    pub fn bitmaps(&self) -> &BitArray {
        &self.bitmaps
    }

    /// Whether bucket `j` has seen `rho == geo`.
    pub fn bit(&self, j: usize, geo: u8) -> bool {
        self.bitmaps.get(j * self.bitmap_width() + geo as usize - 1)
    }

    /// Index of the lowest unset bit of bucket `j` (0-based).
    pub fn leftmost_zero(&self, j: usize) -> u32 {
        let width = self.bitmap_width();
        let start = j * width;
        (0..width)
            .find(|&i| !self.bitmaps.get(start + i))
            .unwrap_or(width) as u32
    }

    pub fn mean_leftmost_zero(&self) -> f64 {
        let m = self.layout.registers() as usize;
        (0..m).map(|j| self.leftmost_zero(j) as f64).sum::<f64>() / m as f64
    }

    /// Probability of `rho == geo`, with the saturation value absorbing the tail.
    #[inline]
    fn geo_mass(&self, geo: u8) -> u128 {
        let top = self.layout.max_geo();
        pow2_term(if geo == top { top - 1 } else { geo })
    }

    pub fn merge(&mut self, other: &PcsaSketch) -> Result<()> {
        check_compatible((self.layout, self.seed), (other.layout, other.seed))?;
        self.bitmaps.or_assign(&other.bitmaps);
        self.resync_terms();
        Ok(())
    }
}

impl CardinalitySketch for PcsaSketch {
    fn layout(&self) -> BucketLayout {
        self.layout
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn insert_hash(&mut self, h: HashedElement) -> bool {
        let s = self.layout.split(h);
        let pos = s.bucket as usize * self.bitmap_width() + s.geo as usize - 1;
        if self.bitmaps.get(pos) {
            return false;
        }
        self.bitmaps.set(pos, true);
        self.term_sum -= self.geo_mass(s.geo);
        true
    }

    /// `(m / φ) 2^mean(R)`.
    fn estimate(&self) -> RawEstimate {
        let m = self.layout.registers() as f64;
        RawEstimate {
            value: m / PCSA_PHI * self.mean_leftmost_zero().exp2(),
            regime: Regime::Raw,
        }
    }

    fn memory_bits(&self) -> u64 {
        self.bitmaps.memory_bits()
    }
}

impl ChangeProbability for PcsaSketch {
    fn term_sum(&self) -> u128 {
        self.term_sum
    }

    fn term_sum_from_scratch(&self) -> u128 {
        let m = self.layout.registers() as usize;
        let width = self.bitmap_width();
        let mut sum = 0;
        for j in 0..m {
            for geo in 1..=width as u8 {
                if !self.bitmaps.get(j * width + geo as usize - 1) {
                    sum += self.geo_mass(geo);
                }
            }
        }
        sum
    }

    fn resync_terms(&mut self) {
        self.term_sum = self.term_sum_from_scratch();
    }
}
