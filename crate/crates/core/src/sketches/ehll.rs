use super::hll::REGISTER_WIDTH;
use super::{
    check_compatible, corrected_estimate, pow2_term, CardinalitySketch, ChangeProbability,
    RawEstimate,
};
use crate::analysis;
use crate::error::{Error, Result};
use crate::hashing::{BucketLayout, HashedElement};
use crate::register_store::{BitArray, PackedRegisterArray};

/// One EHLL register: the largest `rho` seen (`level`) and whether `level - 1`
/// was also seen (`neighbor`). Levels 0 and 1 always carry `neighbor = true`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EhllCell {
    pub level: u8,
    pub neighbor: bool,
}

impl EhllCell {
    pub const EMPTY: EhllCell = EhllCell {
        level: 0,
        neighbor: true,
    };

    pub const fn new(level: u8, neighbor: bool) -> Self {
        Self { level, neighbor }
    }

    /// State after observing `geo`.
    #[inline]
    pub fn update(self, geo: u8) -> EhllCell {
        if geo == self.level + 1 {
            EhllCell::new(geo, true)
        } else if geo > self.level + 1 {
            EhllCell::new(geo, false)
        } else if !self.neighbor && geo + 1 == self.level {
            EhllCell::new(self.level, true)
        } else {
            self
        }
    }

    /// State of the union of the two observation sets.
    pub fn merge(self, other: EhllCell) -> EhllCell {
        let (hi, lo) = if self.level >= other.level {
            (self, other)
        } else {
            (other, self)
        };
        if lo == EhllCell::EMPTY {
            hi
        } else if hi.level == lo.level {
            EhllCell::new(hi.level, hi.neighbor || lo.neighbor)
        } else if hi.level == lo.level + 1 {
            EhllCell::new(hi.level, true)
        } else {
            hi
        }
    }

    /// `2^-level + (1 - neighbor) 2^(1-level)` in fixed point.
    #[inline]
    pub fn change_term(self) -> u128 {
        let base = pow2_term(self.level);
        if self.neighbor {
            base
        } else {
            base + pow2_term(self.level - 1)
        }
    }

    pub fn change_term_f64(self) -> f64 {
        self.change_term() as f64 / super::TERM_ONE as f64
    }

    /// Whether some observation sequence produces this state.
    pub fn is_reachable(self) -> bool {
        self.level > 1 || self.neighbor
    }
}

/// ExtendedHyperLogLog: HLL registers plus one bit per register recording
/// whether the position just below the maximum was also hit.
#[derive(Debug, Clone, PartialEq)]
pub struct EhllSketch {
    layout: BucketLayout,
    seed: u64,
    levels: PackedRegisterArray,
    neighbors: BitArray,
    zeros: u32,
    term_sum: u128,
    gamma: f64,
}

impl EhllSketch {
    pub fn new(b: u8, seed: u64) -> Result<Self> {
        Self::with_layout(BucketLayout::with_precision(b)?, seed)
    }

    pub fn with_layout(layout: BucketLayout, seed: u64) -> Result<Self> {
        let m = layout.registers();
        Ok(Self {
            layout,
            seed,
            levels: PackedRegisterArray::new(m as usize, REGISTER_WIDTH, 0)?,
            neighbors: BitArray::new(m as usize, true),
            zeros: m,
            term_sum: m as u128 * EhllCell::EMPTY.change_term(),
            gamma: analysis::gamma_m(m)?,
        })
    }

    pub fn from_parts(
        layout: BucketLayout,
        seed: u64,
        levels: PackedRegisterArray,
        neighbors: BitArray,
    ) -> Result<Self> {
        let m = layout.registers() as usize;
        if levels.len() != m || levels.width() != REGISTER_WIDTH || neighbors.len() != m {
            return Err(Error::Format(
                "register arrays do not match the layout".into(),
            ));
        }
        let mut sketch = Self::with_layout(layout, seed)?;
        sketch.levels = levels;
        sketch.neighbors = neighbors;
        for j in 0..m {
            let c = sketch.cell(j);
            if c.level > layout.max_geo() || !c.is_reachable() {
                return Err(Error::Format(format!(
                    "unreachable register state {c:?} at {j}"
                )));
            }
        }
        sketch.zeros = sketch.levels.zero_count() as u32;
        sketch.resync_terms();
        Ok(sketch)
    }

    #[inline]
    pub fn cell(&self, j: usize) -> EhllCell {
        EhllCell::new(self.levels.get(j), self.neighbors.get(j))
    }

    pub fn cells(&self) -> impl Iterator<Item = EhllCell> + '_ {
        (0..self.levels.len()).map(|j| self.cell(j))
    }

    pub fn levels(&self) -> &PackedRegisterArray {
        &self.levels
    }

    pub fn neighbors(&self) -> &BitArray {
        &self.neighbors
    }

    #[inline]
    fn store(&mut self, j: usize, old: EhllCell, new: EhllCell) {
        if new.level != old.level {
            self.levels.set(j, new.level);
            if old.level == 0 {
                self.zeros -= 1;
            }
        }
        if new.neighbor != old.neighbor {
            self.neighbors.set(j, new.neighbor);
        }
    }

    /// `Y = (Σ 2^-C1[j] + (1 - C2[j]) 2^(1-C1[j]))^-1`.
    pub fn indicator(&self) -> f64 {
        super::TERM_ONE as f64 / self.term_sum as f64
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn estimate_with_bias(&self, gamma: f64) -> RawEstimate {
        corrected_estimate(gamma, self.layout.registers(), self.term_sum, self.zeros)
    }

    pub fn merge(&mut self, other: &EhllSketch) -> Result<()> {
        check_compatible((self.layout, self.seed), (other.layout, other.seed))?;
        for j in 0..self.levels.len() {
            let old = self.cell(j);
            let new = old.merge(other.cell(j));
            self.store(j, old, new);
        }
        self.resync_terms();
        Ok(())
    }
}

impl CardinalitySketch for EhllSketch {
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
        let old = self.cell(j);
        let new = old.update(s.geo);
        if new == old {
            return false;
        }
        self.store(j, old, new);
        self.term_sum = self.term_sum - old.change_term() + new.change_term();
        true
    }

    fn estimate(&self) -> RawEstimate {
        self.estimate_with_bias(self.gamma)
    }

    fn memory_bits(&self) -> u64 {
        self.levels.memory_bits() + self.neighbors.memory_bits()
    }
}

impl ChangeProbability for EhllSketch {
    fn term_sum(&self) -> u128 {
        self.term_sum
    }

    fn term_sum_from_scratch(&self) -> u128 {
        self.cells().map(EhllCell::change_term).sum()
    }

    fn resync_terms(&mut self) {
        self.term_sum = self.term_sum_from_scratch();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketches::Regime;

    fn crafted(b: u8, bucket: u64, geo: u8) -> HashedElement {
        HashedElement::new((bucket << (64 - b)) | (1u64 << (geo - 1)))
    }

    #[test]
    fn cell_transitions() {
        assert_eq!(EhllCell::EMPTY.update(1), EhllCell::new(1, true));
        assert_eq!(EhllCell::EMPTY.update(3), EhllCell::new(3, false));
        let c = EhllCell::new(3, false).update(2);
        assert_eq!(c, EhllCell::new(3, true));
        assert_eq!(c.update(2), c);
        // below the neighbor and at the level itself: no change
        assert_eq!(EhllCell::new(5, false).update(3), EhllCell::new(5, false));
        assert_eq!(EhllCell::new(5, false).update(5), EhllCell::new(5, false));
        assert_eq!(EhllCell::new(5, true).update(6), EhllCell::new(6, true));
    }

    #[test]
    fn cell_merge_rule() {
        let e = EhllCell::EMPTY;
        let a = EhllCell::new(4, false);
        assert_eq!(a.merge(e), a);
        assert_eq!(e.merge(a), a);
        assert_eq!(a.merge(EhllCell::new(4, true)), EhllCell::new(4, true));
        assert_eq!(a.merge(EhllCell::new(3, false)), EhllCell::new(4, true));
        assert_eq!(a.merge(EhllCell::new(2, true)), a);
        assert_eq!(EhllCell::new(1, true).merge(e), EhllCell::new(1, true));
    }

    #[test]
    fn indicator_values() {
        let s = EhllSketch::new(4, 0).unwrap();
        assert_eq!(s.indicator(), 1.0 / 16.0);
        assert_eq!(s.change_probability(), 1.0);
        // single-cell values from the formula
        assert_eq!(1.0 / EhllCell::new(3, false).change_term_f64(), 8.0 / 3.0);
        assert_eq!(EhllCell::new(3, false).change_term_f64(), 3.0 / 8.0);
        let pair =
            EhllCell::new(1, true).change_term_f64() + EhllCell::new(2, false).change_term_f64();
        assert_eq!(1.0 / pair, 4.0 / 5.0);
    }

    #[test]
    fn sketch_tracks_cells() {
        let mut s = EhllSketch::new(4, 0).unwrap();
        assert!(s.insert_hash(crafted(4, 2, 3)));
        assert_eq!(s.cell(2), EhllCell::new(3, false));
        assert!(s.insert_hash(crafted(4, 2, 2)));
        assert_eq!(s.cell(2), EhllCell::new(3, true));
        assert!(!s.insert_hash(crafted(4, 2, 2)));
        assert_eq!(s.term_sum(), s.term_sum_from_scratch());
        assert_eq!(s.memory_bits(), 7 * 16);
    }

    #[test]
    fn empty_estimate_is_zero() {
        let s = EhllSketch::new(10, 0).unwrap();
        assert_eq!(s.estimate().value, 0.0);
        assert_eq!(s.estimate().regime, Regime::LinearCounting);
        assert_eq!(s.memory_bits(), 7168);
    }

    #[test]
    fn rejects_unreachable_states() {
        let layout = BucketLayout::with_precision(4).unwrap();
        let levels = PackedRegisterArray::new(16, 6, 0).unwrap();
        let mut neighbors = BitArray::new(16, true);
        neighbors.set(0, false);
        assert!(EhllSketch::from_parts(layout, 0, levels, neighbors).is_err());
    }
}
