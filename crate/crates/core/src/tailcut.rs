//! TailCut variants of HLL and EHLL.
//!
//! Registers are stored as 4-bit offsets from a shared base. Whenever every
//! offset is positive the common minimum moves into the base. Offsets that
//! would exceed 15 are clamped, which makes the state depend on arrival order
//! and makes merging approximate.

use crate::analysis;
use crate::error::{Error, Result};
use crate::hashing::{BucketLayout, HashedElement};
use crate::register_store::{BitArray, PackedRegisterArray};
use crate::sketches::{
    check_compatible, corrected_estimate, pow2_term, CardinalitySketch, ChangeProbability,
    EhllCell, RawEstimate,
};

pub const OFFSET_WIDTH: u8 = 4;
pub const MAX_OFFSET: u8 = 15;

/// Offsets plus base, shared by both variants.
#[derive(Debug, Clone, PartialEq)]
struct OffsetRegisters {
    base: u8,
    offsets: PackedRegisterArray,
    zero_offsets: u32,
}

impl OffsetRegisters {
    fn new(m: u32) -> Result<Self> {
        Ok(Self {
            base: 0,
            offsets: PackedRegisterArray::new(m as usize, OFFSET_WIDTH, 0)?,
            zero_offsets: m,
        })
    }

    fn from_parts(base: u8, offsets: PackedRegisterArray) -> Result<Self> {
        let zero_offsets = offsets.zero_count() as u32;
        if zero_offsets == 0 {
            return Err(Error::Format(
                "no zero offset: base is not the register minimum".into(),
            ));
        }
        Ok(Self {
            base,
            offsets,
            zero_offsets,
        })
    }

    /// Rebuilds from effective values, choosing the minimum as the base.
    /// Returns the indices whose offsets had to be clamped.
    fn from_effective(values: &[u8]) -> Result<(Self, Vec<usize>)> {
        let base = values.iter().copied().min().unwrap_or(0);
        let mut regs = Self::new(values.len() as u32)?;
        regs.base = base;
        let mut clamped = Vec::new();
        for (j, &v) in values.iter().enumerate() {
            let off = v - base;
            if off > MAX_OFFSET {
                clamped.push(j);
            }
            regs.offsets.set(j, off.min(MAX_OFFSET));
        }
        regs.zero_offsets = regs.offsets.zero_count() as u32;
        Ok((regs, clamped))
    }

    fn check_range(&self, max_geo: u8) -> Result<()> {
        let top = self.offsets.iter().max().unwrap_or(0) as u32 + self.base as u32;
        if top > max_geo as u32 {
            return Err(Error::Format(format!(
                "register value {top} exceeds the maximum rho"
            )));
        }
        Ok(())
    }

    #[inline]
    fn effective(&self, j: usize) -> u8 {
        self.base + self.offsets.get(j)
    }

    /// Stores the effective value `level`, clamping the offset. Returns the
    /// stored level.
    #[inline]
    fn store(&mut self, j: usize, old_offset: u8, level: u8) -> u8 {
        let off = (level - self.base).min(MAX_OFFSET);
        if off != old_offset {
            self.offsets.set(j, off);
            if old_offset == 0 {
                self.zero_offsets -= 1;
            }
        }
        self.base + off
    }

    /// Moves the common minimum into the base once no offset is zero.
    /// Effective values are unchanged.
    fn promote_if_needed(&mut self) {
        if self.zero_offsets > 0 {
            return;
        }
        let min = self.offsets.iter().min().expect("non-empty");
        self.base += min;
        let mut zeros = 0;
        for j in 0..self.offsets.len() {
            let off = self.offsets.get(j) - min;
            self.offsets.set(j, off);
            zeros += (off == 0) as u32;
        }
        self.zero_offsets = zeros;
    }

    /// Registers whose effective value is zero.
    fn empty_registers(&self) -> u32 {
        if self.base == 0 {
            self.zero_offsets
        } else {
            0
        }
    }

    fn len(&self) -> usize {
        self.offsets.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HllTcSketch {
    layout: BucketLayout,
    seed: u64,
    regs: OffsetRegisters,
    term_sum: u128,
    alpha: f64,
}

impl HllTcSketch {
    pub fn new(b: u8, seed: u64) -> Result<Self> {
        Self::with_layout(BucketLayout::with_precision(b)?, seed)
    }

    pub fn with_layout(layout: BucketLayout, seed: u64) -> Result<Self> {
        let m = layout.registers();
        Ok(Self {
            layout,
            seed,
            regs: OffsetRegisters::new(m)?,
            term_sum: m as u128 * pow2_term(0),
            alpha: analysis::alpha_m(m)?,
        })
    }

    pub fn from_parts(
        layout: BucketLayout,
        seed: u64,
        base: u8,
        offsets: PackedRegisterArray,
    ) -> Result<Self> {
        if offsets.len() != layout.registers() as usize || offsets.width() != OFFSET_WIDTH {
            return Err(Error::Format(
                "offset array does not match the layout".into(),
            ));
        }
        let mut sketch = Self::with_layout(layout, seed)?;
        sketch.regs = OffsetRegisters::from_parts(base, offsets)?;
        sketch.regs.check_range(layout.max_geo())?;
        sketch.resync_terms();
        Ok(sketch)
    }

    pub fn base(&self) -> u8 {
        self.regs.base
    }

    pub fn offset(&self, j: usize) -> u8 {
        self.regs.offsets.get(j)
    }

    pub fn offsets(&self) -> &PackedRegisterArray {
        &self.regs.offsets
    }

    /// `base + offset[j]`.
    pub fn effective(&self, j: usize) -> u8 {
        self.regs.effective(j)
    }

    pub fn indicator(&self) -> f64 {
        crate::sketches::TERM_ONE as f64 / self.term_sum as f64
    }

    pub fn estimate_with_bias(&self, alpha: f64) -> RawEstimate {
        corrected_estimate(
            alpha,
            self.layout.registers(),
            self.term_sum,
            self.regs.empty_registers(),
        )
    }

    /// Cell-wise maximum of effective values, rebased and re-clamped.
    pub fn merge(&mut self, other: &HllTcSketch) -> Result<()> {
        check_compatible((self.layout, self.seed), (other.layout, other.seed))?;
        let values: Vec<u8> = (0..self.regs.len())
            .map(|j| self.effective(j).max(other.effective(j)))
            .collect();
        self.regs = OffsetRegisters::from_effective(&values)?.0;
        self.resync_terms();
        Ok(())
    }
}

impl CardinalitySketch for HllTcSketch {
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
        let off = self.regs.offsets.get(j);
        let current = self.regs.base + off;
        if s.geo <= current {
            return false;
        }
        let stored = self.regs.store(j, off, s.geo);
        if stored == current {
            return false;
        }
        self.term_sum = self.term_sum - pow2_term(current) + pow2_term(stored);
        self.regs.promote_if_needed();
        true
    }

    fn estimate(&self) -> RawEstimate {
        self.estimate_with_bias(self.alpha)
    }

    fn memory_bits(&self) -> u64 {
        self.regs.offsets.memory_bits()
    }
}

impl ChangeProbability for HllTcSketch {
    fn term_sum(&self) -> u128 {
        self.term_sum
    }

    fn term_sum_from_scratch(&self) -> u128 {
        (0..self.regs.len())
            .map(|j| pow2_term(self.effective(j)))
            .sum()
    }

    fn resync_terms(&mut self) {
        self.term_sum = self.term_sum_from_scratch();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EhllTcSketch {
    layout: BucketLayout,
    seed: u64,
    regs: OffsetRegisters,
    neighbors: BitArray,
    term_sum: u128,
    gamma: f64,
}

impl EhllTcSketch {
    pub fn new(b: u8, seed: u64) -> Result<Self> {
        Self::with_layout(BucketLayout::with_precision(b)?, seed)
    }

    pub fn with_layout(layout: BucketLayout, seed: u64) -> Result<Self> {
        let m = layout.registers();
        Ok(Self {
            layout,
            seed,
            regs: OffsetRegisters::new(m)?,
            neighbors: BitArray::new(m as usize, true),
            term_sum: m as u128 * EhllCell::EMPTY.change_term(),
            gamma: analysis::gamma_m(m)?,
        })
    }

    pub fn from_parts(
        layout: BucketLayout,
        seed: u64,
        base: u8,
        offsets: PackedRegisterArray,
        neighbors: BitArray,
    ) -> Result<Self> {
        let m = layout.registers() as usize;
        if offsets.len() != m || offsets.width() != OFFSET_WIDTH || neighbors.len() != m {
            return Err(Error::Format(
                "register arrays do not match the layout".into(),
            ));
        }
        let mut sketch = Self::with_layout(layout, seed)?;
        sketch.regs = OffsetRegisters::from_parts(base, offsets)?;
        sketch.regs.check_range(layout.max_geo())?;
        sketch.neighbors = neighbors;
        if let Some(j) = (0..m).find(|&j| !sketch.cell(j).is_reachable()) {
            return Err(Error::Format(format!("unreachable register state at {j}")));
        }
        sketch.resync_terms();
        Ok(sketch)
    }

    pub fn base(&self) -> u8 {
        self.regs.base
    }

    pub fn offset(&self, j: usize) -> u8 {
        self.regs.offsets.get(j)
    }

    pub fn offsets(&self) -> &PackedRegisterArray {
        &self.regs.offsets
    }

    pub fn neighbors(&self) -> &BitArray {
        &self.neighbors
    }

    /// Effective `(base + offset, neighbor)` cell.
    #[inline]
    pub fn cell(&self, j: usize) -> EhllCell {
        EhllCell::new(self.regs.effective(j), self.neighbors.get(j))
    }

    pub fn indicator(&self) -> f64 {
        crate::sketches::TERM_ONE as f64 / self.term_sum as f64
    }

    pub fn estimate_with_bias(&self, gamma: f64) -> RawEstimate {
        corrected_estimate(
            gamma,
            self.layout.registers(),
            self.term_sum,
            self.regs.empty_registers(),
        )
    }

    /// EHLL cell merge on effective cells, rebased; clamped cells lose their
    /// neighbor bit.
    pub fn merge(&mut self, other: &EhllTcSketch) -> Result<()> {
        check_compatible((self.layout, self.seed), (other.layout, other.seed))?;
        let cells: Vec<EhllCell> = (0..self.regs.len())
            .map(|j| self.cell(j).merge(other.cell(j)))
            .collect();
        let levels: Vec<u8> = cells.iter().map(|c| c.level).collect();
        let (regs, clamped) = OffsetRegisters::from_effective(&levels)?;
        self.regs = regs;
        for (j, c) in cells.iter().enumerate() {
            self.neighbors.set(j, c.neighbor);
        }
        for j in clamped {
            self.neighbors.set(j, false);
        }
        self.resync_terms();
        Ok(())
    }
}

impl CardinalitySketch for EhllTcSketch {
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
        let off = self.regs.offsets.get(j);
        let old = EhllCell::new(self.regs.base + off, self.neighbors.get(j));
        let target = old.update(s.geo);
        if target == old {
            return false;
        }
        let ceiling = self.regs.base + MAX_OFFSET;
        let new = if target.level <= ceiling {
            target
        } else if old.level == ceiling {
            // already at the ceiling: the observation cannot be stored
            return false;
        } else {
            EhllCell::new(ceiling, false)
        };
        self.regs.store(j, off, new.level);
        if new.neighbor != old.neighbor {
            self.neighbors.set(j, new.neighbor);
        }
        self.term_sum = self.term_sum - old.change_term() + new.change_term();
        self.regs.promote_if_needed();
        true
    }

    fn estimate(&self) -> RawEstimate {
        self.estimate_with_bias(self.gamma)
    }

    fn memory_bits(&self) -> u64 {
        self.regs.offsets.memory_bits() + self.neighbors.memory_bits()
    }
}

impl ChangeProbability for EhllTcSketch {
    fn term_sum(&self) -> u128 {
        self.term_sum
    }

    fn term_sum_from_scratch(&self) -> u128 {
        (0..self.regs.len())
            .map(|j| self.cell(j).change_term())
            .sum()
    }

    fn resync_terms(&mut self) {
        self.term_sum = self.term_sum_from_scratch();
    }
}
