//! Mergeable sketches: PCSA, HyperLogLog and ExtendedHyperLogLog.

mod ehll;
mod hll;
mod pcsa;

use std::fmt;
use std::str::FromStr;

pub use ehll::{EhllCell, EhllSketch};
pub use hll::HllSketch;
pub use pcsa::{PcsaSketch, PCSA_PHI};

use crate::analysis;
use crate::error::{Error, Result};
use crate::hashing::{hash64, BucketLayout, HashedElement};
use crate::tailcut::{EhllTcSketch, HllTcSketch};

/// Which estimator produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    LinearCounting,
    Raw,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::LinearCounting => "linear-counting",
            Regime::Raw => "raw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawEstimate {
    pub value: f64,
    pub regime: Regime,
}

/// A sketch fed with hashed stream elements.
pub trait CardinalitySketch {
    fn layout(&self) -> BucketLayout;

    fn seed(&self) -> u64;

    /// Adds one hashed element; returns whether the sketch state changed.
    fn insert_hash(&mut self, h: HashedElement) -> bool;

    fn insert(&mut self, element: &[u8]) -> bool {
        let h = hash64(element, self.seed());
        self.insert_hash(h)
    }

    fn estimate(&self) -> RawEstimate;

    /// Register payload size in bits.
    fn memory_bits(&self) -> u64;

    fn registers(&self) -> u32 {
        self.layout().registers()
    }
}

/// Sketches whose probability of changing on the next distinct element is a
/// function of their state.
///
/// The per-cell change terms are kept as exact binary fractions scaled by
/// [`TERM_ONE`], so the running sum never drifts from the recomputed one.
pub trait ChangeProbability: CardinalitySketch {
    /// Running sum of per-cell change terms, scaled by `2^64`.
    fn term_sum(&self) -> u128;

    /// The same sum recomputed from the registers.
    fn term_sum_from_scratch(&self) -> u128;

    /// Replaces the running sum with the recomputed one.
    fn resync_terms(&mut self);

    /// Probability that the next distinct element changes the sketch.
    fn change_probability(&self) -> f64 {
        self.term_sum() as f64 / (TERM_ONE as f64 * self.registers() as f64)
    }
}

/// Fixed-point representation of 1.0 for change terms.
pub const TERM_ONE: u128 = 1 << 64;

/// `2^-k` in fixed point.
#[inline]
pub(crate) fn pow2_term(k: u8) -> u128 {
    debug_assert!(k <= 64);
    TERM_ONE >> k
}

/// Multiplier-times-`m^2`-times-indicator estimate with the small-range rule:
/// below `2.5 m`, switch to linear counting if some register is still empty.
pub(crate) fn corrected_estimate(bias: f64, m: u32, term_sum: u128, zeros: u32) -> RawEstimate {
    let mf = m as f64;
    let indicator = TERM_ONE as f64 / term_sum as f64;
    let raw = bias * mf * mf * indicator;
    if raw < 2.5 * mf && zeros > 0 {
        RawEstimate {
            value: analysis::linear_counting(m, zeros).expect("zeros in 1..=m"),
            regime: Regime::LinearCounting,
        }
    } else {
        RawEstimate {
            value: raw,
            regime: Regime::Raw,
        }
    }
}

pub(crate) fn check_compatible(a: (BucketLayout, u64), b: (BucketLayout, u64)) -> Result<()> {
    if a.0 != b.0 {
        return Err(Error::Incompatible(format!(
            "register counts differ ({} vs {})",
            a.0.registers(),
            b.0.registers()
        )));
    }
    if a.1 != b.1 {
        return Err(Error::Incompatible(format!(
            "hash seeds differ ({} vs {})",
            a.1, b.1
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SketchKind {
    Pcsa,
    Hll,
    Ehll,
    HllTc,
    EhllTc,
}

impl SketchKind {
    pub const ALL: [SketchKind; 5] = [
        SketchKind::Pcsa,
        SketchKind::Hll,
        SketchKind::Ehll,
        SketchKind::HllTc,
        SketchKind::EhllTc,
    ];

    /// Kind byte of the sketch file format.
    pub fn tag(self) -> u8 {
        match self {
            SketchKind::Pcsa => 1,
            SketchKind::Hll => 2,
            SketchKind::Ehll => 3,
            SketchKind::HllTc => 4,
            SketchKind::EhllTc => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            SketchKind::Pcsa => "pcsa",
            SketchKind::Hll => "hll",
            SketchKind::Ehll => "ehll",
            SketchKind::HllTc => "hll-tc",
            SketchKind::EhllTc => "ehll-tc",
        }
    }

    pub fn is_tailcut(self) -> bool {
        matches!(self, SketchKind::HllTc | SketchKind::EhllTc)
    }

    /// Large-`m` limit of the bias multiplier, `None` for PCSA.
    pub fn asymptotic_bias(self) -> Option<f64> {
        match self {
            SketchKind::Pcsa => None,
            SketchKind::Hll | SketchKind::HllTc => Some(analysis::hll_asymptotic_constants().0),
            SketchKind::Ehll | SketchKind::EhllTc => Some(analysis::asymptotic_constants().0),
        }
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown sketch kind `{s}`")))
    }
}

/// Any of the five sketch types.
#[derive(Debug, Clone, PartialEq)]
pub enum AnySketch {
    Pcsa(PcsaSketch),
    Hll(HllSketch),
    Ehll(EhllSketch),
    HllTc(HllTcSketch),
    EhllTc(EhllTcSketch),
}

macro_rules! dispatch {
    ($self:expr, $s:ident => $body:expr) => {
        match $self {
            AnySketch::Pcsa($s) => $body,
            AnySketch::Hll($s) => $body,
            AnySketch::Ehll($s) => $body,
            AnySketch::HllTc($s) => $body,
            AnySketch::EhllTc($s) => $body,
        }
    };
}

impl AnySketch {
    pub fn new(kind: SketchKind, layout: BucketLayout, seed: u64) -> Result<Self> {
        Ok(match kind {
            SketchKind::Pcsa => AnySketch::Pcsa(PcsaSketch::with_layout(layout, seed)),
            SketchKind::Hll => AnySketch::Hll(HllSketch::with_layout(layout, seed)?),
            SketchKind::Ehll => AnySketch::Ehll(EhllSketch::with_layout(layout, seed)?),
            SketchKind::HllTc => AnySketch::HllTc(HllTcSketch::with_layout(layout, seed)?),
            SketchKind::EhllTc => AnySketch::EhllTc(EhllTcSketch::with_layout(layout, seed)?),
        })
    }

    pub fn kind(&self) -> SketchKind {
        match self {
            AnySketch::Pcsa(_) => SketchKind::Pcsa,
            AnySketch::Hll(_) => SketchKind::Hll,
            AnySketch::Ehll(_) => SketchKind::Ehll,
            AnySketch::HllTc(_) => SketchKind::HllTc,
            AnySketch::EhllTc(_) => SketchKind::EhllTc,
        }
    }

    /// Merges `other` into `self`. Exact for PCSA, HLL and EHLL; approximate
    /// for the TailCut kinds.
    pub fn merge(&mut self, other: &AnySketch) -> Result<()> {
        match (self, other) {
            (AnySketch::Pcsa(a), AnySketch::Pcsa(b)) => a.merge(b),
            (AnySketch::Hll(a), AnySketch::Hll(b)) => a.merge(b),
            (AnySketch::Ehll(a), AnySketch::Ehll(b)) => a.merge(b),
            (AnySketch::HllTc(a), AnySketch::HllTc(b)) => a.merge(b),
            (AnySketch::EhllTc(a), AnySketch::EhllTc(b)) => a.merge(b),
            (a, b) => Err(Error::Incompatible(format!(
                "sketch kinds differ ({} vs {})",
                a.kind(),
                b.kind()
            ))),
        }
    }

    /// Estimate with an explicit bias multiplier (ignored by PCSA).
    pub fn estimate_with_bias(&self, bias: f64) -> RawEstimate {
        match self {
            AnySketch::Pcsa(s) => s.estimate(),
            AnySketch::Hll(s) => s.estimate_with_bias(bias),
            AnySketch::Ehll(s) => s.estimate_with_bias(bias),
            AnySketch::HllTc(s) => s.estimate_with_bias(bias),
            AnySketch::EhllTc(s) => s.estimate_with_bias(bias),
        }
    }
}

impl CardinalitySketch for AnySketch {
    fn layout(&self) -> BucketLayout {
        dispatch!(self, s => s.layout())
    }

    fn seed(&self) -> u64 {
        dispatch!(self, s => s.seed())
    }

    #[inline]
    fn insert_hash(&mut self, h: HashedElement) -> bool {
        dispatch!(self, s => s.insert_hash(h))
    }

    fn estimate(&self) -> RawEstimate {
        dispatch!(self, s => s.estimate())
    }

    fn memory_bits(&self) -> u64 {
        dispatch!(self, s => s.memory_bits())
    }
}

impl ChangeProbability for AnySketch {
    fn term_sum(&self) -> u128 {
        dispatch!(self, s => s.term_sum())
    }

    fn term_sum_from_scratch(&self) -> u128 {
        dispatch!(self, s => s.term_sum_from_scratch())
    }

    fn resync_terms(&mut self) {
        dispatch!(self, s => s.resync_terms())
    }
}
