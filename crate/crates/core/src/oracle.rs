//! Brute-force references for the test suite and the `oracle` CLI commands.
//!
//! Nothing here reuses the production register transitions: cells are derived
//! from full occupancy bitmaps, expectations are summed over the exact joint
//! distribution of a bucket's `(max, neighbor)` pair, and change
//! probabilities are enumerated geo by geo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hashing::{hash64, BucketLayout, HashedElement};
use crate::sketches::{AnySketch, CardinalitySketch, SketchKind};

/// Every geo value seen by one bucket, bit `g - 1` for geo `g`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ShadowBucket {
    pub bits: u128,
}

impl ShadowBucket {
    pub fn observe(&mut self, geo: u8) {
        debug_assert!((1..=128).contains(&geo));
        self.bits |= 1u128 << (geo - 1);
    }

    pub fn has(&self, geo: u8) -> bool {
        geo >= 1 && self.bits >> (geo - 1) & 1 == 1
    }

    /// Highest geo seen, 0 if none.
    pub fn max_geo(&self) -> u8 {
        (128 - self.bits.leading_zeros()) as u8
    }

    /// HLL register value.
    pub fn hll_cell(&self) -> u8 {
        self.max_geo()
    }

    /// EHLL `(C1, C2)` pair: the maximum and whether the geo just below it was
    /// seen (1 when there is no such geo).
    pub fn ehll_cell(&self) -> (u8, bool) {
        let k = self.max_geo();
        if k <= 1 {
            (k, true)
        } else {
            (k, self.has(k - 1))
        }
    }
}

/// Full-occupancy record per bucket, fed with the same hashing as the sketches.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowSketch {
    layout: BucketLayout,
    seed: u64,
    buckets: Vec<ShadowBucket>,
}

impl ShadowSketch {
    pub fn new(layout: BucketLayout, seed: u64) -> Self {
        Self {
            layout,
            seed,
            buckets: vec![ShadowBucket::default(); layout.registers() as usize],
        }
    }

    pub fn insert(&mut self, element: &[u8]) {
        self.insert_hash(hash64(element, self.seed));
    }

    pub fn insert_hash(&mut self, h: HashedElement) {
        let s = self.layout.split(h);
        self.buckets[s.bucket as usize].observe(s.geo);
    }

    pub fn buckets(&self) -> &[ShadowBucket] {
        &self.buckets
    }
}

/// HLL registers and EHLL cells implied by the shadow buckets.
pub fn derive_cells(shadow: &[ShadowBucket]) -> (Vec<u8>, Vec<(u8, bool)>) {
    (
        shadow.iter().map(ShadowBucket::hll_cell).collect(),
        shadow.iter().map(ShadowBucket::ehll_cell).collect(),
    )
}

/// Truncated exact expectation and a bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactExpectation {
    pub value: f64,
    /// Upper bound on the contribution of states with a level above `K`;
    /// infinite where the untruncated expectation diverges (one bucket).
    pub truncation_bound: f64,
}

/// Which indicator an expectation or simulation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indicator {
    /// `Z`, from HLL registers.
    Z,
    /// `Y`, from EHLL cells.
    Y,
}

impl Indicator {
    pub fn for_kind(kind: SketchKind) -> Result<Self> {
        match kind {
            SketchKind::Hll | SketchKind::HllTc => Ok(Indicator::Z),
            SketchKind::Ehll | SketchKind::EhllTc => Ok(Indicator::Y),
            SketchKind::Pcsa => Err(Error::Domain("PCSA has no Z/Y indicator".into())),
        }
    }
}

pub const MAX_EXACT_BUCKETS: u32 = 2;
pub const MAX_EXACT_N: u32 = 20;
pub const MIN_EXACT_K: u32 = 40;
pub const MAX_EXACT_K: u32 = 128;

/// `(1 - 2^-a)^n - (1 - 2^-b)^n` for `a > b >= 0`, without cancellation.
fn pow_diff(n: u32, a: f64, b: f64) -> f64 {
    let la = n as f64 * (-a).exp2().neg().ln_1p();
    let lb = if b == 0.0 {
        f64::NEG_INFINITY
    } else {
        n as f64 * (-b).exp2().neg().ln_1p()
    };
    if lb == f64::NEG_INFINITY {
        return la.exp();
    }
    lb.exp() * (la - lb).exp_m1()
}

trait Neg {
    fn neg(self) -> Self;
}

impl Neg for f64 {
    fn neg(self) -> f64 {
        -self
    }
}

/// Distribution of one bucket's cell term given `nj` elements:
/// `(term, probability)` pairs, levels `1..=k_max`.
fn cell_distribution(ind: Indicator, nj: u32, k_max: u32) -> Vec<(f64, f64)> {
    if nj == 0 {
        return vec![(1.0, 1.0)];
    }
    let mut out = Vec::new();
    for k in 1..=k_max {
        let kf = k as f64;
        let p_level = pow_diff(nj, kf, kf - 1.0);
        let base = (-kf).exp2();
        match ind {
            Indicator::Z => out.push((base, p_level)),
            Indicator::Y => {
                if k == 1 {
                    out.push((base, p_level));
                    continue;
                }
                // max = k with geo k-1 absent: all geos in {<= k-2} ∪ {k}, at least one k
                let p_absent = if k == 2 {
                    0.25f64.powi(nj as i32)
                } else {
                    let l3 = nj as f64 * (-3.0 * base).ln_1p();
                    let l4 = nj as f64 * (-4.0 * base).ln_1p();
                    l4.exp() * (l3 - l4).exp_m1()
                };
                out.push((base, p_level - p_absent));
                out.push((3.0 * base, p_absent));
            }
        }
    }
    out
}

fn ln_multinomial_weight(n: u32, parts: &[u32]) -> f64 {
    fn ln_fact(x: u32) -> f64 {
        (1..=x).map(|i| (i as f64).ln()).sum()
    }
    let m = parts.len() as f64;
    ln_fact(n) - parts.iter().map(|&p| ln_fact(p)).sum::<f64>() - n as f64 * m.ln()
}

/// `E[Z]` or `E[Y]` for `n` distinct elements over `m` buckets, summing every
/// cell level in `1..=k`.
pub fn exact_expectation(ind: Indicator, n: u32, m: u32, k: u32) -> Result<ExactExpectation> {
    if m == 0 || m > MAX_EXACT_BUCKETS {
        return Err(Error::Domain(format!(
            "exact expectation needs m in 1..={MAX_EXACT_BUCKETS}, got {m}"
        )));
    }
    if n > MAX_EXACT_N {
        return Err(Error::Domain(format!(
            "exact expectation needs n <= {MAX_EXACT_N}, got {n}"
        )));
    }
    if !(MIN_EXACT_K..=MAX_EXACT_K).contains(&k) {
        return Err(Error::Domain(format!(
            "truncation depth must be in {MIN_EXACT_K}..={MAX_EXACT_K}, got {k}"
        )));
    }
    let value = if m == 1 {
        cell_distribution(ind, n, k)
            .iter()
            .map(|&(t, p)| p / t)
            .sum()
    } else {
        let mut total = 0.0;
        for n1 in 0..=n {
            let n2 = n - n1;
            let w = ln_multinomial_weight(n, &[n1, n2]).exp();
            let d1 = cell_distribution(ind, n1, k);
            let d2 = cell_distribution(ind, n2, k);
            let mut inner = 0.0;
            for &(t1, p1) in &d1 {
                for &(t2, p2) in &d2 {
                    inner += p1 * p2 / (t1 + t2);
                }
            }
            total += w * inner;
        }
        total
    };
    let truncation_bound = if m == 1 {
        if n == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        // a bucket above k has probability <= n 2^-k; the indicator is at most
        // 2^(other level), whose truncated mean is <= n (k + 2)
        let nf = n as f64;
        2.0 * nf * (nf * (k as f64 + 2.0)).max(1.0) * (-(k as f64)).exp2()
    };
    Ok(ExactExpectation {
        value,
        truncation_bound,
    })
}

pub fn exact_expectation_y(n: u32, m: u32, k: u32) -> Result<ExactExpectation> {
    exact_expectation(Indicator::Y, n, m, k)
}

pub fn exact_expectation_z(n: u32, m: u32, k: u32) -> Result<ExactExpectation> {
    exact_expectation(Indicator::Z, n, m, k)
}

/// Monte-Carlo mean and standard error of an indicator, simulating buckets
/// and geos directly from a seeded generator (geo capped at 65).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloMean {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

pub fn monte_carlo_indicator(
    ind: Indicator,
    n: u32,
    m: u32,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloMean> {
    if m == 0 || m > 128 || trials < 2 {
        return Err(Error::Domain(
            "monte carlo needs m in 1..=128 and at least 2 trials".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buckets = vec![ShadowBucket::default(); m as usize];
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for t in 0..trials {
        buckets
            .iter_mut()
            .for_each(|b| *b = ShadowBucket::default());
        for _ in 0..n {
            let j = rng.gen_range(0..m) as usize;
            let geo = (rng.gen::<u64>().trailing_zeros() + 1).min(65) as u8;
            buckets[j].observe(geo);
        }
        let sum: f64 = buckets
            .iter()
            .map(|b| match ind {
                Indicator::Z => (-(b.hll_cell() as f64)).exp2(),
                Indicator::Y => {
                    let (k, x) = b.ehll_cell();
                    let base = (-(k as f64)).exp2();
                    if x {
                        base
                    } else {
                        3.0 * base
                    }
                }
            })
            .sum();
        let y = 1.0 / sum;
        let delta = y - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (y - mean);
    }
    let var = m2 / (trials - 1) as f64;
    Ok(MonteCarloMean {
        mean,
        std_error: (var / trials as f64).sqrt(),
        trials,
    })
}

/// Sketch of `a` followed by `b`: the reference for merge tests.
pub fn union_sketch<A, B>(
    a: A,
    b: B,
    kind: SketchKind,
    layout: BucketLayout,
    seed: u64,
) -> Result<AnySketch>
where
    A: IntoIterator,
    A::Item: AsRef<[u8]>,
    B: IntoIterator,
    B::Item: AsRef<[u8]>,
{
    let mut s = AnySketch::new(kind, layout, seed)?;
    for e in a {
        s.insert(e.as_ref());
    }
    for e in b {
        s.insert(e.as_ref());
    }
    Ok(s)
}

pub const MAX_ENUMERATION_DEPTH: u32 = 24;

fn check_depth(k: u32) -> Result<()> {
    if k == 0 || k > MAX_ENUMERATION_DEPTH {
        return Err(Error::Domain(format!(
            "enumeration depth must be in 1..={MAX_ENUMERATION_DEPTH}, got {k}"
        )));
    }
    Ok(())
}

/// Probability that the next element changes an EHLL cell array, summed over
/// every bucket and geo `1..=k`. Falls short of the exact value by at most `2^-k`.
pub fn enumerate_change_probability_ehll(cells: &[(u8, bool)], k: u32) -> Result<f64> {
    check_depth(k)?;
    let m = cells.len() as f64;
    let mut p = 0.0;
    for &(level, x) in cells {
        for g in 1..=k {
            let g8 = g as u8;
            let changes = g8 > level || (g8 + 1 == level && !x);
            if changes {
                p += (-(g as f64)).exp2() / m;
            }
        }
    }
    Ok(p)
}

/// As [`enumerate_change_probability_ehll`] for HLL registers.
pub fn enumerate_change_probability_hll(levels: &[u8], k: u32) -> Result<f64> {
    check_depth(k)?;
    let m = levels.len() as f64;
    let mut p = 0.0;
    for &level in levels {
        for g in 1..=k {
            if g as u8 > level {
                p += (-(g as f64)).exp2() / m;
            }
        }
    }
    Ok(p)
}
