//! Monte-Carlo accuracy campaign.
//!
//! Trial `t` streams the elements `key_t ‖ i` (two little-endian u64) for
//! `i < n`, where `key_t` is drawn from ChaCha stream `t` of the configured
//! seed. Each element is hashed once under the seed and fed to every estimator.
//! Trials run in fixed blocks whose accumulators are merged in block order,
//! so the report does not depend on the number of worker threads.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hashing::{hash64, BucketLayout, HashedElement};
use crate::martingale::MartingaleCounter;
use crate::sketches::{AnySketch, CardinalitySketch, SketchKind};

use super::format_sig;

const BLOCK_TRIALS: u64 = 32;

pub const CSV_HEADER: &str = "sketch,m,memory_bits,n,mean_est,rel_bias,rel_rmse,trials";

/// One estimator in a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec {
    pub label: String,
    pub kind: SketchKind,
    pub registers: u32,
    pub martingale: bool,
}

impl EstimatorSpec {
    pub fn new(kind: SketchKind, registers: u32, martingale: bool) -> Self {
        let label = if martingale {
            format!("mg-{}", kind.name())
        } else {
            kind.name().to_string()
        };
        Self {
            label,
            kind,
            registers,
            martingale,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Register count giving `kind` the register payload of a `2^b`-cell EHLL
/// (or EHLL-TC for the TailCut kinds).
pub fn matched_registers(kind: SketchKind, b: u8) -> Result<u32> {
    let m = BucketLayout::with_precision(b)?.registers();
    match kind {
        SketchKind::Ehll | SketchKind::EhllTc => Ok(m),
        SketchKind::Hll => Ok((7 * m).div_ceil(6)),
        SketchKind::HllTc => Ok(5 * m / 4),
        SketchKind::Pcsa => Err(Error::Domain(
            "PCSA has no matched-memory configuration".into(),
        )),
    }
}

/// Which bias multipliers the estimates use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasConstants {
    /// Per-`m` quadrature values (the sketches' own).
    #[default]
    Quadrature,
    /// Large-`m` limits.
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub estimators: Vec<EstimatorSpec>,
    pub n: u64,
    pub trials: u64,
    pub checkpoints: u64,
    pub seed: u64,
    pub bias: BiasConstants,
}

impl SimulationConfig {
    pub const DEFAULT_TRIALS: u64 = 2000;
    pub const DEFAULT_N: u64 = 100_000;
    pub const DEFAULT_B: u8 = 10;
    pub const DEFAULT_CHECKPOINTS: u64 = 50;
    pub const PAPER_TRIALS: u64 = 25_000;
    pub const PAPER_N: u64 = 1_000_000;

    pub fn new(
        estimators: Vec<EstimatorSpec>,
        n: u64,
        trials: u64,
        checkpoints: u64,
        seed: u64,
    ) -> Self {
        Self {
            estimators,
            n,
            trials,
            checkpoints,
            seed,
            bias: BiasConstants::Quadrature,
        }
    }

    /// Estimators for `kinds` at matched memory against a `2^b` EHLL.
    pub fn matched_memory(
        kinds: &[SketchKind],
        b: u8,
        martingale: bool,
    ) -> Result<Vec<EstimatorSpec>> {
        kinds
            .iter()
            .map(|&k| Ok(EstimatorSpec::new(k, matched_registers(k, b)?, martingale)))
            .collect()
    }

    /// The full-size campaign: 25,000 streams of 10^6 elements, EHLL, HLL
    /// and both TailCut kinds, plain and martingale, at b = 10.
    pub fn paper_scale(seed: u64) -> Result<Self> {
        let kinds = [
            SketchKind::Ehll,
            SketchKind::Hll,
            SketchKind::EhllTc,
            SketchKind::HllTc,
        ];
        let mut estimators = Self::matched_memory(&kinds, Self::DEFAULT_B, false)?;
        estimators.extend(Self::matched_memory(&kinds, Self::DEFAULT_B, true)?);
        Ok(Self::new(
            estimators,
            Self::PAPER_N,
            Self::PAPER_TRIALS,
            Self::DEFAULT_CHECKPOINTS,
            seed,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::Domain("no estimators configured".into()));
        }
        if self.trials < 2 {
            return Err(Error::Domain("at least 2 trials are required".into()));
        }
        if self.checkpoints < 1 || self.n < 1 {
            return Err(Error::Domain("n and checkpoints must be positive".into()));
        }
        for e in &self.estimators {
            BucketLayout::with_registers(e.registers)?;
        }
        Ok(())
    }

    /// Stream lengths at which estimates are recorded.
    pub fn checkpoint_positions(&self) -> Vec<u64> {
        let step = self.n.div_ceil(self.checkpoints).max(1);
        let mut v: Vec<u64> = (1..)
            .map(|i| i * step)
            .take_while(|&p| p < self.n)
            .collect();
        v.push(self.n);
        v
    }
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let total = (self.count + o.count) as f64;
        let d = o.mean - self.mean;
        self.mean += d * o.count as f64 / total;
        self.m2 += o.m2 + d * d * self.count as f64 * o.count as f64 / total;
        self.count += o.count;
    }

    fn sample_var(&self) -> f64 {
        self.m2 / (self.count - 1) as f64
    }

    fn population_var(&self) -> f64 {
        self.m2 / self.count as f64
    }
}

#[derive(Debug, Clone, Default)]
struct Accumulators {
    // [estimator][checkpoint]
    est: Vec<Vec<Moments>>,
    retro: Vec<Vec<Moments>>,
}

impl Accumulators {
    fn new(estimators: usize, checkpoints: usize) -> Self {
        Self {
            est: vec![vec![Moments::default(); checkpoints]; estimators],
            retro: vec![vec![Moments::default(); checkpoints]; estimators],
        }
    }

    fn merge(&mut self, o: &Accumulators) {
        for (a, b) in self.est.iter_mut().flatten().zip(o.est.iter().flatten()) {
            a.merge(b);
        }
        for (a, b) in self
            .retro
            .iter_mut()
            .flatten()
            .zip(o.retro.iter().flatten())
        {
            a.merge(b);
        }
    }
}

enum Runner {
    Plain(AnySketch),
    Martingale(MartingaleCounter<AnySketch>),
}

impl Runner {
    #[inline]
    fn insert_hash(&mut self, h: HashedElement) {
        match self {
            Runner::Plain(s) => {
                s.insert_hash(h);
            }
            Runner::Martingale(c) => {
                c.insert_hash(h);
            }
        }
    }

    fn record(&self, bias: Option<f64>) -> (f64, Option<f64>) {
        match self {
            Runner::Plain(s) => {
                let e = match bias {
                    Some(b) => s.estimate_with_bias(b),
                    None => s.estimate(),
                };
                (e.value, None)
            }
            Runner::Martingale(c) => (c.estimate(), Some(c.retro_variance())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub sketch: String,
    pub kind: SketchKind,
    pub martingale: bool,
    pub m: u32,
    pub memory_bits: u64,
    pub n: u64,
    pub mean_est: f64,
    pub rel_bias: f64,
    pub rel_rmse: f64,
    /// Sample standard deviation of the estimates.
    pub std: f64,
    /// Mean retrospective variance, martingale estimators only.
    pub mean_retro_var: Option<f64>,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub rows: Vec<ReportRow>,
}

impl SimulationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.sketch,
                r.m,
                r.memory_bits,
                r.n,
                format_sig(r.mean_est),
                format_sig(r.rel_bias),
                format_sig(r.rel_rmse),
                r.trials
            )
            .expect("writing to a String");
        }
        out
    }

    /// Row for `label` at stream length `n` (first match by register count order).
    pub fn row(&self, label: &str, n: u64) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.sketch == label && r.n == n)
    }

    /// Final-checkpoint rows.
    pub fn last_rows(&self) -> Vec<&ReportRow> {
        let n = self.rows.iter().map(|r| r.n).max().unwrap_or(0);
        self.rows.iter().filter(|r| r.n == n).collect()
    }
}

/// Per-trial stream key, independent of how trials are scheduled.
pub fn trial_key(seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.next_u64()
}

fn run_block(
    config: &SimulationConfig,
    templates: &[AnySketch],
    checkpoints: &[u64],
    biases: &[Option<f64>],
    trials: std::ops::Range<u64>,
) -> Accumulators {
    let mut acc = Accumulators::new(templates.len(), checkpoints.len());
    let mut element = [0u8; 16];
    for t in trials {
        let mut runners: Vec<Runner> = templates
            .iter()
            .zip(&config.estimators)
            .map(|(s, e)| {
                if e.martingale {
                    Runner::Martingale(MartingaleCounter::new(s.clone()))
                } else {
                    Runner::Plain(s.clone())
                }
            })
            .collect();
        element[..8].copy_from_slice(&trial_key(config.seed, t).to_le_bytes());
        let mut i = 0u64;
        for (c, &pos) in checkpoints.iter().enumerate() {
            while i < pos {
                element[8..].copy_from_slice(&i.to_le_bytes());
                let h = hash64(&element, config.seed);
                for r in runners.iter_mut() {
                    r.insert_hash(h);
                }
                i += 1;
            }
            for (k, r) in runners.iter().enumerate() {
                let (est, retro) = r.record(biases[k]);
                acc.est[k][c].push(est);
                if let Some(v) = retro {
                    acc.retro[k][c].push(v);
                }
            }
        }
    }
    acc
}

pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let templates: Vec<AnySketch> = config
        .estimators
        .iter()
        .map(|e| {
            AnySketch::new(
                e.kind,
                BucketLayout::with_registers(e.registers)?,
                config.seed,
            )
        })
        .collect::<Result<_>>()?;
    let biases: Vec<Option<f64>> = config
        .estimators
        .iter()
        .map(|e| match config.bias {
            BiasConstants::Quadrature => None,
            BiasConstants::Asymptotic => e.kind.asymptotic_bias(),
        })
        .collect();
    let checkpoints = config.checkpoint_positions();
    let blocks = config.trials.div_ceil(BLOCK_TRIALS);
    let partial: Vec<Accumulators> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK_TRIALS;
            let hi = (lo + BLOCK_TRIALS).min(config.trials);
            run_block(config, &templates, &checkpoints, &biases, lo..hi)
        })
        .collect();
    let mut acc = Accumulators::new(templates.len(), checkpoints.len());
    for p in &partial {
        acc.merge(p);
    }

    let mut rows = Vec::new();
    for (k, spec) in config.estimators.iter().enumerate() {
        for (c, &n) in checkpoints.iter().enumerate() {
            let mo = acc.est[k][c];
            let nf = n as f64;
            let bias = mo.mean - nf;
            let mse = mo.population_var() + bias * bias;
            rows.push(ReportRow {
                sketch: spec.label.clone(),
                kind: spec.kind,
                martingale: spec.martingale,
                m: spec.registers,
                memory_bits: templates[k].memory_bits(),
                n,
                mean_est: mo.mean,
                rel_bias: bias / nf,
                rel_rmse: mse.sqrt() / nf,
                std: mo.sample_var().sqrt(),
                mean_retro_var: spec.martingale.then(|| acc.retro[k][c].mean),
                trials: mo.count,
            });
        }
    }
    rows.sort_by(|a, b| (a.sketch.as_str(), a.m, a.n).cmp(&(b.sketch.as_str(), b.m, b.n)));
    Ok(SimulationReport { rows })
}
