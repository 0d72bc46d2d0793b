//! Bias and variance constants of the HLL and EHLL indicators.
//!
//! Both estimators are corrected by `1 / (m * I0(m))` where
//! `I0(m) = ∫₀^∞ f(u)^m du` for the estimator's limiting per-cell function `f`.
//! The relative variance of the corrected estimator is `beta_m / m` with
//! `beta_m = m * (I1(m) / I0(m)^2 - 1)` and `I1(m) = ∫₀^∞ u f(u)^m du`.
//! The integrals are evaluated numerically; the closed-form large-`m`
//! expansions are kept for cross-checks.

pub mod quadrature;

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use quadrature::{integrate, QuadratureResult, Tolerance};

/// Limiting per-cell function of the EHLL indicator.
pub fn f_ehll(u: f64) -> f64 {
    ((1.0 / (1.0 + u)).ln_1p() + (1.0 / (3.0 + 3.0 * u)).ln_1p() - (1.0 / (3.0 + u)).ln_1p()) / LN_2
}

/// Limiting per-cell function of the HLL indicator, `log2((2+u)/(1+u))`.
pub fn f_hll(u: f64) -> f64 {
    (1.0 / (1.0 + u)).ln_1p() / LN_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIntegrals {
    pub i0: f64,
    pub i1: f64,
    pub i0_error: f64,
    pub i1_error: f64,
}

/// `I0 = ∫ g(u)^m du` and `I1 = ∫ u g(u)^m du` over `[0, ∞)`.
pub fn integrate_power<G: Fn(f64) -> f64>(g: G, m: u32) -> Result<PowerIntegrals> {
    integrate_power_with(g, m, Tolerance::default())
}

/// As [`integrate_power`] with explicit tolerances.
///
/// The integrand is rescaled by `u = v / m` so its width no longer depends on
/// `m`, then mapped to the unit interval with `v = t / (1 - t)`. The Kronrod
/// rule never evaluates the endpoints.
pub fn integrate_power_with<G: Fn(f64) -> f64>(
    g: G,
    m: u32,
    tol: Tolerance,
) -> Result<PowerIntegrals> {
    if m < 2 {
        return Err(Error::Domain(format!(
            "the integral of g^m diverges for m = {m}; need m >= 2"
        )));
    }
    let mf = m as f64;
    let kernel = |t: f64, moment: i32| {
        let one_minus = 1.0 - t;
        let v = t / one_minus;
        let gv = g(v / mf);
        if gv <= 0.0 {
            return 0.0;
        }
        let power = (mf * gv.ln()).exp();
        v.powi(moment) * power / (one_minus * one_minus)
    };
    let scaled_tol = |scale: f64| Tolerance {
        abs: tol.abs / scale,
        ..tol
    };
    let r0: QuadratureResult = integrate(|t| kernel(t, 0), 0.0, 1.0, 8, scaled_tol(1.0 / mf))?;
    let r1 = integrate(|t| kernel(t, 1), 0.0, 1.0, 8, scaled_tol(1.0 / (mf * mf)))?;
    Ok(PowerIntegrals {
        i0: r0.value / mf,
        i1: r1.value / (mf * mf),
        i0_error: r0.abs_error / mf,
        i1_error: r1.abs_error / (mf * mf),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantSource {
    Quadrature,
    Asymptotic,
}

/// Per-`m` constants for both estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasConstants {
    pub m: u32,
    /// EHLL bias correction.
    pub gamma_m: f64,
    /// EHLL relative-variance constant.
    pub beta_m: f64,
    /// HLL bias correction.
    pub alpha_m: f64,
    /// HLL relative-variance constant.
    pub hll_beta_m: f64,
    pub source: ConstantSource,
}

pub const MIN_CONSTANT_REGISTERS: u32 = 16;

fn cache() -> &'static Mutex<HashMap<u32, BiasConstants>> {
    static CACHE: OnceLock<Mutex<HashMap<u32, BiasConstants>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Quadrature constants for `m` registers, computed once and cached.
pub fn bias_constants(m: u32) -> Result<BiasConstants> {
    if m < MIN_CONSTANT_REGISTERS {
        return Err(Error::Domain(format!("constants need m >= 16, got {m}")));
    }
    if let Some(c) = cache().lock().unwrap().get(&m) {
        return Ok(*c);
    }
    let ehll = integrate_power(f_ehll, m)?;
    let hll = integrate_power(f_hll, m)?;
    let mf = m as f64;
    let c = BiasConstants {
        m,
        gamma_m: 1.0 / (mf * ehll.i0),
        beta_m: mf * (ehll.i1 / (ehll.i0 * ehll.i0) - 1.0),
        alpha_m: 1.0 / (mf * hll.i0),
        hll_beta_m: mf * (hll.i1 / (hll.i0 * hll.i0) - 1.0),
        source: ConstantSource::Quadrature,
    };
    cache().lock().unwrap().insert(m, c);
    Ok(c)
}

pub fn gamma_m(m: u32) -> Result<f64> {
    Ok(bias_constants(m)?.gamma_m)
}

pub fn beta_m(m: u32) -> Result<f64> {
    Ok(bias_constants(m)?.beta_m)
}

pub fn alpha_m(m: u32) -> Result<f64> {
    Ok(bias_constants(m)?.alpha_m)
}

/// Large-`m` limits `(gamma, beta) = (2 / (3 ln 2), 41 ln 2 / 16 - 1)`.
pub fn asymptotic_constants() -> (f64, f64) {
    (2.0 / (3.0 * LN_2), 41.0 * LN_2 / 16.0 - 1.0)
}

/// Large-`m` HLL limits `(alpha, beta) = (1 / (2 ln 2), 3 ln 2 - 1)`.
pub fn hll_asymptotic_constants() -> (f64, f64) {
    (1.0 / (2.0 * LN_2), 3.0 * LN_2 - 1.0)
}

/// The limits in the same shape as [`bias_constants`].
pub fn asymptotic_bias_constants(m: u32) -> BiasConstants {
    let (gamma, beta) = asymptotic_constants();
    let (alpha, hll_beta) = hll_asymptotic_constants();
    BiasConstants {
        m,
        gamma_m: gamma,
        beta_m: beta,
        alpha_m: alpha,
        hll_beta_m: hll_beta,
        source: ConstantSource::Asymptotic,
    }
}

/// Two-term expansions of the EHLL `(I0(m), I1(m))`.
pub fn asymptotic_integrals(m: u32) -> (f64, f64) {
    let mf = m as f64;
    let (_, beta) = asymptotic_constants();
    let lead = 8f64.ln() / (2.0 * mf);
    (
        lead * (1.0 + beta / mf),
        lead * lead * (1.0 + 3.0 * beta / mf),
    )
}

/// `m * ln(m / zeros)`, the small-range estimate from the number of empty registers.
pub fn linear_counting(m: u32, zeros: u32) -> Result<f64> {
    if zeros == 0 || zeros > m {
        return Err(Error::Domain(format!(
            "linear counting needs 1 <= zeros <= m, got zeros = {zeros}, m = {m}"
        )));
    }
    Ok(m as f64 * (m as f64 / zeros as f64).ln())
}

/// Standard-error constant of PCSA (`0.78 / sqrt(m)`).
pub const PCSA_STD_ERROR: f64 = 0.78;

/// Register count at which the MVP table evaluates the quadrature constants.
pub const MVP_REGISTERS: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct MvpRow {
    pub sketch: &'static str,
    pub bits_per_cell: f64,
    pub variance_constant: f64,
    pub mvp: f64,
}

/// Memory-variance products for cardinalities up to `2^u_bits`.
pub fn mvp_report(u_bits: u32) -> Result<Vec<MvpRow>> {
    if !(32..=64).contains(&u_bits) {
        return Err(Error::Domain(format!(
            "universe bits must be in 32..=64, got {u_bits}"
        )));
    }
    let c = bias_constants(MVP_REGISTERS)?;
    let log_bits = (u_bits as f64).log2();
    let row = |sketch, bits_per_cell: f64, variance_constant: f64| MvpRow {
        sketch,
        bits_per_cell,
        variance_constant,
        mvp: bits_per_cell * variance_constant,
    };
    Ok(vec![
        row("pcsa", u_bits as f64, PCSA_STD_ERROR * PCSA_STD_ERROR),
        row("hll", log_bits, c.hll_beta_m),
        row("ehll", log_bits + 1.0, c.beta_m),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_values() {
        assert!((f_ehll(0.0) - 1.0).abs() < 1e-15);
        assert!((f_ehll(1.0) - 1.4f64.log2()).abs() < 1e-15);
        assert!((f_ehll(1.0) - 0.485_427).abs() < 1e-6);
        assert!((f_hll(0.0) - 1.0).abs() < 1e-15);
        assert!((f_hll(2.0) - 0.415_037).abs() < 1e-6);
    }

    #[test]
    fn f_bounds() {
        for i in 0..10_000 {
            let u = 1.0 + 99.0 * i as f64 / 9_999.0;
            assert!(f_ehll(u) < 1.0 / (1.0 + u), "u = {u}");
        }
        for i in 1..=1000 {
            let u = i as f64 / 1000.0;
            assert!(1.0 - u / 2.0 > f_ehll(u), "u = {u}");
        }
        let mut prev = f_ehll(0.0);
        for i in 1..=10_000 {
            let u = i as f64 / 100.0;
            let (e, h) = (f_ehll(u), f_hll(u));
            assert!(e < h, "u = {u}");
            assert!(e > 0.0 && e < prev);
            prev = e;
        }
    }

    #[test]
    fn integrals_need_m_at_least_two() {
        assert!(matches!(integrate_power(f_hll, 1), Err(Error::Domain(_))));
        assert!(matches!(integrate_power(f_ehll, 0), Err(Error::Domain(_))));
        // I0 converges at m = 2 but I1 has a logarithmic tail
        assert!(matches!(
            integrate_power(f_ehll, 2),
            Err(Error::Quadrature(_))
        ));
        assert!(integrate_power(f_ehll, 3).is_ok());
    }

    #[test]
    fn integrals_match_expansions_at_1024() {
        let r = integrate_power(f_ehll, 1024).unwrap();
        let (a0, a1) = asymptotic_integrals(1024);
        assert!(((r.i0 - a0) / a0).abs() < 1e-4);
        assert!(((r.i1 - a1) / a1).abs() < 1e-4);
    }

    #[test]
    fn tightening_tolerance_stays_within_error_estimate() {
        for m in [16, 1024, 65536] {
            let loose = integrate_power(f_ehll, m).unwrap();
            let tight = integrate_power_with(
                f_ehll,
                m,
                Tolerance {
                    abs: 0.5e-12,
                    rel: 0.5e-10,
                    max_intervals: 8000,
                },
            )
            .unwrap();
            assert!((loose.i0 - tight.i0).abs() <= loose.i0_error.max(f64::EPSILON * loose.i0));
            assert!((loose.i1 - tight.i1).abs() <= loose.i1_error.max(f64::EPSILON * loose.i1));
        }
    }

    #[test]
    fn constants_approach_limits() {
        let (gamma, beta) = asymptotic_constants();
        assert!((gamma - 0.96179).abs() < 1e-5);
        assert!((beta - 0.776_19).abs() < 1e-5);
        assert!((beta - 0.776).abs() < 5e-4);
        assert!((gamma * 3.0 * LN_2 / 2.0 - 1.0).abs() < 1e-15);

        let big = bias_constants(1 << 16).unwrap();
        assert!((big.gamma_m - gamma).abs() < 1e-3);
        assert!((big.beta_m - beta).abs() < 1e-2);
        assert!((big.alpha_m - 0.72134).abs() < 1e-3);
        // the familiar small-m HLL value
        assert!((alpha_m(16).unwrap() - 0.673).abs() < 1e-3);
        assert!(gamma_m(8).is_err());
    }

    #[test]
    fn gamma_converges_at_rate_one_over_m() {
        let (gamma, _) = asymptotic_constants();
        let mut prev_gap = None;
        let mut prev_value = 0.0;
        for b in 4..=16 {
            let g = gamma_m(1 << b).unwrap();
            // approaches from below
            assert!(g < gamma && g > prev_value);
            prev_value = g;
            let gap = gamma - g;
            if let Some(p) = prev_gap {
                let ratio: f64 = gap / p;
                assert!((ratio - 0.5).abs() < 0.1, "b = {b}: ratio {ratio}");
            }
            prev_gap = Some(gap);
        }
    }

    #[test]
    fn linear_counting_values() {
        assert_eq!(linear_counting(1024, 1024).unwrap(), 0.0);
        assert!((linear_counting(1024, 512).unwrap() - 709.782_712_893_384).abs() < 1e-9);
        assert!(linear_counting(1024, 0).is_err());
        assert!(linear_counting(16, 17).is_err());
    }

    #[test]
    fn mvp_table() {
        let rows = mvp_report(64).unwrap();
        let get = |name| rows.iter().find(|r| r.sketch == name).unwrap().mvp;
        assert!((get("pcsa") / 38.9 - 1.0).abs() < 0.01);
        assert!((get("hll") / 6.48 - 1.0).abs() < 0.01);
        assert!((get("ehll") / 5.46 - 1.0).abs() < 0.01);
        assert!(mvp_report(31).is_err());
        assert!(mvp_report(65).is_err());
    }
}
