//! Sketch files, simulation campaigns and chart output used by the CLI.

pub mod format;
pub mod simulate;
pub mod svg;

pub use format::{deserialize, serialize};
pub use simulate::{run_simulation, EstimatorSpec, SimulationConfig, SimulationReport};

/// Decimal rendering with 6 significant digits.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new digit (9.999995 -> 10.00000)
        if s.trim_start_matches('-')
            .replace('.', "")
            .trim_start_matches('0')
            .len()
            > 6
            && decimals > 0
        {
            return format!("{x:.prec$}", prec = decimals - 1);
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

#[cfg(test)]
mod tests {
    use super::format_sig;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig(1.000_488_4), "1.00049");
        assert_eq!(format_sig(100_000.0), "100000");
        assert_eq!(format_sig(0.027_512_34), "0.0275123");
        assert_eq!(format_sig(-0.001_234_567), "-0.00123457");
        assert_eq!(format_sig(9.999_999), "10.0000");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.5e20), "1.50000e20");
    }
}
