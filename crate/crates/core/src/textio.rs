//! Byte-stable number formatting for report files.

/// Formats a value to six significant digits in plain decimal notation.
/// Deterministic across runs and platforms, so report diffs stay clean.
pub fn fmt_sig(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0.00000".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    // Extreme magnitudes switch to scientific notation so tiny p-values
    // stay readable.
    if !(-4..15).contains(&magnitude) {
        return format!("{:.5e}", v);
    }
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    format!("{:.*}", decimals, v)
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(0.5), "0.500000");
        assert_eq!(fmt_sig(1.0), "1.00000");
        assert_eq!(fmt_sig(-0.0123456789), "-0.0123457");
        assert_eq!(fmt_sig(123456.7), "123457");
        assert_eq!(fmt_sig(0.0), "0.00000");
        assert_eq!(fmt_sig(0.000163545), "0.000163545");
        assert_eq!(fmt_sig(1.63545e-5), "1.63545e-5");
        assert_eq!(fmt_sig(1e-8), "1.00000e-8");
    }
}
