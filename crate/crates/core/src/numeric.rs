/// Relative comparison with an absolute floor at unit scale:
/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    if !(a.is_finite() && b.is_finite()) {
        return false;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Tolerance for `evaluate(equation, slots) == answer` on stored records.
pub const RECORD_TOLERANCE: f64 = 1e-6;

/// Formats with nine significant digits in scientific notation.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_eq_scales() {
        assert!(approx_eq(1e9, 1e9 + 1.0, 1e-6));
        assert!(!approx_eq(1.0, 1.001, 1e-6));
        assert!(approx_eq(0.0, 1e-7, 1e-6));
        assert!(!approx_eq(f64::NAN, f64::NAN, 1.0));
    }

    #[test]
    fn sig9_round_trip() {
        for v in [1.0, 5.0 / 6.0, 0.75, -0.123456789123, 1e-20] {
            let back: f64 = format_sig9(v).parse().unwrap();
            assert!((back - v).abs() <= 5e-9 * v.abs());
        }
        assert_eq!(format_sig9(1.0).parse::<f64>().unwrap(), 1.0);
    }
}
