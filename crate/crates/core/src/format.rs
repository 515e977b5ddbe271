/// Formats `x` with `digits` significant digits, `%g` style: fixed notation
/// for moderate exponents, scientific otherwise, trailing zeros trimmed.
///
/// ```
/// use epiwave::format_significant;
/// assert_eq!(format_significant(0.1234567890123456, 12), "0.123456789012");
/// assert_eq!(format_significant(1.0, 12), "1");
/// assert_eq!(format_significant(1.5e-7, 12), "1.5e-7");
/// ```
pub fn format_significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Round first so the exponent reflects the printed mantissa (9.99..9 -> 10).
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_carries_into_exponent() {
        assert_eq!(format_significant(9.9999999999999, 12), "10");
        assert_eq!(format_significant(-0.5, 12), "-0.5");
        assert_eq!(format_significant(123456789012345.0, 12), "1.23456789012e14");
        assert_eq!(format_significant(0.999999999999, 12), "0.999999999999");
    }
}
