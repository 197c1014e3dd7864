//! Float formatting for CSV output.

/// Prints `v` with 9 significant digits in plain decimal when that
/// round-trips, otherwise with 17 so the value re-parses bit-for-bit.
pub fn format_sig9(v: f64) -> String {
    let short = format_sig(v, 9);
    if short
        .parse::<f64>()
        .map(|p| p.to_bits() == v.to_bits())
        .unwrap_or(false)
    {
        short
    } else {
        format_sig(v, 17)
    }
}

/// `v` with `digits` significant digits, trailing zeros trimmed.
pub fn format_sig(v: f64, digits: usize) -> String {
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
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-7..=20).contains(&exp) {
        let m = trim_fraction(mantissa);
        return format!("{m}e{exp}");
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits_only: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits_only)
    } else if point as usize >= digits_only.len() {
        format!("{}{}", digits_only, "0".repeat(point as usize - digits_only.len()))
    } else {
        let (int, frac) = digits_only.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{}", trim_fraction(&body))
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
