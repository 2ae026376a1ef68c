//! Number formatting shared by every CSV writer.

/// Scientific notation with 17 significant digits and a signed two-digit
/// exponent, e.g. `-1.2500000000000000e-03`. Non-finite values are written as
/// `inf`, `-inf` or `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.16e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}
