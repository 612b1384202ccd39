//! Number formatting for report files.
//!
//! Every float written to an output file goes through [`sig6`], which renders
//! six significant digits in the style of C's `%.6g`, so identical inputs give
//! byte-identical files.

/// Six significant digits, trailing zeros trimmed; `NA` for NaN, `inf`/`-inf`
/// for infinities.
pub fn sig6(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x.is_nan() {
        return "NA".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // Round first in scientific form so the exponent reflects the rounded value.
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
