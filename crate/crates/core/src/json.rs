//! JSON and CSV number formatting with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// Format a finite float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// CSV cell for an optional float; empty when absent, `nan`/`inf` spelled out.
pub fn csv_f64(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_finite() => fmt_f64(v),
        Some(v) if v.is_nan() => "nan".to_string(),
        Some(v) if v > 0.0 => "inf".to_string(),
        Some(_) => "-inf".to_string(),
    }
}

#[derive(Clone, Copy, Default)]
struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with every float written as `{:.16e}`.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SeventeenDigits);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits_and_round_trip() {
        let x = 0.1_f64 + 0.2;
        let s = fmt_f64(x);
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        let js = to_string(&vec![x, f64::NAN]).unwrap();
        assert_eq!(js, format!("[{},null]", s));
        let back: Vec<Option<f64>> = serde_json::from_str(&js).unwrap();
        assert_eq!(back[0], Some(x));
    }
}
