//! Minimal JSON writer. Floats are printed with 17 significant digits so a
//! summary always reconstructs the exact f64 values of the run.

use std::fmt::{self, Write as _};

#[derive(Debug, Clone)]
pub enum JVal {
    Bool(bool),
    Int(i64),
    UInt(u64),
    Num(f64),
    Str(String),
    Arr(Vec<JVal>),
    Obj(Vec<(String, JVal)>),
}

impl JVal {
    pub fn obj() -> Self {
        JVal::Obj(Vec::new())
    }

    pub fn push(&mut self, key: &str, value: impl Into<JVal>) -> &mut Self {
        match self {
            JVal::Obj(fields) => fields.push((key.to_string(), value.into())),
            _ => panic!("push on non-object JSON value"),
        }
        self
    }
}

impl From<bool> for JVal {
    fn from(v: bool) -> Self {
        JVal::Bool(v)
    }
}

impl From<i64> for JVal {
    fn from(v: i64) -> Self {
        JVal::Int(v)
    }
}

impl From<u64> for JVal {
    fn from(v: u64) -> Self {
        JVal::UInt(v)
    }
}

impl From<usize> for JVal {
    fn from(v: usize) -> Self {
        JVal::UInt(v as u64)
    }
}

impl From<u32> for JVal {
    fn from(v: u32) -> Self {
        JVal::UInt(v as u64)
    }
}

impl From<f64> for JVal {
    fn from(v: f64) -> Self {
        JVal::Num(v)
    }
}

impl From<&str> for JVal {
    fn from(v: &str) -> Self {
        JVal::Str(v.to_string())
    }
}

impl From<String> for JVal {
    fn from(v: String) -> Self {
        JVal::Str(v)
    }
}

impl From<Vec<f64>> for JVal {
    fn from(v: Vec<f64>) -> Self {
        JVal::Arr(v.into_iter().map(JVal::Num).collect())
    }
}

impl From<Vec<JVal>> for JVal {
    fn from(v: Vec<JVal>) -> Self {
        JVal::Arr(v)
    }
}

fn escape(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// 17 significant digits; non-finite values become null.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn write_val(out: &mut String, v: &JVal) {
    match v {
        JVal::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        JVal::Int(i) => {
            let _ = write!(out, "{i}");
        }
        JVal::UInt(u) => {
            let _ = write!(out, "{u}");
        }
        JVal::Num(f) => out.push_str(&fmt_f64(*f)),
        JVal::Str(s) => escape(out, s),
        JVal::Arr(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_val(out, item);
            }
            out.push(']');
        }
        JVal::Obj(fields) => {
            out.push('{');
            for (i, (k, val)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                escape(out, k);
                out.push(':');
                write_val(out, val);
            }
            out.push('}');
        }
    }
}

impl fmt::Display for JVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_val(&mut out, self);
        f.write_str(&out)
    }
}

/// Format with `sig` significant digits, like the C `%g` conversion; used in
/// CSV tables meant for humans and plotting.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let formatted = format!("{:.*e}", sig.saturating_sub(1), v);
    // split into mantissa and exponent
    let (mantissa, exp) = formatted.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -4 || exp >= sig as i32 {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    } else {
        // positional form
        let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
        let neg = v < 0.0;
        let point = exp + 1; // digits before the decimal point
        let mut s = String::new();
        if neg {
            s.push('-');
        }
        if point <= 0 {
            s.push_str("0.");
            for _ in 0..(-point) {
                s.push('0');
            }
            s.push_str(&digits);
        } else if (point as usize) >= digits.len() {
            s.push_str(&digits);
            for _ in 0..(point as usize - digits.len()) {
                s.push('0');
            }
        } else {
            s.push_str(&digits[..point as usize]);
            s.push('.');
            s.push_str(&digits[point as usize..]);
        }
        if s.contains('.') {
            let trimmed = s.trim_end_matches('0').trim_end_matches('.');
            trimmed.to_string()
        } else {
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_objects() {
        let mut o = JVal::obj();
        o.push("name", "a\"b").push("n", 3u64).push("x", 0.5);
        assert_eq!(
            o.to_string(),
            "{\"name\":\"a\\\"b\",\"n\":3,\"x\":5.0000000000000000e-1}"
        );
    }

    #[test]
    fn float_round_trips_through_17_digits() {
        for v in [std::f64::consts::PI, 1.0 / 3.0, 6.02e23, -1.25e-7] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn sig_digit_formatting() {
        assert_eq!(fmt_sig(3.257_798_193_165_244, 6), "3.2578");
        assert_eq!(fmt_sig(0.05, 6), "0.05");
        assert_eq!(fmt_sig(-1.5, 6), "-1.5");
        assert_eq!(fmt_sig(123456789.0, 6), "1.23457e8");
        assert_eq!(fmt_sig(0.00001234567, 6), "1.23457e-5");
        assert_eq!(fmt_sig(20.0, 6), "20");
        assert_eq!(fmt_sig(0.0, 6), "0");
    }
}
