//! Exact rational helpers shared by ranks, allocations and parsing.

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};

/// Parses a plain decimal (`"12"`, `"-0.75"`, `"33.5"`) or a fraction (`"3/2"`)
/// into an exact rational. Exponent notation is accepted for integers
/// serialized by JSON encoders (`"1e2"`).
pub fn parse_rational(raw: &str) -> Option<Rational64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().ok()?;
        let den: i64 = den.trim().parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(Rational64::new(num, den));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(idx) => (&s[..idx], s[idx + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    // i64 holds 18 significant digits comfortably
    if int_part.len() + frac_part.len() > 18 {
        return None;
    }
    let joined = format!("{int_part}{frac_part}");
    let mut numer: i64 = if joined.is_empty() {
        0
    } else {
        joined.parse().ok()?
    };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    if scale.unsigned_abs() > 18 {
        return None;
    }
    let pow = 10i64.checked_pow(scale.unsigned_abs())?;
    if scale >= 0 {
        Some(Rational64::from_integer(numer.checked_mul(pow)?))
    } else {
        Some(Rational64::new(numer, pow))
    }
}

/// Renders a rational as a terminating decimal when possible (`3/2` → `"1.5"`),
/// otherwise as `p/q`.
pub fn format_rational(value: &Rational64) -> String {
    if value.is_integer() {
        return value.to_integer().to_string();
    }
    let mut den = *value.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let places = twos.max(fives);
    let scaled = value * Rational64::from_integer(10i64.pow(places));
    let digits = scaled.to_integer().abs().to_string();
    let places = places as usize;
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int_part, frac_part) = padded.split_at(padded.len() - places);
    let sign = if value.is_negative() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_part}")
}

pub fn to_f64(value: &Rational64) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn mean(values: &[Rational64]) -> Rational64 {
    if values.is_empty() {
        return Rational64::zero();
    }
    values.iter().sum::<Rational64>() / Rational64::from_integer(values.len() as i64)
}

/// Serde adapter: rationals travel as JSON numbers (`1.5`, `40`) when they
/// have a terminating decimal form and as `"p/q"` strings otherwise. Numbers
/// and decimal strings are both accepted on input.
pub mod serde_rational {
    use num_rational::Rational64;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{format_rational, parse_rational};

    pub fn serialize<S: Serializer>(value: &Rational64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_integer() {
            return serializer.serialize_i64(value.to_integer());
        }
        let text = format_rational(value);
        match text.parse::<f64>() {
            Ok(v) if !text.contains('/') => serializer.serialize_f64(v),
            _ => serializer.serialize_str(&text),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational64, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        from_json(&value)
            .ok_or_else(|| serde::de::Error::custom(format!("expected a number, got {value}")))
    }

    pub fn from_json(value: &serde_json::Value) -> Option<Rational64> {
        match value {
            serde_json::Value::Number(n) => parse_rational(&n.to_string()),
            serde_json::Value::String(s) => parse_rational(s),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!(parse_rational("12"), Some(Rational64::from_integer(12)));
        assert_eq!(parse_rational(" 33.5 "), Some(Rational64::new(67, 2)));
        assert_eq!(parse_rational("-0.25"), Some(Rational64::new(-1, 4)));
        assert_eq!(parse_rational("3/2"), Some(Rational64::new(3, 2)));
        assert_eq!(parse_rational("1e2"), Some(Rational64::from_integer(100)));
        assert_eq!(parse_rational(".5"), Some(Rational64::new(1, 2)));
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational(""), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn formats_terminating_and_repeating() {
        assert_eq!(format_rational(&Rational64::new(3, 2)), "1.5");
        assert_eq!(format_rational(&Rational64::from_integer(2)), "2");
        assert_eq!(format_rational(&Rational64::new(1, 20)), "0.05");
        assert_eq!(format_rational(&Rational64::new(-7, 4)), "-1.75");
        assert_eq!(format_rational(&Rational64::new(1, 3)), "1/3");
    }
}
