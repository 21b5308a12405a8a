//! Numeric grammar shared by the topology format and the CLI flags.
//!
//! A value is a decimal number (exponent notation allowed), optionally
//! followed by one SI prefix (`p n u µ m k M G`) and then an optional unit
//! symbol (`s V F H Hz ohm Ω A S`). The unit symbol is ignored; it only
//! exists so that `3ns`, `1mV` or `16pF` read naturally.
//!
//! `m` is always *milli*. Distances are written as plain numbers in metres.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseNumberError {
    pub input: String,
    pub reason: &'static str,
}

impl fmt::Display for ParseNumberError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid number '{}': {}", self.input, self.reason)
    }
}

impl std::error::Error for ParseNumberError {}

const UNITS: &[&str] = &["ohm", "Ohm", "Ω", "Hz", "s", "V", "F", "H", "A", "S"];

fn prefix_scale(c: char) -> Option<f64> {
    Some(match c {
        'p' => 1e-12,
        'n' => 1e-9,
        'u' | 'µ' => 1e-6,
        'm' => 1e-3,
        'k' => 1e3,
        'M' => 1e6,
        'G' => 1e9,
        _ => return None,
    })
}

/// Parses a number with an optional SI prefix and unit symbol.
pub fn parse_si(input: &str) -> Result<f64, ParseNumberError> {
    let err = |reason| ParseNumberError {
        input: input.to_string(),
        reason,
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err("empty value"));
    }

    let mut rest = s;
    for unit in UNITS {
        if let Some(stripped) = rest.strip_suffix(unit) {
            // "1S" or "3s" are fine, but a bare unit with no number is not.
            if !stripped.is_empty() {
                rest = stripped;
                break;
            }
        }
    }

    let mut scale = 1.0;
    if let Some(last) = rest.chars().last() {
        if let Some(p) = prefix_scale(last) {
            let head = &rest[..rest.len() - last.len_utf8()];
            // "2e" followed by a prefix would be a broken exponent, not a prefix.
            if !head.is_empty() && !head.ends_with(['e', 'E', '+', '-']) {
                scale = p;
                rest = head;
            }
        }
    }

    let value: f64 = rest.parse().map_err(|_| err("not a number"))?;
    let scaled = value * scale;
    if !scaled.is_finite() {
        return Err(err("not finite"));
    }
    Ok(scaled)
}

/// Formats a value so that [`parse_si`] reads back exactly the same `f64`.
pub fn format_si(value: f64) -> String {
    format!("{value:e}")
}

/// Shortest exact decimal for `value`: plain notation between 1e-4 and
/// 1e15 in magnitude, scientific otherwise. NaN prints as `NaN`.
pub fn format_float(value: f64) -> String {
    let a = value.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{value}")
    } else {
        format!("{value:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_exponent() {
        assert_eq!(parse_si("10").unwrap(), 10.0);
        assert_eq!(parse_si("2e8").unwrap(), 2e8);
        assert_eq!(parse_si("-1.5E-3").unwrap(), -1.5e-3);
    }

    #[test]
    fn prefixes_and_units() {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-15 * b.abs().max(1e-30);
        assert!(close(parse_si("3ns").unwrap(), 3e-9));
        assert!(close(parse_si("1mV").unwrap(), 1e-3));
        assert!(close(parse_si("16pF").unwrap(), 16e-12));
        assert!(close(parse_si("70k").unwrap(), 70e3));
        assert!(close(parse_si("70kohm").unwrap(), 70e3));
        assert!(close(parse_si("1M").unwrap(), 1e6));
        assert!(close(parse_si("4.7u").unwrap(), 4.7e-6));
        assert!(close(parse_si("500kHz").unwrap(), 500e3));
        assert!(close(parse_si("120Ω").unwrap(), 120.0));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_si("").is_err());
        assert!(parse_si("abc").is_err());
        assert!(parse_si("ns").is_err());
        assert!(parse_si("1x").is_err());
        assert!(parse_si("2e").is_err());
    }

    #[test]
    fn float_notation() {
        assert_eq!(format_float(0.5), "0.5");
        assert_eq!(format_float(4.95e-11), "4.95e-11");
        assert_eq!(format_float(-2e20), "-2e20");
        assert_eq!(format_float(f64::NAN), "NaN");
        for v in [1e-4, 9.99e-5, 123.456, 1e15, 7.1e-300] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn format_round_trips() {
        for v in [0.0, 1.0, 41.666666666666664e-12, 2e8, 9.86, -3.25e-9] {
            assert_eq!(parse_si(&format_si(v)).unwrap(), v);
        }
    }
}
