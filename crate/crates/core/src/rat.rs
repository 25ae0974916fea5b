//! Exact rational numbers and their text encodings.
//!
//! Every quantity in the engine (capacities, delays, times, labels, queue
//! volumes) is a [`Rat`]. The text form is `"p/q"` or `"n"`; the decimal form
//! is a 20-significant-digit truncation used only for plotting columns.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};
use std::fmt;

pub type Rat = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational {0:?}")]
pub struct ParseRatError(pub String);

pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn frac(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn pow(base: &Rat, exp: u32) -> Rat {
    let mut acc = Rat::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Parses `"p/q"`, `"n"`, or a plain decimal such as `"0.25"` (decimals are
/// converted exactly).
pub fn parse_rat(text: &str) -> Result<Rat, ParseRatError> {
    let err = || ParseRatError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| err())?;
        let q: BigInt = q.trim().parse().map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(Rat::new(p, q));
    }
    if let Some((whole, fracpart)) = s.split_once('.') {
        let neg = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), fracpart);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let num: BigInt = digits.parse().map_err(|_| err())?;
        let den = num_traits::pow(BigInt::from(10), fracpart.len());
        let r = Rat::new(num, den);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| err())?;
    Ok(Rat::from_integer(n))
}

/// Canonical exact string: `"n"` for integers, `"p/q"` otherwise.
pub fn to_exact(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal approximation with `digits` significant digits, truncated toward
/// zero so that every printed digit is a correct digit of the exact value.
pub fn to_decimal(r: &Rat, digits: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let a = r.abs();
    let ten = BigInt::from(10);
    // exponent e with 10^e <= a < 10^(e+1)
    let mut e: i64 = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    let pow10 = |k: i64| -> Rat {
        if k >= 0 {
            Rat::from_integer(num_traits::pow(ten.clone(), k as usize))
        } else {
            Rat::new(BigInt::one(), num_traits::pow(ten.clone(), (-k) as usize))
        }
    };
    while pow10(e) > a {
        e -= 1;
    }
    while pow10(e + 1) <= a {
        e += 1;
    }
    let scaled = &a / pow10(e - (digits as i64 - 1));
    let mantissa = scaled.numer().div_floor(scaled.denom()).to_string();
    let sign = if neg { "-" } else { "" };
    if (-6..=20).contains(&e) {
        let s = if e >= 0 {
            let int_len = (e + 1) as usize;
            if int_len >= mantissa.len() {
                format!("{}{}", mantissa, "0".repeat(int_len - mantissa.len()))
            } else {
                format!("{}.{}", &mantissa[..int_len], &mantissa[int_len..])
            }
        } else {
            format!("0.{}{}", "0".repeat((-e - 1) as usize), mantissa)
        };
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        format!("{sign}{s}")
    } else {
        let tail = mantissa[1..].trim_end_matches('0');
        if tail.is_empty() {
            format!("{sign}{}e{e}", &mantissa[..1])
        } else {
            format!("{sign}{}.{}e{e}", &mantissa[..1], tail)
        }
    }
}

/// Least common multiple of the denominators of `values`.
pub fn lcm_denominators<'a>(values: impl IntoIterator<Item = &'a Rat>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// Serde adapter: rationals as exact strings; integers accepted on input.
pub mod serde_rat {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_exact(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        d.deserialize_any(RatVisitor)
    }

    struct RatVisitor;

    impl Visitor<'_> for RatVisitor {
        type Value = Rat;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a rational as \"p/q\", \"n\", or an integer")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
            parse_rat(v).map_err(E::custom)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
            Ok(int(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
            Ok(Rat::from_integer(BigInt::from(v)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rat("13/12").unwrap(), frac(13, 12));
        assert_eq!(parse_rat("26/24").unwrap(), frac(13, 12));
        assert_eq!(parse_rat("-4").unwrap(), int(-4));
        assert_eq!(parse_rat("0.25").unwrap(), frac(1, 4));
        assert_eq!(parse_rat("-1.5").unwrap(), frac(-3, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("abc").is_err());
        assert!(parse_rat("").is_err());
        assert!(parse_rat("1/2/3").is_err());
    }

    #[test]
    fn exact_strings_are_canonical() {
        assert_eq!(to_exact(&frac(6, -8)), "-3/4");
        assert_eq!(to_exact(&int(7)), "7");
    }

    #[test]
    fn decimal_truncates() {
        assert_eq!(to_decimal(&frac(1, 3), 20), "0.33333333333333333333");
        assert_eq!(to_decimal(&frac(2, 3), 5), "0.66666");
        assert_eq!(to_decimal(&frac(13, 12), 20), "1.0833333333333333333");
        assert_eq!(to_decimal(&int(4), 20), "4");
        assert_eq!(to_decimal(&frac(-7, 5), 20), "-1.4");
        assert_eq!(to_decimal(&frac(1, 1000), 20), "0.001");
        let big = pow(&int(2), 100);
        assert_eq!(to_decimal(&big, 20), "1.2676506002282294014e30");
    }
}
