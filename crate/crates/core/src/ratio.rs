//! Helpers for exact rationals: `"num/den"` string encoding and a few
//! conversions the numeric modules share.

use std::f64::consts::TAU;

use num_bigint::{BigInt, BigUint, Sign};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

/// Parses `"a/b"` or `"a"` into a reduced rational.
pub fn parse_ratio(text: &str) -> Option<BigRational> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim().parse::<BigInt>().ok()?, d.trim().parse::<BigInt>().ok()?),
        None => (text.parse::<BigInt>().ok()?, BigInt::one()),
    };
    if den.is_zero() {
        return None;
    }
    Some(BigRational::new(num, den))
}

/// Always `"num/den"`, including integers (`"1/1"`).
pub fn format_ratio(value: &BigRational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub fn serialize<S: Serializer>(value: &BigRational, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&format_ratio(value))
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<BigRational, D::Error> {
    let text = String::deserialize(deserializer)?;
    parse_ratio(&text)
        .ok_or_else(|| serde::de::Error::custom(format!("invalid rational {text:?}, expected \"num/den\"")))
}

pub fn to_bigint(value: &BigUint) -> BigInt {
    BigInt::from_biguint(Sign::Plus, value.clone())
}

/// Fractional part `{q}` in `[0,1)`.
pub fn frac(q: &BigRational) -> BigRational {
    q - q.floor()
}

/// `e^{2πi q}` for an exact rational, reducing modulo 1 before going to floats.
pub fn unit_phase(q: &BigRational) -> Complex64 {
    let f = ratio_to_f64(&frac(q));
    Complex64::from_polar(1.0, TAU * f)
}

/// `e^{2πi a/b}` for integers, reduced exactly modulo `b` first.
pub fn unit_phase_int(a: i128, b: i128) -> Complex64 {
    let r = a.rem_euclid(b);
    Complex64::from_polar(1.0, TAU * (r as f64 / b as f64))
}

/// Float value of a rational whose numerator and denominator may exceed
/// `f64` range; keeps about 63 significant bits of each before dividing.
pub fn ratio_to_f64(q: &BigRational) -> f64 {
    let negative = q.is_negative();
    let num = q.numer().abs().to_biguint().unwrap_or_default();
    let den = q.denom().abs().to_biguint().unwrap_or_default();
    let v = big_quotient_f64(&num, &den);
    if negative {
        -v
    } else {
        v
    }
}

pub(crate) fn big_quotient_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let nb = num.bits() as i64;
    let db = den.bits() as i64;
    // Bring both into ~64-bit range with a shared binary exponent.
    let n_shift = (nb - 64).max(0);
    let d_shift = (db - 64).max(0);
    let n = (num >> n_shift as u64).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> d_shift as u64).to_f64().unwrap_or(f64::INFINITY);
    let exp = n_shift - d_shift;
    let mant = n / d;
    if exp > i32::MAX as i64 {
        f64::INFINITY
    } else if exp < i32::MIN as i64 {
        0.0
    } else {
        mant * 2f64.powi(exp as i32)
    }
}

/// True when `value` is `base^e` for some `e ≥ 0`; returns `e`.
pub fn exact_log(value: &BigUint, base: u32) -> Option<u64> {
    if value.is_zero() || base < 2 {
        return None;
    }
    if base.is_power_of_two() {
        let step = base.trailing_zeros() as u64;
        let tz = value.trailing_zeros()?;
        return (value.bits() == tz + 1 && tz % step == 0).then_some(tz / step);
    }
    let guess = ((value.bits() - 1) as f64 / (base as f64).log2()).floor() as u64;
    (guess.saturating_sub(1)..=guess + 1).find(|&e| BigUint::from(base).pow(e as u32) == *value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        let q = parse_ratio("2/6").unwrap();
        assert_eq!(format_ratio(&q), "1/3");
        assert_eq!(format_ratio(&parse_ratio("5").unwrap()), "5/1");
        assert!(parse_ratio("1/0").is_none());
        assert!(parse_ratio("x/2").is_none());
    }

    #[test]
    fn huge_quotient() {
        let den = BigUint::one() << 5000u32;
        let num = &den / 3u32;
        let v = big_quotient_f64(&num, &den);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_log_detects_powers() {
        assert_eq!(exact_log(&BigUint::from(27u32), 3), Some(3));
        assert_eq!(exact_log(&BigUint::from(1u32), 3), Some(0));
        assert_eq!(exact_log(&BigUint::from(12u32), 2), None);
    }
}
