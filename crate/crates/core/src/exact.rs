//! Exact points of `[0,1)`, the maps `T_p(x) = p·x mod 1`, and p-adic
//! partition cells.
//!
//! Every operation here is integer-exact. A [`UnitRational`] built from
//! base-p digits remembers its base and digit count so orbit runners can
//! enforce the precision rule (see [`required_digits`]).

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ratio::{self, big_quotient_f64, to_bigint};

/// Guard digits added on top of the digits an orbit run consumes.
pub const GUARD_DIGITS: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("digit {digit} is out of range for base {base}")]
    InvalidDigit { digit: u32, base: u32 },
    #[error("base must be at least 2, got {0}")]
    InvalidBase(u32),
    #[error("digit sequence is empty")]
    EmptyDigits,
    #[error("denominator must be positive")]
    ZeroDenominator,
    #[error("value {0} does not lie in [0,1)")]
    NotInUnitInterval(String),
    #[error("precision too low: need at least {required} base-{base} digits, point has {actual}")]
    PrecisionTooLow { base: u32, required: u64, actual: u64 },
}

/// Declared base-p expansion length of a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    pub base: u32,
    pub digits: u64,
}

/// An exact point `numerator / denominator` of `[0,1)`.
///
/// The denominator is kept as given (never reduced implicitly), so a point
/// built from `K` base-p digits has denominator exactly `p^K`. Equality is
/// equality of values.
#[derive(Clone, Debug)]
pub struct UnitRational {
    num: BigUint,
    den: BigUint,
    precision: Option<Precision>,
}

impl UnitRational {
    pub fn new(num: impl Into<BigUint>, den: impl Into<BigUint>) -> Result<Self, ExactError> {
        let num = num.into();
        let den = den.into();
        if den.is_zero() {
            return Err(ExactError::ZeroDenominator);
        }
        if num >= den {
            return Err(ExactError::NotInUnitInterval(format!("{num}/{den}")));
        }
        Ok(Self { num, den, precision: None })
    }

    pub fn zero() -> Self {
        Self { num: BigUint::zero(), den: BigUint::one(), precision: None }
    }

    /// Reduces an arbitrary rational modulo 1 into the unit interval.
    pub fn from_ratio_mod1(q: &BigRational) -> Self {
        let f = ratio::frac(q);
        let num = f.numer().to_biguint().unwrap_or_default();
        let den = f.denom().to_biguint().unwrap_or_else(BigUint::one);
        Self { num, den, precision: None }
    }

    /// Builds `Σ digits[j]·p^{K−j−1} / p^K` with denominator `p^K`.
    pub fn from_digits(digits: &[u32], base: u32) -> Result<Self, ExactError> {
        if base < 2 {
            return Err(ExactError::InvalidBase(base));
        }
        if digits.is_empty() {
            return Err(ExactError::EmptyDigits);
        }
        if let Some(&digit) = digits.iter().find(|&&d| d >= base) {
            return Err(ExactError::InvalidDigit { digit, base });
        }
        let num = if base <= 256 {
            let bytes: Vec<u8> = digits.iter().map(|&d| d as u8).collect();
            BigUint::from_radix_be(&bytes, base).unwrap_or_default()
        } else {
            digits.iter().fold(BigUint::zero(), |acc, &d| acc * base + d)
        };
        let den = BigUint::from(base).pow(digits.len() as u32);
        Ok(Self { num, den, precision: Some(Precision { base, digits: digits.len() as u64 }) })
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn denominator(&self) -> &BigUint {
        &self.den
    }

    pub fn precision(&self) -> Option<Precision> {
        self.precision
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn to_ratio(&self) -> BigRational {
        BigRational::new(to_bigint(&self.num), to_bigint(&self.den))
    }

    /// Same value in lowest terms; drops the declared precision.
    pub fn reduced(&self) -> Self {
        let g = self.num.gcd(&self.den);
        if self.num.is_zero() {
            return Self::zero();
        }
        Self { num: &self.num / &g, den: &self.den / &g, precision: None }
    }

    /// `T_m(x) = m·x mod 1`; the denominator is unchanged.
    pub fn apply_t(&self, factor: u32) -> Self {
        let mut out = self.clone();
        out.step_in_place(factor);
        out
    }

    pub(crate) fn step_in_place(&mut self, factor: u32) {
        self.num *= factor;
        if factor <= 16 {
            while self.num >= self.den {
                self.num -= &self.den;
            }
        } else {
            self.num %= &self.den;
        }
    }

    /// `T_m^i(x)` by modular exponentiation of `m` modulo the denominator.
    pub fn orbit_point(&self, factor: u32, step: u64) -> Self {
        if step == 0 {
            return self.clone();
        }
        let mult = BigUint::from(factor).modpow(&BigUint::from(step), &self.den);
        Self { num: (&self.num * mult) % &self.den, den: self.den.clone(), precision: self.precision }
    }

    /// The cell of the `base^level`-adic partition containing this point.
    pub fn cell(&self, base: u32, level: u32) -> PartitionCell {
        let scale = BigUint::from(base).pow(level);
        PartitionCell { base, level, index: (&self.num * scale) / &self.den }
    }

    /// `floor(x·g)`, exactly.
    pub fn floor_times(&self, g: u64) -> u64 {
        if g.is_power_of_two() {
            if let Some(b) = ratio::exact_log(&self.den, 2) {
                let gbits = g.trailing_zeros() as u64;
                let v = if b >= gbits { &self.num >> (b - gbits) } else { &self.num << (gbits - b) };
                return v.to_u64().unwrap_or(g - 1);
            }
        }
        ((&self.num * g) / &self.den).to_u64().unwrap_or(g - 1)
    }

    pub fn to_f64(&self) -> f64 {
        big_quotient_f64(&self.num, &self.den)
    }
}

impl PartialEq for UnitRational {
    fn eq(&self, other: &Self) -> bool {
        if self.den == other.den {
            return self.num == other.num;
        }
        &self.num * &other.den == &other.num * &self.den
    }
}

impl Eq for UnitRational {}

impl fmt::Display for UnitRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for UnitRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for UnitRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let (n, d) = text.split_once('/').unwrap_or((text.as_str(), "1"));
        let num: BigUint = n.trim().parse().map_err(serde::de::Error::custom)?;
        let den: BigUint = d.trim().parse().map_err(serde::de::Error::custom)?;
        UnitRational::new(num, den).map_err(serde::de::Error::custom)
    }
}

/// `[index/base^level, (index+1)/base^level)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionCell {
    pub base: u32,
    pub level: u32,
    pub index: BigUint,
}

impl PartitionCell {
    pub fn new(base: u32, level: u32, index: impl Into<BigUint>) -> Result<Self, ExactError> {
        if base < 2 {
            return Err(ExactError::InvalidBase(base));
        }
        let index = index.into();
        if index >= BigUint::from(base).pow(level) {
            return Err(ExactError::NotInUnitInterval(format!("cell index {index}")));
        }
        Ok(Self { base, level, index })
    }

    pub fn width_denominator(&self) -> BigUint {
        BigUint::from(self.base).pow(self.level)
    }

    pub fn left(&self) -> BigRational {
        BigRational::new(to_bigint(&self.index), to_bigint(&self.width_denominator()))
    }

    pub fn right(&self) -> BigRational {
        BigRational::new(to_bigint(&(&self.index + 1u32)), to_bigint(&self.width_denominator()))
    }

    /// Base-`base` digits of the index, most significant first, padded to `level`.
    pub fn digits(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.level as usize];
        let mut v = self.index.clone();
        let b = BigUint::from(self.base);
        for slot in out.iter_mut().rev() {
            let (q, r) = v.div_rem(&b);
            *slot = r.to_u32().unwrap_or(0);
            v = q;
        }
        out
    }

    /// Half-open membership, decided exactly.
    pub fn contains(&self, x: &UnitRational) -> bool {
        let scaled = x.numerator() * self.width_denominator();
        let lo = &self.index * x.denominator();
        let hi = (&self.index + 1u32) * x.denominator();
        lo <= scaled && scaled < hi
    }
}

pub fn make_point(digits: &[u32], base: u32) -> Result<UnitRational, ExactError> {
    UnitRational::from_digits(digits, base)
}

pub fn apply_t(x: &UnitRational, factor: u32) -> UnitRational {
    x.apply_t(factor)
}

pub fn orbit_point(x: &UnitRational, factor: u32, step: u64) -> UnitRational {
    x.orbit_point(factor, step)
}

pub fn cell_of(x: &UnitRational, base: u32, level: u32) -> PartitionCell {
    x.cell(base, level)
}

/// Whether `D_{m^k}(x) ⊄ D_{n^k}(x)`: some `s/n^k` lies strictly inside the
/// `m^k`-adic cell of `x`.
///
/// With `z = floor(x·m^k)` the cell is `[z/m^k, (z+1)/m^k)`; the smallest
/// candidate is `s = floor(z·n^k/m^k) + 1` and it is interior iff
/// `s·m^k < (z+1)·n^k`.
pub fn in_a_k(x: &UnitRational, m: u32, n: u32, k: u32) -> bool {
    let mk = BigUint::from(m).pow(k);
    let nk = BigUint::from(n).pow(k);
    let z = x.cell(m, k).index;
    let s = (&z * &nk) / &mk + 1u32;
    s * &mk < (z + 1u32) * &nk
}

/// Digits of base `base` needed to follow `steps` iterations of `T_factor`
/// faithfully: `ceil(steps·ln factor / ln base) + 64`.
pub fn required_digits(steps: u64, factor: u32, base: u32) -> u64 {
    let consumed = (steps as f64 * (factor as f64).ln() / (base as f64).ln()).ceil();
    consumed as u64 + GUARD_DIGITS
}

/// Checks the precision rule for a point with declared precision. Points
/// without one are exact rationals taken at face value and always pass.
pub fn check_precision(x: &UnitRational, steps: u64, factor: u32) -> Result<(), ExactError> {
    match x.precision() {
        Some(Precision { base, digits }) => {
            let required = required_digits(steps, factor, base);
            if digits < required {
                Err(ExactError::PrecisionTooLow { base, required, actual: digits })
            } else {
                Ok(())
            }
        }
        None => Ok(()),
    }
}
