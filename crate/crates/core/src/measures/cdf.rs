//! Exact CDFs, point masses and partition-cell masses.
//!
//! `cdf` is `μ([0, x])`. Digit measures are evaluated through the digit
//! recursion `F(x) = Σ_{u<d₁} p_u + p_{d₁}·F(T_m x)`: for points with a
//! finite base-m expansion it is unrolled with integer arithmetic over a
//! common denominator, otherwise the eventually periodic expansion is solved
//! as a linear fixed point. Convolutions have no exact evaluator here.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{MeasureError, MeasureExpr, ProbVector};
use crate::exact::{PartitionCell, UnitRational};
use crate::ratio::{format_ratio, to_bigint};

/// Largest eventually-periodic digit expansion the CDF evaluator will unroll.
pub const CYCLE_LIMIT: usize = 1 << 20;

impl MeasureExpr {
    /// `μ([0, x])`, exact.
    pub fn cdf(&self, x: &UnitRational) -> Result<BigRational, MeasureError> {
        self.exact_gate()?;
        self.cdf_at(&x.to_ratio())
    }

    /// `μ(cell)` for a half-open partition cell, exact.
    pub fn cell_mass(&self, cell: &PartitionCell) -> Result<BigRational, MeasureError> {
        self.exact_gate()?;
        match self {
            MeasureExpr::Digit { base, probs } if *base == cell.base && probs.point_index().is_none() => {
                Ok(cell.digits().iter().map(|&d| probs.entries()[d as usize].clone()).product())
            }
            MeasureExpr::Atomic(atoms) => {
                Ok(atoms.iter().filter(|a| cell.contains(&a.location)).map(|a| a.weight.clone()).sum())
            }
            _ => Ok(self.cdf_left(&cell.right())? - self.cdf_left(&cell.left())?),
        }
    }

    /// `μ((a, b])` for `a ≤ b`, exact.
    pub fn mass_between(&self, a: &BigRational, b: &BigRational) -> Result<BigRational, MeasureError> {
        self.exact_gate()?;
        Ok(self.cdf_at(b)? - self.cdf_at(a)?)
    }

    fn exact_gate(&self) -> Result<(), MeasureError> {
        self.expect_dim(1)?;
        if self.contains_convolve() {
            return Err(MeasureError::UnsupportedExact(
                "cell masses and CDFs of convolutions are not exact; discretize and coarse-convolve instead".into(),
            ));
        }
        Ok(())
    }

    /// `μ([0, z])` for any rational `z` (clamped outside `[0,1)`).
    pub(crate) fn cdf_at(&self, z: &BigRational) -> Result<BigRational, MeasureError> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        match self {
            MeasureExpr::Lebesgue => Ok(z.clone().max(zero).min(one)),
            MeasureExpr::Digit { base, probs } => {
                if z.is_negative() {
                    return Ok(zero);
                }
                if *z >= one {
                    return Ok(one);
                }
                match degenerate_location(*base, probs) {
                    Some(loc) => Ok(if *z >= loc { one } else { zero }),
                    None => digit_cdf(*base, probs, z),
                }
            }
            MeasureExpr::Atomic(atoms) => {
                Ok(atoms.iter().filter(|a| a.location.to_ratio() <= *z).map(|a| a.weight.clone()).sum())
            }
            MeasureExpr::AffinePush { child, scale, offset } => {
                if scale.is_zero() {
                    return Ok(if z >= offset { one } else { zero });
                }
                let pre = (z - offset) / scale;
                if scale.is_positive() {
                    child.cdf_at(&pre)
                } else {
                    Ok(one - child.cdf_left(&pre)?)
                }
            }
            MeasureExpr::Convolve(..) | MeasureExpr::Product(..) => {
                Err(MeasureError::UnsupportedExact(format!("cdf of {}", self.describe())))
            }
        }
    }

    /// `μ({z})`.
    pub(crate) fn point_mass(&self, z: &BigRational) -> Result<BigRational, MeasureError> {
        let zero = BigRational::zero();
        match self {
            MeasureExpr::Lebesgue => Ok(zero),
            MeasureExpr::Digit { base, probs } => Ok(match degenerate_location(*base, probs) {
                Some(loc) if loc == *z => BigRational::one(),
                _ => zero,
            }),
            MeasureExpr::Atomic(atoms) => {
                Ok(atoms.iter().filter(|a| a.location.to_ratio() == *z).map(|a| a.weight.clone()).sum())
            }
            MeasureExpr::AffinePush { child, scale, offset } => {
                if scale.is_zero() {
                    return Ok(if z == offset { BigRational::one() } else { zero });
                }
                child.point_mass(&((z - offset) / scale))
            }
            MeasureExpr::Convolve(..) | MeasureExpr::Product(..) => {
                Err(MeasureError::UnsupportedExact(format!("point mass of {}", self.describe())))
            }
        }
    }

    /// `μ([0, z))`.
    pub(crate) fn cdf_left(&self, z: &BigRational) -> Result<BigRational, MeasureError> {
        Ok(self.cdf_at(z)? - self.point_mass(z)?)
    }
}

/// A digit vector with a certain digit `u` is `δ_{u/(m−1)}`, read modulo 1.
fn degenerate_location(base: u32, probs: &ProbVector) -> Option<BigRational> {
    probs.point_index().map(|u| {
        let loc = BigRational::new(BigInt::from(u), BigInt::from(base - 1));
        if loc.is_one() {
            BigRational::zero()
        } else {
            loc
        }
    })
}

/// Integer form of a probability vector over the common denominator `Q`.
struct ScaledProbs {
    common: BigUint,
    weights: Vec<BigUint>,
    below: Vec<BigUint>,
}

impl ScaledProbs {
    fn new(probs: &ProbVector) -> Self {
        let common = probs
            .entries()
            .iter()
            .fold(BigInt::one(), |acc, p| acc.lcm(p.denom()))
            .to_biguint()
            .unwrap_or_else(BigUint::one);
        let weights: Vec<BigUint> = probs
            .entries()
            .iter()
            .map(|p| (p * BigRational::from_integer(to_bigint(&common))).to_integer().to_biguint().unwrap_or_default())
            .collect();
        let mut below = Vec::with_capacity(weights.len());
        let mut acc = BigUint::zero();
        for w in &weights {
            below.push(acc.clone());
            acc += w;
        }
        Self { common, weights, below }
    }
}

/// Length `L` of the base-m expansion of `num/den` (lowest terms) if finite.
fn terminating_length(den: &BigUint, base: u32) -> Option<usize> {
    let mut rest = den.clone();
    let mut len = 0usize;
    while !rest.is_one() {
        let r = (&rest % base).to_u32().unwrap_or(0);
        let g = base.gcd(&r);
        if g == 1 {
            return None;
        }
        rest /= g;
        len += 1;
    }
    Some(len)
}

fn digit_cdf(base: u32, probs: &ProbVector, z: &BigRational) -> Result<BigRational, MeasureError> {
    let num = z.numer().to_biguint().unwrap_or_default();
    let den = z.denom().to_biguint().unwrap_or_else(BigUint::one);
    if num.is_zero() {
        return Ok(BigRational::zero());
    }
    let scaled = ScaledProbs::new(probs);
    match terminating_length(&den, base) {
        Some(len) => {
            let top = BigUint::from(base).pow(len as u32);
            let digits_value = num * (top / &den);
            let mut digits = digits_value.to_radix_be(base);
            if digits.len() < len {
                let mut padded = vec![0u8; len - digits.len()];
                padded.extend_from_slice(&digits);
                digits = padded;
            }
            // F_L = F(0) = 0 for atomless digit measures; unroll backwards.
            let mut acc = BigUint::zero();
            let mut qpow = BigUint::one();
            for &d in digits.iter().rev() {
                let d = d as usize;
                acc = &scaled.below[d] * &qpow + &scaled.weights[d] * acc;
                qpow *= &scaled.common;
            }
            Ok(BigRational::new(to_bigint(&acc), to_bigint(&qpow)))
        }
        None => periodic_digit_cdf(base, probs, &num, &den, z),
    }
}

/// `μ([0, c_i/m^L])·Q^L` for a non-degenerate `Digit(m, p)` and numerators
/// `c_i ≤ m^L`, all over the shared denominator `Q^L` (returned second).
/// Skips every gcd, which matters when many cuts share one scale.
pub(crate) fn digit_cdf_scaled(
    base: u32,
    probs: &ProbVector,
    numerators: &[BigUint],
    len: usize,
) -> (Vec<BigUint>, BigUint) {
    let scaled = ScaledProbs::new(probs);
    let top = BigUint::from(base).pow(len as u32);
    let full = scaled.common.pow(len as u32);
    let values = numerators
        .iter()
        .map(|c| {
            if *c >= top {
                return full.clone();
            }
            let mut digits = c.to_radix_le(base);
            digits.resize(len, 0);
            let mut acc = BigUint::zero();
            let mut qpow = BigUint::one();
            for &d in &digits {
                let d = d as usize;
                acc = &scaled.below[d] * &qpow + &scaled.weights[d] * acc;
                qpow *= &scaled.common;
            }
            acc
        })
        .collect();
    (values, full)
}

fn periodic_digit_cdf(
    base: u32,
    probs: &ProbVector,
    num: &BigUint,
    den: &BigUint,
    z: &BigRational,
) -> Result<BigRational, MeasureError> {
    let mut seen: HashMap<BigUint, usize> = HashMap::new();
    let mut digits = Vec::new();
    let mut state = num.clone();
    let cycle_start = loop {
        if let Some(&start) = seen.get(&state) {
            break start;
        }
        if digits.len() >= CYCLE_LIMIT {
            return Err(MeasureError::CycleTooLong(format_ratio(z)));
        }
        seen.insert(state.clone(), digits.len());
        let scaled = &state * base;
        let (d, r) = scaled.div_rem(den);
        digits.push(d.to_usize().unwrap_or(0));
        state = r;
    };
    let p = probs.entries();
    let below = |d: usize| -> BigRational { p[..d].iter().sum() };
    // Affine pieces: F(x_0) = prefix_const + prefix_weight·F(x_s).
    let mut prefix_const = BigRational::zero();
    let mut prefix_weight = BigRational::one();
    for &d in &digits[..cycle_start] {
        prefix_const += &prefix_weight * below(d);
        prefix_weight *= &p[d];
    }
    let mut cycle_const = BigRational::zero();
    let mut cycle_weight = BigRational::one();
    for &d in &digits[cycle_start..] {
        cycle_const += &cycle_weight * below(d);
        cycle_weight *= &p[d];
    }
    let fixed = cycle_const / (BigRational::one() - cycle_weight);
    Ok(prefix_const + prefix_weight * fixed)
}

/// `μ([0,x])` for 1-D expressions without convolutions.
pub fn cdf(expr: &MeasureExpr, x: &UnitRational) -> Result<BigRational, MeasureError> {
    expr.cdf(x)
}

/// Exact mass of a half-open partition cell.
pub fn cell_mass(expr: &MeasureExpr, cell: &PartitionCell) -> Result<BigRational, MeasureError> {
    expr.cell_mass(cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::make_point;
    use crate::measures::{make_alpha, make_beta};

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn u(n: u64, d: u64) -> UnitRational {
        UnitRational::new(n, d).unwrap()
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(MeasureExpr::Lebesgue.cdf(&u(1, 3)).unwrap(), r(1, 3));
        let beta = make_beta(2).unwrap();
        assert_eq!(beta.cdf(&u(1, 2)).unwrap(), r(1, 3));
        assert_eq!(beta.cdf(&u(3, 4)).unwrap(), r(5, 9));
        assert_eq!(beta.cdf(&UnitRational::zero()).unwrap(), r(0, 1));
    }

    #[test]
    fn depth_two_cdf_matches_cylinder_sum() {
        // Brute force: F(3/4) = mass of cylinders 00, 01, 10 (all left of 3/4).
        let p = [r(1, 3), r(2, 3)];
        let brute = &p[0] * &p[0] + &p[0] * &p[1] + &p[1] * &p[0];
        assert_eq!(make_beta(2).unwrap().cdf(&u(3, 4)).unwrap(), brute);
    }

    #[test]
    fn periodic_expansion_is_solved_exactly() {
        // 1/3 = 0.010101..._2 → F = p0·(p0 + ... ) fixed point:
        // F(1/3) = p0·F(2/3), F(2/3) = p0 + p1·F(1/3).
        let (p0, p1) = (r(1, 3), r(2, 3));
        let f13 = &p0 * &p0 / (BigRational::one() - &p0 * &p1);
        let beta = make_beta(2).unwrap();
        assert_eq!(beta.cdf(&u(1, 3)).unwrap(), f13);
        assert_eq!(beta.cdf(&u(2, 3)).unwrap(), &p0 + &p1 * &f13);
        // Lebesgue written as a uniform digit measure in base 3 at 1/7.
        let leb3 = MeasureExpr::digit(3, ProbVector::uniform(3)).unwrap();
        assert_eq!(leb3.cdf(&u(1, 7)).unwrap(), r(1, 7));
    }

    #[test]
    fn cell_mass_examples() {
        let beta = make_beta(2).unwrap();
        assert_eq!(beta.cell_mass(&PartitionCell::new(2, 2, 0u32).unwrap()).unwrap(), r(1, 9));
        assert_eq!(beta.cell_mass(&PartitionCell::new(2, 1, 0u32).unwrap()).unwrap(), r(1, 3));
        let alpha = make_alpha(2, 2).unwrap();
        assert_eq!(alpha.cell_mass(&PartitionCell::new(2, 3, 0u32).unwrap()).unwrap(), r(1, 2));
        assert_eq!(alpha.cell_mass(&PartitionCell::new(2, 3, 2u32).unwrap()).unwrap(), r(1, 2));
    }

    #[test]
    fn cross_base_cells_use_cdf() {
        // Base-3 cells of a base-2 digit measure sum to one.
        let beta = make_beta(2).unwrap();
        let total: BigRational =
            (0u32..9).map(|i| beta.cell_mass(&PartitionCell::new(3, 2, i).unwrap()).unwrap()).sum();
        assert_eq!(total, BigRational::one());
        // Uniform base-2 digits are Lebesgue on 3-adic cells.
        let leb2 = MeasureExpr::digit(2, ProbVector::uniform(2)).unwrap();
        assert_eq!(leb2.cell_mass(&PartitionCell::new(3, 2, 4u32).unwrap()).unwrap(), r(1, 9));
    }

    #[test]
    fn degenerate_digit_is_an_atom() {
        let delta0 = MeasureExpr::digit(2, ProbVector::from_fractions(&[(1, 1), (0, 1)]).unwrap()).unwrap();
        assert_eq!(delta0.cdf(&UnitRational::zero()).unwrap(), BigRational::one());
        assert_eq!(delta0.cell_mass(&PartitionCell::new(2, 3, 0u32).unwrap()).unwrap(), BigRational::one());
        let mid = MeasureExpr::digit(3, ProbVector::from_fractions(&[(0, 1), (1, 1), (0, 1)]).unwrap()).unwrap();
        assert_eq!(mid.cdf(&u(1, 3)).unwrap(), BigRational::zero());
        assert_eq!(mid.cdf(&u(1, 2)).unwrap(), BigRational::one());
    }

    #[test]
    fn affine_pushforwards() {
        let half = r(1, 2);
        let quarter = r(1, 4);
        let mu = MeasureExpr::affine(make_beta(2).unwrap(), half.clone(), quarter.clone()).unwrap();
        // x/2 + 1/4 ≤ 1/2 ⇔ x ≤ 1/2.
        assert_eq!(mu.cdf(&u(1, 2)).unwrap(), r(1, 3));
        assert_eq!(mu.cdf(&u(1, 8)).unwrap(), r(0, 1));
        let refl = MeasureExpr::affine(make_beta(2).unwrap(), r(-1, 1), r(1, 1)).unwrap();
        // 1 − x ≤ 1/2 ⇔ x ≥ 1/2.
        assert_eq!(refl.cdf(&u(1, 2)).unwrap(), r(2, 3));
        let refl_atom = MeasureExpr::affine(make_alpha(2, 1).unwrap(), r(-1, 1), r(1, 1)).unwrap();
        assert_eq!(refl_atom.cdf(&u(1, 3)).unwrap(), r(1, 2));
        let point = MeasureExpr::affine(MeasureExpr::Lebesgue, r(0, 1), half).unwrap();
        assert_eq!(point.cell_mass(&PartitionCell::new(2, 1, 1u32).unwrap()).unwrap(), BigRational::one());
    }

    #[test]
    fn convolutions_are_rejected() {
        let c = MeasureExpr::convolve(make_beta(2).unwrap(), MeasureExpr::Lebesgue).unwrap();
        assert!(matches!(c.cdf(&u(1, 2)), Err(MeasureError::UnsupportedExact(_))));
        assert!(matches!(
            c.cell_mass(&PartitionCell::new(2, 1, 0u32).unwrap()),
            Err(MeasureError::UnsupportedExact(_))
        ));
    }

    #[test]
    fn long_dyadic_points() {
        let digits: Vec<u32> = (0..2000).map(|i| (i % 3 == 0) as u32).collect();
        let x = make_point(&digits, 2).unwrap();
        let f = make_beta(2).unwrap().cdf(&x).unwrap();
        assert!(f > BigRational::zero() && f < BigRational::one());
    }
}
