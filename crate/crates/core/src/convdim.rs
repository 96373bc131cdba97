//! Cell-level self-convolutions of digit measures and their entropy per
//! scale.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::measures::{MeasureError, MeasureExpr};
use crate::par::Execution;
use crate::ratio::{big_quotient_f64, to_bigint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvDimError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("discretize needs a digit measure, got {0}")]
    NotDigit(String),
    #[error("lattice mismatch: base {0} level {1} vs base {2} level {3}")]
    Mismatch(u32, u32, u32, u32),
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("q_max must be at least 1")]
    ZeroPower,
}

/// Masses of the `m^k` cells of level `k`, stored as integer numerators over
/// one common denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeMeasure {
    base: u32,
    level: u32,
    numerators: Vec<BigUint>,
    denominator: BigUint,
}

impl LatticeMeasure {
    /// From exact masses; they must be non-negative, sum to 1, and number `base^level`.
    pub fn new(base: u32, level: u32, masses: &[BigRational]) -> Result<Self, ConvDimError> {
        if base < 2 {
            return Err(MeasureError::InvalidBase(base).into());
        }
        if level == 0 {
            return Err(ConvDimError::ZeroLevel);
        }
        let cells = (base as usize).pow(level);
        if masses.len() != cells {
            return Err(MeasureError::InvalidProbs(format!("expected {cells} masses, got {}", masses.len())).into());
        }
        crate::measures::ProbVector::new(masses.to_vec())?;
        let den = masses.iter().fold(num_bigint::BigInt::one(), |acc, p| acc.lcm(p.denom()));
        let numerators = masses
            .iter()
            .map(|p| (p.numer() * (&den / p.denom())).to_biguint().expect("masses are non-negative"))
            .collect();
        Ok(Self { base, level, numerators, denominator: den.to_biguint().expect("positive") })
    }

    /// All mass in cell `index`.
    pub fn point(base: u32, level: u32, index: usize) -> Result<Self, ConvDimError> {
        let mut masses = vec![BigRational::zero(); (base as usize).pow(level)];
        masses[index] = BigRational::one();
        Self::new(base, level, &masses)
    }

    pub fn uniform(base: u32, level: u32) -> Result<Self, ConvDimError> {
        let cells = (base as usize).pow(level);
        Self::new(base, level, &vec![BigRational::new(1.into(), cells.into()); cells])
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn mass(&self, index: usize) -> BigRational {
        BigRational::new(to_bigint(&self.numerators[index]), to_bigint(&self.denominator))
    }

    pub fn masses(&self) -> Vec<BigRational> {
        (0..self.len()).map(|i| self.mass(i)).collect()
    }

    fn mass_f64(&self, index: usize) -> f64 {
        big_quotient_f64(&self.numerators[index], &self.denominator)
    }
}

/// Exact cylinder masses of `Digit(m, p)` at level `k`.
pub fn discretize(mu: &MeasureExpr, level: u32) -> Result<LatticeMeasure, ConvDimError> {
    let MeasureExpr::Digit { base, probs } = mu else {
        return Err(ConvDimError::NotDigit(mu.describe()));
    };
    if level == 0 {
        return Err(ConvDimError::ZeroLevel);
    }
    let mut masses = vec![BigRational::one()];
    for _ in 0..level {
        masses = masses.iter().flat_map(|m| probs.entries().iter().map(move |p| m * p)).collect();
    }
    LatticeMeasure::new(*base, level, &masses)
}

/// Cyclic convolution modulo `m^k`.
pub fn coarse_convolve(a: &LatticeMeasure, b: &LatticeMeasure) -> Result<LatticeMeasure, ConvDimError> {
    coarse_convolve_with(a, b, Execution::default())
}

pub fn coarse_convolve_with(
    a: &LatticeMeasure,
    b: &LatticeMeasure,
    exec: Execution,
) -> Result<LatticeMeasure, ConvDimError> {
    if a.base != b.base || a.level != b.level {
        return Err(ConvDimError::Mismatch(a.base, a.level, b.base, b.level));
    }
    let len = a.len();
    let support: Vec<usize> = (0..len).filter(|&u| !a.numerators[u].is_zero()).collect();
    let numerators = exec.map(len, |z| {
        support.iter().fold(BigUint::zero(), |acc, &u| {
            let v = (z + len - u) % len;
            if b.numerators[v].is_zero() {
                acc
            } else {
                acc + &a.numerators[u] * &b.numerators[v]
            }
        })
    });
    let mut denominator = &a.denominator * &b.denominator;
    let g = numerators.iter().fold(denominator.clone(), |g, n| g.gcd(n));
    let numerators = if g.is_one() {
        numerators
    } else {
        denominator /= &g;
        numerators.into_iter().map(|n| n / &g).collect()
    };
    Ok(LatticeMeasure { base: a.base, level: a.level, numerators, denominator })
}

/// `−Σ p ln p / (k ln m)`.
pub fn coarse_dimension(a: &LatticeMeasure) -> f64 {
    let h: f64 = (0..a.len()).map(|i| a.mass_f64(i)).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum();
    (h / (a.level as f64 * (a.base as f64).ln())).clamp(0.0, 1.0)
}

/// `coarse_dimension` of the `q`-fold power for `q = 1..=q_max`.
pub fn convolution_growth(mu: &MeasureExpr, q_max: u32, level: u32) -> Result<Vec<f64>, ConvDimError> {
    convolution_growth_with(mu, q_max, level, Execution::default())
}

pub fn convolution_growth_with(
    mu: &MeasureExpr,
    q_max: u32,
    level: u32,
    exec: Execution,
) -> Result<Vec<f64>, ConvDimError> {
    if q_max == 0 {
        return Err(ConvDimError::ZeroPower);
    }
    let base = discretize(mu, level)?;
    let mut power = base.clone();
    let mut out = vec![coarse_dimension(&power)];
    for _ in 1..q_max {
        power = coarse_convolve_with(&power, &base, exec)?;
        out.push(coarse_dimension(&power));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub q: u32,
    pub k: u32,
    pub coarse_dimension: f64,
}

/// Rows for several levels, ordered by level then `q`.
pub fn growth_table(
    mu: &MeasureExpr,
    q_max: u32,
    levels: &[u32],
    exec: Execution,
) -> Result<Vec<GrowthRow>, ConvDimError> {
    let mut rows = Vec::new();
    for &k in levels {
        for (i, d) in convolution_growth_with(mu, q_max, k, exec)?.into_iter().enumerate() {
            rows.push(GrowthRow { q: i as u32 + 1, k, coarse_dimension: d });
        }
    }
    Ok(rows)
}

/// CSV with columns `q, k, coarse_dimension`.
pub fn growth_csv(rows: &[GrowthRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{digit_dimension, make_beta, ProbVector};
    use approx::assert_abs_diff_eq;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn discretize_examples() {
        let beta = make_beta(2).unwrap();
        assert_eq!(discretize(&beta, 1).unwrap().masses(), vec![r(1, 3), r(2, 3)]);
        assert_eq!(discretize(&beta, 2).unwrap().masses(), vec![r(1, 9), r(2, 9), r(2, 9), r(4, 9)]);
        let fair = MeasureExpr::digit(2, ProbVector::uniform(2)).unwrap();
        assert_eq!(discretize(&fair, 5).unwrap(), LatticeMeasure::uniform(2, 5).unwrap());
        assert!(matches!(discretize(&MeasureExpr::Lebesgue, 2), Err(ConvDimError::NotDigit(_))));
    }

    #[test]
    fn discretize_matches_cell_mass() {
        let mu = MeasureExpr::digit(3, ProbVector::from_fractions(&[(1, 2), (1, 3), (1, 6)]).unwrap()).unwrap();
        let lattice = discretize(&mu, 3).unwrap();
        for z in 0..27u32 {
            let cell = crate::exact::PartitionCell::new(3, 3, z).unwrap();
            assert_eq!(lattice.mass(z as usize), mu.cell_mass(&cell).unwrap());
        }
    }

    #[test]
    fn convolve_examples() {
        let beta = make_beta(2).unwrap();
        let a = discretize(&beta, 1).unwrap();
        assert_eq!(coarse_convolve(&a, &a).unwrap().masses(), vec![r(5, 9), r(4, 9)]);
        let b = discretize(&beta, 3).unwrap();
        let e0 = LatticeMeasure::point(2, 3, 0).unwrap();
        assert_eq!(coarse_convolve(&e0, &b).unwrap(), b);
        let u = LatticeMeasure::uniform(2, 3).unwrap();
        assert_eq!(coarse_convolve(&u, &b).unwrap(), u);
        assert!(matches!(coarse_convolve(&a, &b), Err(ConvDimError::Mismatch(2, 1, 2, 3))));
    }

    #[test]
    fn dimension_examples() {
        assert_abs_diff_eq!(coarse_dimension(&LatticeMeasure::uniform(3, 4).unwrap()), 1.0, epsilon = 1e-12);
        assert_eq!(coarse_dimension(&LatticeMeasure::point(2, 4, 5).unwrap()), 0.0);
        let p = ProbVector::from_fractions(&[(1, 3), (2, 3)]).unwrap();
        let d = coarse_dimension(&discretize(&make_beta(2).unwrap(), 8).unwrap());
        assert_abs_diff_eq!(d, digit_dimension(2, &p), epsilon = 1e-12);
        assert_abs_diff_eq!(d, 0.9183, epsilon = 1e-4);
    }

    #[test]
    fn growth_examples() {
        let fair = MeasureExpr::digit(2, ProbVector::uniform(2)).unwrap();
        for d in convolution_growth(&fair, 3, 4).unwrap() {
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-12);
        }
        let beta = make_beta(2).unwrap();
        let g = convolution_growth(&beta, 3, 6).unwrap();
        assert_eq!(g[0], coarse_dimension(&discretize(&beta, 6).unwrap()));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(matches!(convolution_growth(&beta, 0, 6), Err(ConvDimError::ZeroPower)));
    }

    #[test]
    fn execution_modes_agree() {
        let beta = make_beta(2).unwrap();
        let a = discretize(&beta, 5).unwrap();
        let s = coarse_convolve_with(&a, &a, Execution::Sequential).unwrap();
        let p = coarse_convolve_with(&a, &a, Execution::Parallel).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn csv_rows() {
        let beta = make_beta(2).unwrap();
        let rows = growth_table(&beta, 2, &[2, 3], Execution::Sequential).unwrap();
        let text = growth_csv(&rows).unwrap();
        assert!(text.starts_with("q,k,coarse_dimension\n1,2,"));
        assert_eq!(text.lines().count(), 5);
    }
}
