//! Algebraic measure descriptions on the circle and the 2-torus.
//!
//! A [`MeasureExpr`] is a small expression tree: Lebesgue measure, digit
//! (Cantor–Lebesgue) measures, finite atomic measures, affine pushforwards,
//! convolutions and products. Evaluators give exact cell masses and CDFs
//! (where those are finite computations) and Fourier coefficients with a
//! certified absolute error.

mod cdf;
mod fourier;
mod json;
mod sample;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{ExactError, UnitRational};
use crate::ratio::{format_ratio, ratio_to_f64};

pub(crate) use cdf::digit_cdf_scaled;
pub use cdf::{cdf, cell_mass, CYCLE_LIMIT};
pub use fourier::{fourier_1d, fourier_2d};
pub use json::{AtomJson, MeasureJson};
pub use sample::{sample, sample_seeded};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("probs: {0}")]
    InvalidProbs(String),
    #[error("base must be at least 2, got {0}")]
    InvalidBase(u32),
    #[error("atomic measure needs at least one atom")]
    NoAtoms,
    #[error("affine map x -> {scale}*x + {offset} does not send [0,1] into [0,1]")]
    AffineOutOfRange { scale: String, offset: String },
    #[error("expected a {expected}-dimensional measure, got {found}-dimensional")]
    Dimension { expected: usize, found: usize },
    #[error("no exact evaluator: {0}")]
    UnsupportedExact(String),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("cannot sample from {0}")]
    UnsupportedSample(&'static str),
    #[error("digit expansion of {0} has a cycle longer than the evaluator limit")]
    CycleTooLong(String),
    #[error("{field}: {message}")]
    Parse { field: &'static str, message: String },
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Exact probability vector: non-negative rationals summing to exactly 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbVector(Vec<BigRational>);

impl ProbVector {
    pub fn new(entries: Vec<BigRational>) -> Result<Self, MeasureError> {
        if entries.is_empty() {
            return Err(MeasureError::InvalidProbs("empty vector".into()));
        }
        if let Some(bad) = entries.iter().find(|p| p.is_negative()) {
            return Err(MeasureError::InvalidProbs(format!("negative entry {}", format_ratio(bad))));
        }
        let total: BigRational = entries.iter().sum();
        if !total.is_one() {
            return Err(MeasureError::InvalidProbs(format!("entries sum to {}, not 1", format_ratio(&total))));
        }
        Ok(Self(entries))
    }

    /// Entries already known to form a probability vector.
    pub(crate) fn from_exact(entries: Vec<BigRational>) -> Self {
        debug_assert!(entries.iter().sum::<BigRational>().is_one());
        Self(entries)
    }

    /// Convenience for small literals: `from_fractions(&[(1,3),(2,3)])`.
    pub fn from_fractions(pairs: &[(i64, i64)]) -> Result<Self, MeasureError> {
        if pairs.iter().any(|&(_, d)| d == 0) {
            return Err(MeasureError::InvalidProbs("zero denominator".into()));
        }
        Self::new(pairs.iter().map(|&(n, d)| BigRational::new(n.into(), d.into())).collect())
    }

    pub fn uniform(len: usize) -> Self {
        let w = BigRational::new(BigInt::one(), BigInt::from(len));
        Self(vec![w; len])
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(ratio_to_f64).collect()
    }

    /// Index of an entry equal to 1, if the vector is deterministic.
    pub fn point_index(&self) -> Option<usize> {
        self.0.iter().position(|p| p.is_one())
    }
}

/// Shannon entropy in nats, `−Σ p ln p` with `0·ln 0 = 0`.
pub fn entropy(p: &ProbVector) -> f64 {
    p.to_f64().into_iter().filter(|&v| v > 0.0).map(|v| -v * v.ln()).sum()
}

/// `H(p)/ln(base)`: the dimension of the digit measure `Digit(base, p)`.
pub fn digit_dimension(base: u32, p: &ProbVector) -> f64 {
    entropy(p) / (base as f64).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub location: UnitRational,
    pub weight: BigRational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub enum MeasureExpr {
    Lebesgue,
    /// Law of `Σ_j X_j / base^j` with IID digits `X_j ~ probs`.
    Digit {
        base: u32,
        probs: ProbVector,
    },
    Atomic(Vec<Atom>),
    /// Pushforward under `x ↦ scale·x + offset`.
    AffinePush {
        child: Box<MeasureExpr>,
        scale: BigRational,
        offset: BigRational,
    },
    /// Convolution modulo 1 (per coordinate for 2-D children).
    Convolve(Box<MeasureExpr>, Box<MeasureExpr>),
    /// Product measure on the torus; both factors are 1-D.
    Product(Box<MeasureExpr>, Box<MeasureExpr>),
}

impl MeasureExpr {
    pub fn lebesgue() -> Self {
        MeasureExpr::Lebesgue
    }

    pub fn digit(base: u32, probs: ProbVector) -> Result<Self, MeasureError> {
        if base < 2 {
            return Err(MeasureError::InvalidBase(base));
        }
        if probs.len() != base as usize {
            return Err(MeasureError::InvalidProbs(format!("length {} does not match base {base}", probs.len())));
        }
        Ok(MeasureExpr::Digit { base, probs })
    }

    pub fn atomic(atoms: Vec<(UnitRational, BigRational)>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::NoAtoms);
        }
        let (locations, weights): (Vec<_>, Vec<_>) = atoms.into_iter().unzip();
        ProbVector::new(weights.clone())?;
        Ok(MeasureExpr::Atomic(
            locations.into_iter().zip(weights).map(|(location, weight)| Atom { location, weight }).collect(),
        ))
    }

    pub fn affine(child: MeasureExpr, scale: BigRational, offset: BigRational) -> Result<Self, MeasureError> {
        child.expect_dim(1)?;
        let zero = BigRational::zero();
        let one = BigRational::one();
        let end = &scale + &offset;
        let inside = |v: &BigRational| *v >= zero && *v <= one;
        if !inside(&offset) || !inside(&end) {
            return Err(MeasureError::AffineOutOfRange { scale: format_ratio(&scale), offset: format_ratio(&offset) });
        }
        Ok(MeasureExpr::AffinePush { child: Box::new(child), scale, offset })
    }

    pub fn convolve(left: MeasureExpr, right: MeasureExpr) -> Result<Self, MeasureError> {
        let d = left.dim();
        right.expect_dim(d)?;
        Ok(MeasureExpr::Convolve(Box::new(left), Box::new(right)))
    }

    pub fn product(first: MeasureExpr, second: MeasureExpr) -> Result<Self, MeasureError> {
        first.expect_dim(1)?;
        second.expect_dim(1)?;
        Ok(MeasureExpr::Product(Box::new(first), Box::new(second)))
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureExpr::Product(..) => 2,
            MeasureExpr::Convolve(l, _) => l.dim(),
            _ => 1,
        }
    }

    pub(crate) fn expect_dim(&self, expected: usize) -> Result<(), MeasureError> {
        let found = self.dim();
        if found == expected {
            Ok(())
        } else {
            Err(MeasureError::Dimension { expected, found })
        }
    }

    pub(crate) fn contains_convolve(&self) -> bool {
        match self {
            MeasureExpr::Convolve(..) => true,
            MeasureExpr::AffinePush { child, .. } => child.contains_convolve(),
            MeasureExpr::Product(a, b) => a.contains_convolve() || b.contains_convolve(),
            _ => false,
        }
    }

    /// Short human-readable description used in report metadata.
    pub fn describe(&self) -> String {
        match self {
            MeasureExpr::Lebesgue => "lebesgue".into(),
            MeasureExpr::Digit { base, probs } => {
                let ps: Vec<String> = probs.entries().iter().map(format_ratio).collect();
                format!("digit({base};{})", ps.join(","))
            }
            MeasureExpr::Atomic(atoms) => format!("atomic({} atoms)", atoms.len()),
            MeasureExpr::AffinePush { child, scale, offset } => {
                format!("affine({},{};{})", format_ratio(scale), format_ratio(offset), child.describe())
            }
            MeasureExpr::Convolve(l, r) => format!("convolve({};{})", l.describe(), r.describe()),
            MeasureExpr::Product(a, b) => format!("product({};{})", a.describe(), b.describe()),
        }
    }
}

/// `α = ½δ_{x₀} + ½δ_{x₁}` on the `T_{n^k}` periodic orbit
/// `x₀ = 1/(n^{2k}−1)`, `x₁ = n^k/(n^{2k}−1)`.
pub fn make_alpha(n: u32, k: u32) -> Result<MeasureExpr, MeasureError> {
    if n < 2 {
        return Err(MeasureError::InvalidBase(n));
    }
    if k == 0 {
        return Err(MeasureError::InvalidProbs("alpha needs k >= 1".into()));
    }
    let nk = num_bigint::BigUint::from(n).pow(k);
    let den = &nk * &nk - 1u32;
    let half = BigRational::new(1.into(), 2.into());
    MeasureExpr::atomic(vec![
        (UnitRational::new(1u32, den.clone())?, half.clone()),
        (UnitRational::new(nk, den)?, half),
    ])
}

/// `β = Digit(m, (1/3, 2/3, 0, …, 0))`.
pub fn make_beta(m: u32) -> Result<MeasureExpr, MeasureError> {
    if m < 2 {
        return Err(MeasureError::InvalidBase(m));
    }
    let mut probs = vec![BigRational::zero(); m as usize];
    probs[0] = BigRational::new(1.into(), 3.into());
    probs[1] = BigRational::new(2.into(), 3.into());
    MeasureExpr::digit(m, ProbVector::new(probs)?)
}
