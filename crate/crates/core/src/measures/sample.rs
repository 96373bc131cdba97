//! Seeded surrogates for "μ-almost every x".

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MeasureError, MeasureExpr};
use crate::exact::{required_digits, UnitRational};
use crate::ratio::ratio_to_f64;

impl MeasureExpr {
    /// Draws a point: `digits` IID base-m digits for a digit measure
    /// (Lebesgue uses fair binary digits), an atom by weight for an atomic
    /// measure, and the exact affine image for pushforwards.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, digits: usize) -> Result<UnitRational, MeasureError> {
        match self {
            MeasureExpr::Lebesgue => {
                let ds: Vec<u32> = (0..digits.max(1)).map(|_| rng.random_range(0..2u32)).collect();
                Ok(UnitRational::from_digits(&ds, 2)?)
            }
            MeasureExpr::Digit { base, probs } => {
                let dist = WeightedIndex::new(probs.to_f64()).map_err(|e| MeasureError::InvalidProbs(e.to_string()))?;
                let ds: Vec<u32> = (0..digits.max(1)).map(|_| dist.sample(rng) as u32).collect();
                Ok(UnitRational::from_digits(&ds, *base)?)
            }
            MeasureExpr::Atomic(atoms) => {
                let dist = WeightedIndex::new(atoms.iter().map(|a| ratio_to_f64(&a.weight)))
                    .map_err(|e| MeasureError::InvalidProbs(e.to_string()))?;
                Ok(atoms[dist.sample(rng)].location.clone())
            }
            MeasureExpr::AffinePush { child, scale, offset } => {
                let x = child.sample(rng, digits)?;
                Ok(UnitRational::from_ratio_mod1(&(x.to_ratio() * scale + offset)))
            }
            MeasureExpr::Convolve(..) => Err(MeasureError::UnsupportedSample("convolution")),
            MeasureExpr::Product(..) => Err(MeasureError::UnsupportedSample("product measure")),
        }
    }

    /// Base of the digits drawn by [`MeasureExpr::sample`].
    pub fn sample_base(&self) -> u32 {
        match self {
            MeasureExpr::Digit { base, .. } => *base,
            MeasureExpr::AffinePush { child, .. } => child.sample_base(),
            _ => 2,
        }
    }

    /// Digits to draw so that `steps` iterations of `T_factor` stay exact
    /// under the precision rule.
    pub fn digits_for(&self, steps: u64, factor: u32) -> usize {
        required_digits(steps, factor, self.sample_base()) as usize
    }
}

pub fn sample<R: Rng + ?Sized>(expr: &MeasureExpr, rng: &mut R, digits: usize) -> Result<UnitRational, MeasureError> {
    expr.sample(rng, digits)
}

/// Deterministic draw from a single `u64` seed (ChaCha8).
pub fn sample_seeded(expr: &MeasureExpr, seed: u64, digits: usize) -> Result<UnitRational, MeasureError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    expr.sample(&mut rng, digits)
}
