//! Fourier coefficients `μ̂(k) = ∫ e^{2πikx} dμ(x)`.
//!
//! Digit measures use the infinite product
//! `Π_{j≥1} Σ_u p_u e^{2πi u k/m^j}`, truncated at the first level `J`
//! with `2π|k|/m^J < tol/2`. Since `|f_j − 1| ≤ 2π(m−1)|k|/m^j` and every
//! factor has modulus at most 1, the discarded tail perturbs the product by
//! at most `Σ_{j>J} 2π(m−1)|k|/m^j = 2π|k|/m^J`.

use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::{MeasureError, MeasureExpr};
use crate::ratio::{ratio_to_f64, unit_phase, unit_phase_int};

/// Smallest `J ≥ 0` with `2π|freq|/m^J < tol/2`.
pub(crate) fn truncation_level(freq: f64, base: u32, tol: f64) -> u32 {
    let mut bound = TAU * freq.abs();
    let mut level = 0;
    while bound >= tol / 2.0 {
        bound /= base as f64;
        level += 1;
    }
    level
}

fn check_tol(tol: f64) -> Result<(), MeasureError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(MeasureError::InvalidTolerance(tol))
    }
}

impl MeasureExpr {
    /// `μ̂(k)` with absolute error at most `tol`.
    pub fn fourier_1d(&self, k: i64, tol: f64) -> Result<Complex64, MeasureError> {
        check_tol(tol)?;
        self.expect_dim(1)?;
        self.fourier_int(k, tol)
    }

    /// `μ̂(k, j)` for a measure on the 2-torus, absolute error at most `tol`.
    pub fn fourier_2d(&self, k: i64, j: i64, tol: f64) -> Result<Complex64, MeasureError> {
        check_tol(tol)?;
        self.expect_dim(2)?;
        self.fourier_pair(k, j, tol)
    }

    fn fourier_pair(&self, k: i64, j: i64, tol: f64) -> Result<Complex64, MeasureError> {
        match self {
            MeasureExpr::Product(a, b) => Ok(a.fourier_int(k, tol / 2.0)? * b.fourier_int(j, tol / 2.0)?),
            MeasureExpr::Convolve(l, r) => Ok(l.fourier_pair(k, j, tol / 2.0)? * r.fourier_pair(k, j, tol / 2.0)?),
            other => Err(MeasureError::Dimension { expected: 2, found: other.dim() }),
        }
    }

    pub(crate) fn fourier_int(&self, k: i64, tol: f64) -> Result<Complex64, MeasureError> {
        match self {
            MeasureExpr::Lebesgue => Ok(if k == 0 { Complex64::new(1.0, 0.0) } else { Complex64::zero() }),
            MeasureExpr::Digit { base, probs } => Ok(digit_product_int(*base, &probs.to_f64(), k, tol)),
            MeasureExpr::Atomic(atoms) => {
                let kb = BigInt::from(k);
                Ok(atoms
                    .iter()
                    .map(|a| {
                        let loc = a.location.to_ratio();
                        unit_phase(&(&loc * &kb)) * ratio_to_f64(&a.weight)
                    })
                    .sum())
            }
            MeasureExpr::AffinePush { child, scale, offset } => {
                let kq = BigRational::from_integer(BigInt::from(k));
                let phase = unit_phase(&(&kq * offset));
                let freq = &kq * scale;
                let inner = match freq.is_integer().then(|| freq.to_integer().to_i64()).flatten() {
                    Some(f) => child.fourier_int(f, tol)?,
                    None => child.fourier_real(&freq, tol)?,
                };
                Ok(phase * inner)
            }
            MeasureExpr::Convolve(l, r) => Ok(l.fourier_int(k, tol / 2.0)? * r.fourier_int(k, tol / 2.0)?),
            MeasureExpr::Product(..) => Err(MeasureError::Dimension { expected: 1, found: 2 }),
        }
    }

    /// Transform at a real frequency of a measure viewed on `[0,1] ⊂ ℝ`.
    /// Needed for affine pushforwards with non-integer `k·scale`.
    pub(crate) fn fourier_real(&self, freq: &BigRational, tol: f64) -> Result<Complex64, MeasureError> {
        if freq.is_integer() {
            if let Some(k) = freq.to_integer().to_i64() {
                return self.fourier_int(k, tol);
            }
        }
        match self {
            MeasureExpr::Lebesgue => {
                let xi = ratio_to_f64(freq);
                if xi == 0.0 {
                    return Ok(Complex64::new(1.0, 0.0));
                }
                let num = unit_phase(freq) - 1.0;
                Ok(num / Complex64::new(0.0, TAU * xi))
            }
            MeasureExpr::Digit { base, probs } => {
                let ps = probs.to_f64();
                let levels = truncation_level(ratio_to_f64(freq), *base, tol);
                let mut value = Complex64::new(1.0, 0.0);
                let mut scaled = freq.clone();
                let m = BigInt::from(*base);
                for _ in 0..levels {
                    scaled /= &m;
                    let factor: Complex64 = ps
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(u, &p)| unit_phase(&(&scaled * BigInt::from(u))) * p)
                        .sum();
                    value *= factor;
                }
                Ok(value)
            }
            MeasureExpr::Atomic(atoms) => {
                Ok(atoms.iter().map(|a| unit_phase(&(a.location.to_ratio() * freq)) * ratio_to_f64(&a.weight)).sum())
            }
            MeasureExpr::AffinePush { child, scale, offset } => {
                Ok(unit_phase(&(freq * offset)) * child.fourier_real(&(freq * scale), tol)?)
            }
            MeasureExpr::Convolve(..) => Err(MeasureError::UnsupportedExact(
                "convolution evaluated at a non-integer frequency (affine pushforward of a convolution)".into(),
            )),
            MeasureExpr::Product(..) => Err(MeasureError::Dimension { expected: 1, found: 2 }),
        }
    }
}

/// Truncated product for `Digit(base, probs)` at integer `k`. Phases are
/// reduced exactly modulo `base^j` while that fits in `i128`.
fn digit_product_int(base: u32, probs: &[f64], k: i64, tol: f64) -> Complex64 {
    let levels = truncation_level(k as f64, base, tol);
    let mut value = Complex64::new(1.0, 0.0);
    let mut modulus: Option<i128> = Some(1);
    for j in 1..=levels {
        modulus = modulus.and_then(|m| m.checked_mul(base as i128)).filter(|&m| m < (1i128 << 100));
        let factor: Complex64 = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(u, &p)| {
                let phase = match modulus {
                    Some(m) => unit_phase_int(u as i128 * k as i128, m),
                    None => Complex64::from_polar(1.0, TAU * (u as f64 * k as f64 / (base as f64).powi(j as i32))),
                };
                phase * p
            })
            .sum();
        value *= factor;
    }
    value
}

/// `μ̂(k)` for 1-D expressions.
pub fn fourier_1d(expr: &MeasureExpr, k: i64, tol: f64) -> Result<Complex64, MeasureError> {
    expr.fourier_1d(k, tol)
}

/// `μ̂(k, j)` for 2-D expressions.
pub fn fourier_2d(expr: &MeasureExpr, k: i64, j: i64, tol: f64) -> Result<Complex64, MeasureError> {
    expr.fourier_2d(k, j, tol)
}
