//! Window measures around a point, magnified to `[−1, 1]`, and the
//! sceneries seen along the scaling flow.
//!
//! A scenery is summarized by its dyadic descriptor: the normalized masses
//! of the `2^r` equal subintervals of the window.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exact::UnitRational;
use crate::measures::{digit_cdf_scaled, MeasureError, MeasureExpr, ProbVector};
use crate::par::Execution;
use crate::ratio::{exact_log, format_ratio, ratio_to_f64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneryError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("window [{center} - {radius}, {center} + {radius}] leaves [0,1]")]
    OutOfWindow { center: String, radius: String },
    #[error("window around {center} of radius {radius} has zero mass")]
    DegenerateWindow { center: String, radius: String },
    #[error("scale t must be finite and non-negative, got {0}")]
    InvalidScale(f64),
    #[error("radius must be positive")]
    InvalidRadius,
    #[error("series of length {len} is shorter than 2W = {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("window length must be positive")]
    EmptyWindow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenerySample {
    /// Position in the series (`t = index·t₀`).
    pub index: u64,
    pub center: UnitRational,
    pub t: f64,
    pub radius: BigRational,
    pub descriptor: ProbVector,
}

impl ScenerySample {
    pub fn descriptor_f64(&self) -> Vec<f64> {
        self.descriptor.to_f64()
    }

    pub fn is_uniform(&self) -> bool {
        let len = self.descriptor.len();
        self.descriptor.entries().iter().all(|p| *p == BigRational::new(1.into(), BigInt::from(len)))
    }

    /// Bucket of each entry at resolution `1/100`, decided exactly.
    fn bucket(&self) -> Vec<BigInt> {
        self.descriptor.entries().iter().map(|p| (p * BigInt::from(100)).floor().to_integer()).collect()
    }
}

#[derive(Serialize)]
struct SampleJson {
    index: u64,
    t: f64,
    radius: String,
    descriptor: Vec<f64>,
}

impl Serialize for ScenerySample {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SampleJson {
            index: self.index,
            t: self.t,
            radius: format_ratio(&self.radius),
            descriptor: self.descriptor_f64(),
        }
        .serialize(serializer)
    }
}

/// Step of the sampled flow times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaleStep {
    /// `t₀ = ln m`; radii `m^{−k}` are exact.
    LogBase(u32),
    /// Any `t₀ > 0`; radii are the correctly rounded `f64` values of `e^{−k t₀}`.
    Real(f64),
}

impl ScaleStep {
    pub fn t(self, k: u64) -> f64 {
        match self {
            ScaleStep::LogBase(m) => k as f64 * (m as f64).ln(),
            ScaleStep::Real(t0) => k as f64 * t0,
        }
    }

    pub fn radius(self, k: u64) -> Result<BigRational, SceneryError> {
        match self {
            ScaleStep::LogBase(m) if m >= 2 => {
                let den = num_bigint::BigUint::from(m).pow(k as u32);
                Ok(BigRational::new(BigInt::one(), den.into()))
            }
            ScaleStep::LogBase(m) => Err(MeasureError::InvalidBase(m).into()),
            ScaleStep::Real(t0) => radius_for(k as f64 * t0),
        }
    }
}

/// `e^{−t}` as the exact rational value of its `f64` approximation.
/// The relative error is below `10⁻¹⁵`, well inside the `10⁻¹²` budget.
fn radius_for(t: f64) -> Result<BigRational, SceneryError> {
    if !t.is_finite() || t < 0.0 {
        return Err(SceneryError::InvalidScale(t));
    }
    let rho = (-t).exp();
    BigRational::from_float(rho).filter(|r| r.is_positive()).ok_or(SceneryError::InvalidRadius)
}

/// Descriptor of `μ` in `[x − e^{−t}, x + e^{−t}]` at depth `r`.
pub fn window_measure(mu: &MeasureExpr, x: &UnitRational, t: f64, r: u32) -> Result<ScenerySample, SceneryError> {
    let radius = radius_for(t)?;
    window_measure_at_radius(mu, x, &radius, t, r)
}

/// As [`window_measure`] with an exact rational radius.
///
/// Entry `i` is `μ(I_i)/μ(window)` where `I_0` is closed and the remaining
/// subintervals are half-open on the left, so the entries partition the
/// window mass exactly.
pub fn window_measure_at_radius(
    mu: &MeasureExpr,
    x: &UnitRational,
    radius: &BigRational,
    t: f64,
    r: u32,
) -> Result<ScenerySample, SceneryError> {
    if !radius.is_positive() {
        return Err(SceneryError::InvalidRadius);
    }
    let parts = 1usize << r;
    let step = radius * BigRational::new(2.into(), BigInt::from(parts));
    let masses = match digit_masses(mu, x, radius, &step, parts) {
        Some(found) => found?,
        None => generic_masses(mu, x, radius, &step, parts)?,
    };
    Ok(ScenerySample { index: 0, center: x.clone(), t, radius: radius.clone(), descriptor: masses })
}

fn out_of_window(x: &UnitRational, radius: &BigRational) -> SceneryError {
    SceneryError::OutOfWindow { center: x.to_string(), radius: format_ratio(radius) }
}

fn degenerate(x: &UnitRational, radius: &BigRational) -> SceneryError {
    SceneryError::DegenerateWindow { center: x.to_string(), radius: format_ratio(radius) }
}

fn generic_masses(
    mu: &MeasureExpr,
    x: &UnitRational,
    radius: &BigRational,
    step: &BigRational,
    parts: usize,
) -> Result<ProbVector, SceneryError> {
    let center = x.to_ratio();
    let lo = &center - radius;
    let hi = &center + radius;
    if lo.is_negative() || hi > BigRational::one() {
        return Err(out_of_window(x, radius));
    }
    let cuts: Vec<BigRational> = (0..=parts).map(|i| &lo + step * BigInt::from(i)).collect();
    let cdf = cuts.iter().map(|c| mu.cdf_at(c)).collect::<Result<Vec<_>, _>>()?;
    let base = mu.cdf_left(&lo)?;
    let total = &cdf[parts] - &base;
    if total.is_zero() {
        return Err(degenerate(x, radius));
    }
    let mut masses = Vec::with_capacity(parts);
    masses.push((&cdf[1] - &base) / &total);
    for i in 1..parts {
        masses.push((&cdf[i + 1] - &cdf[i]) / &total);
    }
    Ok(ProbVector::new(masses)?)
}

/// Integer-only path for an atomless digit measure when the center and the
/// cut spacing are both `m`-adic: every cut is `c_i/m^L` and one Horner pass
/// per cut gives all CDF values over a shared denominator.
fn digit_masses(
    mu: &MeasureExpr,
    x: &UnitRational,
    radius: &BigRational,
    step: &BigRational,
    parts: usize,
) -> Option<Result<ProbVector, SceneryError>> {
    let MeasureExpr::Digit { base, probs } = mu else {
        return None;
    };
    if probs.point_index().is_some() {
        return None;
    }
    let step_den = step.denom().to_biguint()?;
    let len = exact_log(x.denominator(), *base)?.max(exact_log(&step_den, *base)?);
    let d = BigUint::from(*base).pow(len as u32);
    let scale = |num: &BigInt, den: &BigInt| -> BigUint {
        (num * (BigInt::from(d.clone()) / den)).to_biguint().expect("positive")
    };
    let center = x.numerator() * (&d / x.denominator());
    let rad = scale(radius.numer(), radius.denom());
    if rad > center || &center + &rad > d {
        return Some(Err(out_of_window(x, radius)));
    }
    let spacing = scale(step.numer(), step.denom());
    let lo = &center - &rad;
    let cuts: Vec<BigUint> = (0..=parts).map(|i| &lo + &spacing * i).collect();
    let (values, _) = digit_cdf_scaled(*base, probs, &cuts, len as usize);
    let total = &values[parts] - &values[0];
    if total.is_zero() {
        return Some(Err(degenerate(x, radius)));
    }
    let total = BigInt::from(total);
    let masses = values.windows(2).map(|w| BigRational::new(BigInt::from(&w[1] - &w[0]), total.clone())).collect();
    Some(Ok(ProbVector::from_exact(masses)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenerySeries {
    pub samples: Vec<ScenerySample>,
    /// Indices `k` whose window left `[0,1]`.
    pub skipped: Vec<u64>,
}

impl ScenerySeries {
    /// CSV with columns `k, t, d0, d1, …`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let width = self.samples.first().map_or(0, |s| s.descriptor.len());
        let mut header = vec!["k".to_string(), "t".to_string()];
        header.extend((0..width).map(|i| format!("d{i}")));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.index.to_string(), s.t.to_string()];
            row.extend(s.descriptor_f64().iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Fraction of samples whose descriptor is not uniform.
    pub fn nonuniform_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let n = self.samples.iter().filter(|s| !s.is_uniform()).count();
        n as f64 / self.samples.len() as f64
    }
}

/// Sceneries at `t = k·t₀` for `k = 1..=k_max`, skipping windows that leave `[0,1]`.
pub fn scenery_series(
    mu: &MeasureExpr,
    x: &UnitRational,
    step: ScaleStep,
    k_max: u64,
    r: u32,
) -> Result<ScenerySeries, SceneryError> {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for k in 1..=k_max {
        let radius = step.radius(k)?;
        match window_measure_at_radius(mu, x, &radius, step.t(k), r) {
            Ok(mut s) => {
                s.index = k;
                samples.push(s);
            }
            Err(SceneryError::OutOfWindow { .. }) => skipped.push(k),
            Err(e) => return Err(e),
        }
    }
    Ok(ScenerySeries { samples, skipped })
}

/// One series per center, in center order.
pub fn scenery_ensemble(
    mu: &MeasureExpr,
    centers: &[UnitRational],
    step: ScaleStep,
    k_max: u64,
    r: u32,
    exec: Execution,
) -> Result<Vec<ScenerySeries>, SceneryError> {
    exec.try_map(centers.len(), |i| scenery_series(mu, &centers[i], step, k_max, r))
}

/// Total-variation distance between the bucketed descriptor histograms of
/// samples `[0, W)` and `[W, 2W)`.
pub fn stationarity_gap(series: &[ScenerySample], window: usize) -> Result<f64, SceneryError> {
    if window == 0 {
        return Err(SceneryError::EmptyWindow);
    }
    if series.len() < 2 * window {
        return Err(SceneryError::SeriesTooShort { len: series.len(), needed: 2 * window });
    }
    let mut counts: HashMap<Vec<BigInt>, (i64, i64)> = HashMap::new();
    for s in &series[..window] {
        counts.entry(s.bucket()).or_default().0 += 1;
    }
    for s in &series[window..2 * window] {
        counts.entry(s.bucket()).or_default().1 += 1;
    }
    let diff: i64 = counts.values().map(|(a, b)| (a - b).abs()).sum();
    Ok(diff as f64 / (2 * window) as f64)
}

/// Largest descriptor entry difference, as a quick float summary.
pub fn descriptor_spread(sample: &ScenerySample) -> f64 {
    let v = sample.descriptor.entries();
    let max = v.iter().max().map(ratio_to_f64).unwrap_or(0.0);
    let min = v.iter().min().map(ratio_to_f64).unwrap_or(0.0);
    max - min
}

/// Pairwise sums of a descriptor: the depth `r − 1` descriptor.
pub fn coarsen(descriptor: &ProbVector) -> Option<Vec<BigRational>> {
    if descriptor.len() < 2 || !descriptor.len().is_multiple_of(2) {
        return None;
    }
    Some(descriptor.entries().chunks(2).map(|c| &c[0] + &c[1]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::PartitionCell;
    use crate::measures::{make_beta, ProbVector};

    fn q(n: u64, d: u64) -> UnitRational {
        UnitRational::new(n, d).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn lebesgue_is_uniform() {
        for depth in [1, 2, 3] {
            let s = window_measure(&MeasureExpr::Lebesgue, &q(1, 3), 2.0, depth).unwrap();
            assert!(s.is_uniform());
        }
        let series = scenery_series(&MeasureExpr::Lebesgue, &q(5, 11), ScaleStep::LogBase(2), 20, 2).unwrap();
        assert!(series.samples.iter().all(ScenerySample::is_uniform));
        assert_eq!(series.nonuniform_fraction(), 0.0);
    }

    #[test]
    fn beta_half_window() {
        let beta = make_beta(2).unwrap();
        let s = window_measure_at_radius(&beta, &q(1, 2), &r(1, 4), 2f64.ln(), 1).unwrap();
        assert_eq!(s.descriptor.entries(), &[r(1, 2), r(1, 2)]);
        let f = window_measure(&beta, &q(1, 2), 2f64.ln() * 2.0, 1).unwrap();
        assert_eq!(f.descriptor, s.descriptor);
    }

    #[test]
    fn windows_outside_are_rejected() {
        let beta = make_beta(2).unwrap();
        let err = window_measure(&beta, &UnitRational::zero(), 2f64.ln(), 1).unwrap_err();
        assert!(matches!(err, SceneryError::OutOfWindow { .. }));
        let series = scenery_series(&beta, &q(1, 8), ScaleStep::LogBase(2), 5, 1).unwrap();
        assert_eq!(series.skipped, vec![1, 2]);
        assert_eq!(series.samples.len(), 3);
        assert_eq!(series.samples[0].index, 3);
    }

    #[test]
    fn zero_mass_window_is_degenerate() {
        let atom = MeasureExpr::atomic(vec![(q(1, 10), BigRational::one())]).unwrap();
        let err = window_measure_at_radius(&atom, &q(1, 2), &r(1, 4), 0.0, 1).unwrap_err();
        assert!(matches!(err, SceneryError::DegenerateWindow { .. }));
        let ok = window_measure_at_radius(&atom, &q(1, 5), &r(1, 10), 0.0, 1).unwrap();
        assert_eq!(ok.descriptor.entries(), &[BigRational::one(), BigRational::zero()]);
    }

    #[test]
    fn refinement_is_pairwise_sum() {
        let beta = make_beta(2).unwrap();
        let x = UnitRational::from_digits(&[1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0], 2).unwrap();
        for depth in 1..4 {
            let coarse = window_measure(&beta, &x, 3.0, depth).unwrap();
            let fine = window_measure(&beta, &x, 3.0, depth + 1).unwrap();
            assert_eq!(coarsen(&fine.descriptor).unwrap(), coarse.descriptor.entries());
        }
    }

    #[test]
    fn aligned_windows_match_cylinder_masses() {
        let beta = make_beta(2).unwrap();
        let x = UnitRational::from_digits(&[1, 1, 0, 1, 0, 1, 1, 0], 2).unwrap();
        let z = 0b1101_0110u32;
        let series = scenery_series(&beta, &x, ScaleStep::LogBase(2), 8, 1).unwrap();
        let s = series.samples.iter().find(|s| s.index == 8).unwrap();
        let left = beta.cell_mass(&PartitionCell::new(2, 8, z - 1).unwrap()).unwrap();
        let right = beta.cell_mass(&PartitionCell::new(2, 8, z).unwrap()).unwrap();
        let total = &left + &right;
        assert_eq!(s.descriptor.entries(), &[left / &total, right / &total]);
    }

    #[test]
    fn integer_path_matches_generic_path() {
        let beta = make_beta(2).unwrap();
        let x = UnitRational::from_digits(&[0, 1, 1, 0, 1, 1, 1, 0, 1, 0, 0, 1, 1, 0], 2).unwrap();
        for k in 1..12u32 {
            let radius = r(1, 1 << k);
            for depth in 1..4 {
                let parts = 1usize << depth;
                let step = &radius * BigRational::new(2.into(), BigInt::from(parts));
                let fast = digit_masses(&beta, &x, &radius, &step, parts).unwrap();
                let slow = generic_masses(&beta, &x, &radius, &step, parts);
                assert_eq!(fast, slow);
            }
        }
        let ternary = MeasureExpr::digit(3, ProbVector::from_fractions(&[(1, 2), (1, 4), (1, 4)]).unwrap()).unwrap();
        assert!(digit_masses(&ternary, &x, &r(1, 8), &r(1, 8), 2).is_none());
    }

    #[test]
    fn empty_series() {
        let beta = make_beta(2).unwrap();
        let series = scenery_series(&beta, &q(1, 3), ScaleStep::LogBase(2), 0, 2).unwrap();
        assert!(series.samples.is_empty() && series.skipped.is_empty());
    }

    fn sample_with(descriptor: ProbVector) -> ScenerySample {
        ScenerySample { index: 0, center: q(1, 2), t: 0.0, radius: r(1, 2), descriptor }
    }

    #[test]
    fn gap_examples() {
        let a = sample_with(ProbVector::from_fractions(&[(1, 2), (1, 2)]).unwrap());
        let b = sample_with(ProbVector::from_fractions(&[(1, 3), (2, 3)]).unwrap());
        assert_eq!(stationarity_gap(&vec![a.clone(); 10], 5).unwrap(), 0.0);
        let alt: Vec<_> = (0..8).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        assert_eq!(stationarity_gap(&alt, 4).unwrap(), 0.0);
        let split: Vec<_> = (0..8).map(|i| if i < 4 { a.clone() } else { b.clone() }).collect();
        assert_eq!(stationarity_gap(&split, 4).unwrap(), 1.0);
        assert!(matches!(stationarity_gap(&alt, 5), Err(SceneryError::SeriesTooShort { len: 8, needed: 10 })));
    }

    #[test]
    fn csv_layout() {
        let series = scenery_series(&MeasureExpr::Lebesgue, &q(1, 2), ScaleStep::LogBase(2), 2, 1).unwrap();
        let text = series.to_csv().unwrap();
        assert!(text.starts_with("k,t,d0,d1\n1,"));
        assert_eq!(text.lines().count(), 3);
    }
}
