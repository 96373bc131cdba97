//! Finite-horizon density checks for index sets that should have density zero.
//!
//! Both predicates are decided with integer arithmetic; the windowed
//! densities are plain hit counts over complete windows.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{check_precision, in_a_k, ExactError, UnitRational};
use crate::measures::{MeasureError, MeasureExpr};
use crate::par::Execution;
use crate::ratio::{self, format_ratio};
use crate::seeds::member_rng;

pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("need m > n > 1, got m={m}, n={n}")]
    Factors { m: u32, n: u32 },
    #[error("interval [{lo}, {hi}] is not inside [0,1]")]
    Interval { lo: String, hi: String },
    #[error("window width must be positive")]
    ZeroWindow,
}

/// Closed interval with rational endpoints inside `[0,1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "ratio")]
    pub lo: BigRational,
    #[serde(with = "ratio")]
    pub hi: BigRational,
}

impl Interval {
    pub fn new(lo: BigRational, hi: BigRational) -> Result<Self, DensityError> {
        if lo.is_negative() || hi > BigRational::one() || lo > hi {
            return Err(DensityError::Interval { lo: format_ratio(&lo), hi: format_ratio(&hi) });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, y: &BigRational) -> bool {
        *y >= self.lo && *y <= self.hi
    }

    /// Distance on the circle from `y` to the nearer endpoint.
    pub fn boundary_distance(&self, y: &BigRational) -> BigRational {
        let one = BigRational::one();
        [&self.lo, &self.hi]
            .into_iter()
            .map(|e| {
                let d = (y - e).abs();
                let wrap = &one - &d;
                d.min(wrap)
            })
            .min()
            .expect("two endpoints")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDensity {
    pub start: u64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub check: String,
    pub m: u32,
    pub n: u32,
    pub window: usize,
    pub mu: Option<String>,
    pub seed: Option<u64>,
    pub member: Option<u64>,
    pub interval: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub max_index: u64,
    pub hits: Vec<u64>,
    /// Complete windows `[start, start + width)` only.
    pub windows: Vec<WindowDensity>,
    pub params: DensityParams,
}

impl DensityReport {
    fn build(max_index: u64, hits: Vec<u64>, params: DensityParams) -> Self {
        let width = params.window as u64;
        let windows = (0..max_index / width)
            .map(|w| {
                let start = 1 + w * width;
                let count = hits.iter().filter(|&&h| h >= start && h < start + width).count();
                WindowDensity { start, fraction: count as f64 / width as f64 }
            })
            .collect();
        Self { max_index, hits, windows, params }
    }

    /// Whether the last complete window is strictly sparser than the first.
    pub fn final_below_first(&self) -> bool {
        match (self.windows.first(), self.windows.last()) {
            (Some(a), Some(b)) if self.windows.len() > 1 => b.fraction < a.fraction,
            _ => false,
        }
    }

    /// CSV with columns `k, in_A_k` for every index up to `max_index`.
    pub fn indicator_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "in_A_k"])?;
        let mut hits = self.hits.iter().peekable();
        for k in 1..=self.max_index {
            let hit = hits.next_if_eq(&&k).is_some();
            w.serialize((k, u8::from(hit)))?;
        }
        finish(w)
    }

    /// CSV with columns `window_start, density`.
    pub fn window_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["window_start", "density"])?;
        for win in &self.windows {
            w.serialize((win.start, win.fraction))?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, csv::Error> {
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn check_factors(m: u32, n: u32) -> Result<(), DensityError> {
    if m > n && n > 1 {
        Ok(())
    } else {
        Err(DensityError::Factors { m, n })
    }
}

/// Indices `k ≤ K` with `x ∈ A_k`, for a fixed point.
pub fn a_k_hits(x: &UnitRational, m: u32, n: u32, max_index: u64) -> Vec<u64> {
    (1..=max_index).filter(|&k| in_a_k(x, m, n, k as u32)).collect()
}

fn a_k_report(
    mu: &MeasureExpr,
    m: u32,
    n: u32,
    max_index: u64,
    seed: u64,
    index: u64,
    window: usize,
) -> Result<DensityReport, DensityError> {
    let x = mu.sample(&mut member_rng(seed, index), mu.digits_for(max_index, m))?;
    check_precision(&x, max_index, m)?;
    let params = DensityParams {
        check: "a_k".into(),
        m,
        n,
        window,
        mu: Some(mu.describe()),
        seed: Some(seed),
        member: Some(index),
        interval: None,
    };
    Ok(DensityReport::build(max_index, a_k_hits(&x, m, n, max_index), params))
}

fn check_inputs(m: u32, n: u32, window: usize) -> Result<(), DensityError> {
    check_factors(m, n)?;
    if window == 0 {
        return Err(DensityError::ZeroWindow);
    }
    Ok(())
}

/// Samples `x ~ μ` from `seed` and records `{k ≤ K : x ∈ A_k}`.
pub fn a_k_density(
    mu: &MeasureExpr,
    m: u32,
    n: u32,
    max_index: u64,
    seed: u64,
    window: usize,
) -> Result<DensityReport, DensityError> {
    check_inputs(m, n, window)?;
    a_k_report(mu, m, n, max_index, seed, 0, window)
}

/// Reports for ensemble members `0..count`, member `i` drawn from
/// [`member_rng`]`(master_seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn a_k_density_ensemble(
    mu: &MeasureExpr,
    m: u32,
    n: u32,
    max_index: u64,
    master_seed: u64,
    count: usize,
    window: usize,
    exec: Execution,
) -> Result<Vec<DensityReport>, DensityError> {
    check_inputs(m, n, window)?;
    exec.try_map(count, |i| a_k_report(mu, m, n, max_index, master_seed, i as u64, window))
}

/// Indices `k ≤ K` where `T_n^k x` lies outside `D` yet within `(n/m)^k`
/// of its boundary (distance measured on the circle).
pub fn boundary_proximity_density(
    x: &UnitRational,
    n: u32,
    m: u32,
    interval: &Interval,
    max_index: u64,
    window: usize,
) -> Result<DensityReport, DensityError> {
    check_inputs(m, n, window)?;
    check_precision(x, max_index, n)?;
    let mut y = x.clone();
    let mut nk = BigUint::one();
    let mut mk = BigUint::one();
    let mut hits = Vec::new();
    for k in 1..=max_index {
        y.step_in_place(n);
        nk *= n;
        mk *= m;
        let point = y.to_ratio();
        if interval.contains(&point) {
            continue;
        }
        let d = interval.boundary_distance(&point);
        let lhs = d.numer() * BigInt::from(mk.clone());
        let rhs = d.denom() * BigInt::from(nk.clone());
        if lhs <= rhs {
            hits.push(k);
        }
    }
    let params = DensityParams {
        check: "boundary".into(),
        m,
        n,
        window,
        mu: None,
        seed: None,
        member: None,
        interval: Some(interval.clone()),
    };
    Ok(DensityReport::build(max_index, hits, params))
}

/// Fraction of reports whose final window is sparser than the first.
pub fn decreasing_fraction(reports: &[DensityReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().filter(|r| r.final_below_first()).count() as f64 / reports.len() as f64
}

pub fn total_hits(reports: &[DensityReport]) -> usize {
    reports.iter().map(|r| r.hits.len()).sum()
}
