//! Truncated Fourier distances between empirical orbit measures and their
//! predicted limits, plus ensemble convergence reports.
//!
//! Thresholds applied to these numbers elsewhere are statistical
//! heuristics (each mode fluctuates like `N^{-1/2}`), not proven rates.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{check_precision, UnitRational};
use crate::measures::{MeasureError, MeasureExpr};
use crate::orbits::{AffineMap, EmpiricalMeasure2D, OrbitError, OrbitStream};
use crate::par::Execution;

pub const HEURISTIC_NOTE: &str =
    "verdict thresholds are statistical heuristics (per-mode fluctuations ~ N^-1/2), not proven convergence rates";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquidistError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("schedule must be non-empty and strictly increasing")]
    Schedule,
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("cutoff mismatch: accumulator has F={found}, requested F={requested}")]
    Cutoff { found: usize, requested: usize },
}

/// Which limit the orbit is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// `λ × μ`
    Part1,
    /// `λ × λ`
    Part2,
}

pub fn target_for(case: Case, mu: &MeasureExpr) -> Result<MeasureExpr, MeasureError> {
    match case {
        Case::Part1 => MeasureExpr::product(MeasureExpr::lebesgue(), mu.clone()),
        Case::Part2 => MeasureExpr::product(MeasureExpr::lebesgue(), MeasureExpr::lebesgue()),
    }
}

pub fn weight(k: i64, j: i64) -> f64 {
    1.0 / ((1 + k.abs()) as f64 * (1 + j.abs()) as f64)
}

/// Modes `(k, j)` with `0 < max(|k|, |j|) ≤ F`, row-major in `k` then `j`.
pub fn modes(cutoff: usize) -> Vec<(i64, i64)> {
    let f = cutoff as i64;
    (-f..=f).flat_map(|k| (-f..=f).map(move |j| (k, j))).filter(|&(k, j)| (k, j) != (0, 0)).collect()
}

/// Target coefficients on the mode set, computed once.
#[derive(Clone, Debug)]
pub struct TargetTable {
    cutoff: usize,
    coefficients: Vec<((i64, i64), Complex64)>,
}

impl TargetTable {
    pub fn new(target: &MeasureExpr, cutoff: usize, tol: f64) -> Result<Self, MeasureError> {
        let coefficients = modes(cutoff)
            .into_iter()
            .map(|(k, j)| target.fourier_2d(k, j, tol).map(|c| ((k, j), c)))
            .collect::<Result<_, _>>()?;
        Ok(Self { cutoff, coefficients })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn get(&self, k: i64, j: i64) -> Option<Complex64> {
        self.coefficients.iter().find(|(m, _)| *m == (k, j)).map(|(_, c)| *c)
    }

    fn errors<'a>(
        &'a self,
        e: &'a EmpiricalMeasure2D,
    ) -> impl Iterator<Item = Result<((i64, i64), f64), EquidistError>> + 'a {
        self.coefficients.iter().map(move |&((k, j), t)| {
            let v = e.empirical_fourier(k, j)?;
            Ok(((k, j), (v - t).norm()))
        })
    }

    /// Weighted sum of mode errors.
    pub fn distance(&self, e: &EmpiricalMeasure2D) -> Result<f64, EquidistError> {
        self.check(e)?;
        self.errors(e).try_fold(0.0, |acc, r| r.map(|((k, j), err)| acc + weight(k, j) * err))
    }

    /// Largest unweighted mode error.
    pub fn max_mode_error(&self, e: &EmpiricalMeasure2D) -> Result<f64, EquidistError> {
        self.check(e)?;
        self.errors(e).try_fold(0.0f64, |acc, r| r.map(|(_, err)| acc.max(err)))
    }

    fn check(&self, e: &EmpiricalMeasure2D) -> Result<(), EquidistError> {
        if e.cutoff() < self.cutoff {
            return Err(EquidistError::Cutoff { found: e.cutoff(), requested: self.cutoff });
        }
        Ok(())
    }
}

/// `Σ_{0<max(|k|,|j|)≤F} |ν̂_N(k,j) − target̂(k,j)| / ((1+|k|)(1+|j|))`.
pub fn fourier_distance(
    e: &EmpiricalMeasure2D,
    target: &MeasureExpr,
    cutoff: usize,
    tol: f64,
) -> Result<f64, EquidistError> {
    if e.count() == 0 {
        return Err(OrbitError::Empty.into());
    }
    TargetTable::new(target, cutoff, tol)?.distance(e)
}

/// The same weighted sum between two accumulators.
pub fn empirical_distance(a: &EmpiricalMeasure2D, b: &EmpiricalMeasure2D, cutoff: usize) -> Result<f64, EquidistError> {
    modes(cutoff).into_iter().try_fold(0.0, |acc, (k, j)| {
        let d = a.empirical_fourier(k, j)? - b.empirical_fourier(k, j)?;
        Ok(acc + weight(k, j) * d.norm())
    })
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistSetup {
    pub m: u32,
    pub n: u32,
    #[serde(default)]
    pub f: AffineMap,
    #[serde(default)]
    pub g: AffineMap,
    pub case: Case,
    pub schedule: Vec<u64>,
    pub cutoff: usize,
    pub grid_size: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCurve {
    pub point_id: usize,
    pub distances: Vec<f64>,
    pub max_mode_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub setup: EquidistSetup,
    pub target: String,
    pub points: Vec<PointCurve>,
    pub median_distance: Vec<f64>,
    /// Median over the ensemble of `|ν̂_N(k,j) − target̂(k,j)|` at the final `N`.
    pub mode_errors: BTreeMap<String, f64>,
    pub median_max_mode_error: f64,
    /// Final median distance over first median distance.
    pub trend_ratio: f64,
    /// `m > n > 1`; otherwise no verdict is implied.
    pub theorem_applies: bool,
    pub note: String,
}

impl ConvergenceReport {
    pub fn distance_decreases(&self) -> bool {
        self.median_distance.windows(2).all(|w| w[1] < w[0])
    }

    /// CSV with columns `point_id, N, distance`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["point_id", "N", "distance"])?;
        for p in &self.points {
            for (n, d) in self.setup.schedule.iter().zip(&p.distances) {
                w.serialize((p.point_id, n, d))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

struct PointResult {
    distances: Vec<f64>,
    max_mode_error: f64,
    mode_errors: Vec<f64>,
}

fn run_point(x: &UnitRational, setup: &EquidistSetup, table: &TargetTable) -> Result<PointResult, EquidistError> {
    let last = *setup.schedule.last().ok_or(EquidistError::Schedule)?;
    check_precision(x, last, setup.m.max(setup.n)).map_err(OrbitError::from)?;
    let mut stream = OrbitStream::new(x, &setup.f, &setup.g, setup.m, setup.n)?;
    let mut acc = EmpiricalMeasure2D::new(setup.cutoff, setup.grid_size);
    let mut distances = Vec::with_capacity(setup.schedule.len());
    for &target_n in &setup.schedule {
        stream.advance(&mut acc, target_n - stream.position());
        distances.push(table.distance(&acc)?);
    }
    let mode_errors = table.errors(&acc).map(|r| r.map(|(_, e)| e)).collect::<Result<Vec<_>, _>>()?;
    let max_mode_error = mode_errors.iter().copied().fold(0.0, f64::max);
    Ok(PointResult { distances, max_mode_error, mode_errors })
}

/// Runs every ensemble point through the schedule (continuing one stream per
/// point) and summarizes distances to `target_for(case, mu)`.
pub fn convergence_report(
    ensemble: &[UnitRational],
    mu: &MeasureExpr,
    setup: &EquidistSetup,
    exec: Execution,
) -> Result<ConvergenceReport, EquidistError> {
    if setup.schedule.is_empty() || setup.schedule[0] == 0 || setup.schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EquidistError::Schedule);
    }
    if ensemble.is_empty() {
        return Err(EquidistError::EmptyEnsemble);
    }
    let target = target_for(setup.case, mu)?;
    let table = TargetTable::new(&target, setup.cutoff, setup.tol)?;
    let results = exec.try_map(ensemble.len(), |i| run_point(&ensemble[i], setup, &table))?;

    let median_distance: Vec<f64> = (0..setup.schedule.len())
        .map(|s| median(&results.iter().map(|r| r.distances[s]).collect::<Vec<_>>()))
        .collect();
    let mode_errors = modes(setup.cutoff)
        .into_iter()
        .enumerate()
        .map(|(idx, (k, j))| {
            let column: Vec<f64> = results.iter().map(|r| r.mode_errors[idx]).collect();
            (format!("{k},{j}"), median(&column))
        })
        .collect();
    let median_max_mode_error = median(&results.iter().map(|r| r.max_mode_error).collect::<Vec<_>>());
    let trend_ratio = median_distance[median_distance.len() - 1] / median_distance[0];
    let points = results
        .into_iter()
        .enumerate()
        .map(|(point_id, r)| PointCurve { point_id, distances: r.distances, max_mode_error: r.max_mode_error })
        .collect();
    Ok(ConvergenceReport {
        setup: setup.clone(),
        target: target.describe(),
        points,
        median_distance,
        mode_errors,
        median_max_mode_error,
        trend_ratio,
        theorem_applies: setup.m > setup.n && setup.n > 1,
        note: HEURISTIC_NOTE.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::make_beta;
    use crate::seeds::member_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn uniform_sample(e: &mut EmpiricalMeasure2D, seed: u64, count: usize) {
        let mut rng = member_rng(seed, 0);
        for _ in 0..count {
            let u = UnitRational::new(rng.random::<u64>(), 1u128 << 64).unwrap();
            let v = UnitRational::new(rng.random::<u64>(), 1u128 << 64).unwrap();
            e.push(&u, &v);
        }
    }

    #[test]
    fn target_shapes() {
        let beta = make_beta(2).unwrap();
        let t1 = target_for(Case::Part1, &beta).unwrap();
        assert_eq!(t1, MeasureExpr::product(MeasureExpr::Lebesgue, beta.clone()).unwrap());
        let t2 = target_for(Case::Part2, &beta).unwrap();
        assert_eq!(t2, MeasureExpr::product(MeasureExpr::Lebesgue, MeasureExpr::Lebesgue).unwrap());
        for j in -4..=4 {
            let a = t1.fourier_2d(0, j, 1e-12).unwrap();
            let b = beta.fourier_1d(j, 1e-12).unwrap();
            assert!((a - b).norm() < 1e-12);
            assert!(t1.fourier_2d(1, j, 1e-12).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn atom_at_origin_against_uniform() {
        let mut e = EmpiricalMeasure2D::new(8, 4);
        e.push(&UnitRational::zero(), &UnitRational::zero());
        let target = target_for(Case::Part2, &MeasureExpr::Lebesgue).unwrap();
        let expected: f64 = modes(8).iter().map(|&(k, j)| weight(k, j)).sum();
        let d = fourier_distance(&e, &target, 8, 1e-12).unwrap();
        assert_abs_diff_eq!(d, expected, epsilon = 1e-10);
    }

    #[test]
    fn monte_carlo_uniform_is_close() {
        let mut e = EmpiricalMeasure2D::new(8, 4);
        uniform_sample(&mut e, 3, 10_000);
        let target = target_for(Case::Part2, &MeasureExpr::Lebesgue).unwrap();
        assert!(fourier_distance(&e, &target, 8, 1e-12).unwrap() < 0.5);
    }

    #[test]
    fn self_distance_is_zero() {
        let mut e = EmpiricalMeasure2D::new(4, 4);
        uniform_sample(&mut e, 5, 100);
        assert_eq!(empirical_distance(&e, &e.clone(), 4).unwrap(), 0.0);
    }

    #[test]
    fn empty_accumulator_errors() {
        let e = EmpiricalMeasure2D::new(2, 2);
        let target = target_for(Case::Part2, &MeasureExpr::Lebesgue).unwrap();
        assert!(matches!(fourier_distance(&e, &target, 2, 1e-12), Err(EquidistError::Orbit(OrbitError::Empty))));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    fn setup(m: u32, n: u32, schedule: Vec<u64>) -> EquidistSetup {
        EquidistSetup {
            m,
            n,
            f: AffineMap::identity(),
            g: AffineMap::identity(),
            case: Case::Part1,
            schedule,
            cutoff: 2,
            grid_size: 4,
            tol: 1e-12,
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        let beta = make_beta(2).unwrap();
        let pts = vec![UnitRational::new(1u32, 3u32).unwrap()];
        for s in [vec![], vec![5, 5], vec![10, 3], vec![0, 4]] {
            assert_eq!(
                convergence_report(&pts, &beta, &setup(3, 2, s), Execution::Sequential),
                Err(EquidistError::Schedule)
            );
        }
    }

    #[test]
    fn degenerate_equal_maps_still_report() {
        let beta = make_beta(2).unwrap();
        let pts: Vec<_> = (0..3).map(|i| beta.sample(&mut member_rng(1, i), 400).unwrap()).collect();
        let r = convergence_report(&pts, &beta, &setup(2, 2, vec![50, 100]), Execution::Sequential).unwrap();
        assert!(!r.theorem_applies);
        assert_eq!(r.points.len(), 3);
        assert_eq!(r.mode_errors.len(), 24);
        assert!(r.to_csv().unwrap().starts_with("point_id,N,distance\n0,50,"));
    }

    #[test]
    fn schedule_continuation_matches_direct_run() {
        let beta = make_beta(2).unwrap();
        let x = beta.sample(&mut member_rng(9, 0), 600).unwrap();
        let s = setup(3, 2, vec![40, 100]);
        let r = convergence_report(std::slice::from_ref(&x), &beta, &s, Execution::Sequential).unwrap();
        let direct = crate::orbits::run_orbit(&x, &s.f, &s.g, 3, 2, 100, 2, 4).unwrap();
        let target = target_for(Case::Part1, &beta).unwrap();
        let d = fourier_distance(&direct, &target, 2, 1e-12).unwrap();
        assert_abs_diff_eq!(r.points[0].distances[1], d, epsilon = 1e-12);
    }
}
