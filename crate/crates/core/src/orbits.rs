//! Simultaneous orbits `(T_m^i f(x), T_n^i g(x))` and their streaming
//! empirical statistics.
//!
//! Orbit points are exact; only the Fourier phases `e^{2πi(ku + jv)}` are
//! floating point. Grid cells are decided exactly with the half-open
//! convention.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{check_precision, ExactError, Precision, UnitRational};
use crate::ratio::{self, format_ratio};

pub const DEFAULT_CUTOFF: usize = 8;
pub const DEFAULT_GRID: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("{0}")]
    Precision(#[from] ExactError),
    #[error("map factor must be at least 2, got {0}")]
    InvalidFactor(u32),
    #[error("affine map x -> {scale}*x + {offset} does not send [0,1] into [0,1]")]
    AffineOutOfRange { scale: String, offset: String },
    #[error("empirical measure is empty")]
    Empty,
    #[error("mode ({k},{j}) is outside the cutoff {cutoff}")]
    ModeOutOfRange { k: i64, j: i64, cutoff: usize },
    #[error("cannot merge accumulators with different shapes (F={0}, G={1} vs F={2}, G={3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("invalid accumulator: {0}")]
    Invalid(String),
}

/// `x ↦ scale·x + offset` with `[0,1]` mapped into `[0,1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AffineJson", into = "AffineJson")]
pub struct AffineMap {
    scale: BigRational,
    offset: BigRational,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AffineJson {
    scale: String,
    offset: String,
}

impl TryFrom<AffineJson> for AffineMap {
    type Error = OrbitError;
    fn try_from(value: AffineJson) -> Result<Self, Self::Error> {
        let parse = |t: &str| ratio::parse_ratio(t).ok_or_else(|| OrbitError::Invalid(format!("rational {t:?}")));
        AffineMap::new(parse(&value.scale)?, parse(&value.offset)?)
    }
}

impl From<AffineMap> for AffineJson {
    fn from(value: AffineMap) -> Self {
        AffineJson { scale: format_ratio(&value.scale), offset: format_ratio(&value.offset) }
    }
}

impl AffineMap {
    pub fn new(scale: BigRational, offset: BigRational) -> Result<Self, OrbitError> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        let end = &scale + &offset;
        let inside = |v: &BigRational| *v >= zero && *v <= one;
        if !inside(&offset) || !inside(&end) {
            return Err(OrbitError::AffineOutOfRange { scale: format_ratio(&scale), offset: format_ratio(&offset) });
        }
        Ok(Self { scale, offset })
    }

    pub fn identity() -> Self {
        Self { scale: BigRational::one(), offset: BigRational::zero() }
    }

    pub fn is_identity(&self) -> bool {
        self.scale.is_one() && self.offset.is_zero()
    }

    pub fn scale(&self) -> &BigRational {
        &self.scale
    }

    pub fn offset(&self) -> &BigRational {
        &self.offset
    }

    /// Exact image, reduced to lowest terms and read modulo 1. The identity
    /// returns the point untouched (denominator and precision kept).
    pub fn apply(&self, x: &UnitRational) -> UnitRational {
        if self.is_identity() {
            return x.clone();
        }
        UnitRational::from_ratio_mod1(&(x.to_ratio() * &self.scale + &self.offset))
    }
}

impl Default for AffineMap {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitParams {
    pub m: u32,
    pub n: u32,
    pub start_step: u64,
    pub steps: u64,
    pub f: AffineMap,
    pub g: AffineMap,
    pub precision: Option<Precision>,
}

/// Streaming statistics of `(1/N) Σ δ_{(u_i, v_i)}` on `[0,1)²`.
///
/// Keeps the raw sums `Σ e^{2πi(k u_i + j v_i)}` for `|k|, |j| ≤ F` and a
/// `G × G` histogram. `grid[row][col]` counts points with `v` in row `row`
/// and `u` in column `col`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure2D {
    cutoff: usize,
    grid_size: usize,
    count: u64,
    sums: Vec<Complex64>,
    grid: Vec<u64>,
    params: Option<OrbitParams>,
}

impl EmpiricalMeasure2D {
    pub fn new(cutoff: usize, grid_size: usize) -> Self {
        let side = 2 * cutoff + 1;
        Self {
            cutoff,
            grid_size: grid_size.max(1),
            count: 0,
            sums: vec![Complex64::zero(); side * side],
            grid: vec![0; grid_size.max(1) * grid_size.max(1)],
            params: None,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn params(&self) -> Option<&OrbitParams> {
        self.params.as_ref()
    }

    pub fn set_params(&mut self, params: Option<OrbitParams>) {
        self.params = params;
    }

    fn index(&self, k: i64, j: i64) -> Option<usize> {
        let f = self.cutoff as i64;
        if k.abs() > f || j.abs() > f {
            return None;
        }
        Some(((k + f) * (2 * f + 1) + (j + f)) as usize)
    }

    /// Raw sum `Σ_i e^{2πi(k u_i + j v_i)}`.
    pub fn fourier_sum(&self, k: i64, j: i64) -> Option<Complex64> {
        self.index(k, j).map(|i| self.sums[i])
    }

    pub fn grid_count(&self, row: usize, col: usize) -> u64 {
        self.grid[row * self.grid_size + col]
    }

    /// Counts per column: the histogram of the first coordinate.
    pub fn first_marginal(&self) -> Vec<u64> {
        (0..self.grid_size).map(|c| (0..self.grid_size).map(|r| self.grid_count(r, c)).sum()).collect()
    }

    /// Counts per row: the histogram of the second coordinate.
    pub fn second_marginal(&self) -> Vec<u64> {
        self.grid.chunks(self.grid_size).map(|row| row.iter().sum()).collect()
    }

    /// Adds one exact point.
    pub fn push(&mut self, u: &UnitRational, v: &UnitRational) {
        let g = self.grid_size as u64;
        let col = u.floor_times(g) as usize;
        let row = v.floor_times(g) as usize;
        self.push_raw(u.to_f64(), v.to_f64(), row, col);
    }

    fn push_raw(&mut self, u: f64, v: f64, row: usize, col: usize) {
        let f = self.cutoff;
        let side = 2 * f + 1;
        let powers = |t: f64| {
            let base = Complex64::from_polar(1.0, std::f64::consts::TAU * t);
            let mut p = vec![Complex64::new(1.0, 0.0); side];
            for k in 1..=f {
                p[f + k] = p[f + k - 1] * base;
                p[f - k] = p[f + k].conj();
            }
            p
        };
        let pu = powers(u);
        let pv = powers(v);
        for (a, eu) in pu.iter().enumerate() {
            let row_sums = &mut self.sums[a * side..(a + 1) * side];
            for (slot, ev) in row_sums.iter_mut().zip(&pv) {
                *slot += eu * ev;
            }
        }
        self.grid[row * self.grid_size + col] += 1;
        self.count += 1;
    }

    /// Componentwise sum of counts, Fourier sums and grids.
    pub fn merge(&mut self, other: &Self) -> Result<(), OrbitError> {
        if self.cutoff != other.cutoff || self.grid_size != other.grid_size {
            return Err(OrbitError::ShapeMismatch(self.cutoff, self.grid_size, other.cutoff, other.grid_size));
        }
        self.count += other.count;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.grid.iter_mut().zip(&other.grid) {
            *a += b;
        }
        if let (Some(p), Some(q)) = (self.params.as_mut(), other.params.as_ref()) {
            if p.m == q.m && p.n == q.n && p.f == q.f && p.g == q.g && p.start_step + p.steps == q.start_step {
                p.steps += q.steps;
            } else {
                self.params = None;
            }
        } else {
            self.params = None;
        }
        Ok(())
    }

    /// `ν̂_N(k, j) = sums[(k,j)] / N`.
    pub fn empirical_fourier(&self, k: i64, j: i64) -> Result<Complex64, OrbitError> {
        if self.count == 0 {
            return Err(OrbitError::Empty);
        }
        let sum = self.fourier_sum(k, j).ok_or(OrbitError::ModeOutOfRange { k, j, cutoff: self.cutoff })?;
        Ok(sum / self.count as f64)
    }
}

#[derive(Serialize, Deserialize)]
struct EmpiricalJson {
    count: u64,
    cutoff: usize,
    grid_size: usize,
    grid: Vec<Vec<u64>>,
    fourier: BTreeMap<String, [f64; 2]>,
    params: Option<OrbitParams>,
}

impl Serialize for EmpiricalMeasure2D {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let f = self.cutoff as i64;
        let mut fourier = BTreeMap::new();
        for k in -f..=f {
            for j in -f..=f {
                let s = self.fourier_sum(k, j).unwrap_or_default();
                fourier.insert(format!("{k},{j}"), [s.re, s.im]);
            }
        }
        EmpiricalJson {
            count: self.count,
            cutoff: self.cutoff,
            grid_size: self.grid_size,
            grid: self.grid.chunks(self.grid_size).map(<[u64]>::to_vec).collect(),
            fourier,
            params: self.params.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EmpiricalMeasure2D {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = EmpiricalJson::deserialize(deserializer)?;
        let mut out = EmpiricalMeasure2D::new(raw.cutoff, raw.grid_size);
        if raw.grid.len() != out.grid_size || raw.grid.iter().any(|r| r.len() != out.grid_size) {
            return Err(D::Error::custom("grid shape does not match grid_size"));
        }
        out.grid = raw.grid.concat();
        if out.grid.iter().sum::<u64>() != raw.count {
            return Err(D::Error::custom("grid counts do not sum to count"));
        }
        for (key, [re, im]) in raw.fourier {
            let (k, j) = key.split_once(',').ok_or_else(|| D::Error::custom(format!("mode key {key:?}")))?;
            let k: i64 = k.parse().map_err(D::Error::custom)?;
            let j: i64 = j.parse().map_err(D::Error::custom)?;
            let idx = out.index(k, j).ok_or_else(|| D::Error::custom(format!("mode {key} outside cutoff")))?;
            out.sums[idx] = Complex64::new(re, im);
        }
        out.count = raw.count;
        out.params = raw.params;
        Ok(out)
    }
}

/// Cursor over the joint orbit; advancing continues the same stream.
#[derive(Clone, Debug)]
pub struct OrbitStream {
    u: UnitRational,
    v: UnitRational,
    m: u32,
    n: u32,
    position: u64,
    f: AffineMap,
    g: AffineMap,
    precision: Option<Precision>,
}

impl OrbitStream {
    pub fn new(x: &UnitRational, f: &AffineMap, g: &AffineMap, m: u32, n: u32) -> Result<Self, OrbitError> {
        Self::starting_at(x, f, g, m, n, 0)
    }

    /// Stream positioned at step `start` (jumped to by modular exponentiation).
    pub fn starting_at(
        x: &UnitRational,
        f: &AffineMap,
        g: &AffineMap,
        m: u32,
        n: u32,
        start: u64,
    ) -> Result<Self, OrbitError> {
        for factor in [m, n] {
            if factor < 2 {
                return Err(OrbitError::InvalidFactor(factor));
            }
        }
        Ok(Self {
            u: f.apply(x).orbit_point(m, start),
            v: g.apply(x).orbit_point(n, start),
            m,
            n,
            position: start,
            f: f.clone(),
            g: g.clone(),
            precision: x.precision(),
        })
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Current point `(T_m^i f(x), T_n^i g(x))`.
    pub fn current(&self) -> (&UnitRational, &UnitRational) {
        (&self.u, &self.v)
    }

    pub fn step(&mut self) {
        self.u.step_in_place(self.m);
        self.v.step_in_place(self.n);
        self.position += 1;
    }

    /// Pushes the next `steps` points into `acc`.
    pub fn advance(&mut self, acc: &mut EmpiricalMeasure2D, steps: u64) {
        let start = self.position;
        for _ in 0..steps {
            acc.push(&self.u, &self.v);
            self.step();
        }
        let params = OrbitParams {
            m: self.m,
            n: self.n,
            start_step: start,
            steps,
            f: self.f.clone(),
            g: self.g.clone(),
            precision: self.precision,
        };
        match acc.params.as_mut() {
            Some(p) if p.m == params.m && p.n == params.n && p.start_step + p.steps == start => p.steps += steps,
            _ if acc.count == steps => acc.params = Some(params),
            _ => acc.params = None,
        }
    }
}

/// Accumulates `N` points of the orbit of `(f(x), g(x))` under `T_m × T_n`.
/// Points with a declared precision must satisfy the precision rule for
/// `max(m, n)` and `N`.
#[allow(clippy::too_many_arguments)]
pub fn run_orbit(
    x: &UnitRational,
    f: &AffineMap,
    g: &AffineMap,
    m: u32,
    n: u32,
    steps: u64,
    cutoff: usize,
    grid_size: usize,
) -> Result<EmpiricalMeasure2D, OrbitError> {
    check_precision(x, steps, m.max(n))?;
    let mut stream = OrbitStream::new(x, f, g, m, n)?;
    let mut acc = EmpiricalMeasure2D::new(cutoff, grid_size);
    stream.advance(&mut acc, steps);
    Ok(acc)
}

pub fn empirical_fourier(e: &EmpiricalMeasure2D, k: i64, j: i64) -> Result<Complex64, OrbitError> {
    e.empirical_fourier(k, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn q(n: u64, d: u64) -> UnitRational {
        UnitRational::new(n, d).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn single_point_measure() {
        let id = AffineMap::identity();
        let e = run_orbit(&q(1, 4), &id, &id, 3, 2, 1, 8, 64).unwrap();
        assert_eq!(e.count(), 1);
        assert_eq!(e.grid_count(16, 16), 1);
        for k in -8..=8i64 {
            for j in -8..=8i64 {
                let expected = Complex64::from_polar(1.0, TAU * (k + j) as f64 / 4.0);
                assert!((e.fourier_sum(k, j).unwrap() - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn diagonal_doubling_fixture() {
        let id = AffineMap::identity();
        let mut stream = OrbitStream::new(&q(1, 16), &id, &id, 2, 2).unwrap();
        let mut seen = Vec::new();
        for _ in 0..4 {
            let (u, v) = stream.current();
            seen.push((u.clone(), v.clone()));
            stream.step();
        }
        let expected = [q(1, 16), q(1, 8), q(1, 4), q(1, 2)];
        for ((u, v), e) in seen.iter().zip(expected.iter()) {
            assert_eq!(u, e);
            assert_eq!(v, e);
        }
        let acc = run_orbit(&q(1, 16), &id, &id, 2, 2, 4, 2, 16).unwrap();
        for (row, col) in [(1, 1), (2, 2), (4, 4), (8, 8)] {
            assert_eq!(acc.grid_count(row, col), 1);
        }
    }

    #[test]
    fn continuation_merges_to_full_run() {
        let id = AffineMap::identity();
        let f = AffineMap::new(r(1, 2), r(1, 4)).unwrap();
        let x = q(123, 1 << 12);
        let full = run_orbit(&x, &f, &id, 3, 2, 9, 3, 8).unwrap();
        let mut head = run_orbit(&x, &f, &id, 3, 2, 5, 3, 8).unwrap();
        let mut tail_stream = OrbitStream::starting_at(&x, &f, &id, 3, 2, 5).unwrap();
        let mut tail = EmpiricalMeasure2D::new(3, 8);
        tail_stream.advance(&mut tail, 4);
        head.merge(&tail).unwrap();
        assert_eq!(head.count(), full.count());
        assert_eq!(head.grid, full.grid);
        for (a, b) in head.sums.iter().zip(&full.sums) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(head.params().unwrap().steps, 9);
    }

    #[test]
    fn empirical_fourier_examples() {
        let mut e = EmpiricalMeasure2D::new(2, 4);
        assert_eq!(e.empirical_fourier(0, 0), Err(OrbitError::Empty));
        e.push(&UnitRational::zero(), &UnitRational::zero());
        assert_eq!(e.empirical_fourier(0, 0).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(e.empirical_fourier(2, -1).unwrap(), Complex64::new(1.0, 0.0));
        e.push(&q(1, 2), &q(1, 2));
        assert!(e.empirical_fourier(1, 0).unwrap().norm() < 1e-15);
        assert_eq!(e.empirical_fourier(3, 0), Err(OrbitError::ModeOutOfRange { k: 3, j: 0, cutoff: 2 }));
    }

    #[test]
    fn precision_rule_is_enforced() {
        let x = UnitRational::from_digits(&[1; 100], 2).unwrap();
        let id = AffineMap::identity();
        let err = run_orbit(&x, &id, &id, 3, 2, 30, 2, 4).unwrap_err();
        assert!(matches!(err, OrbitError::Precision(ExactError::PrecisionTooLow { required: 112, .. })));
        assert!(run_orbit(&x, &id, &id, 3, 2, 22, 2, 4).is_ok());
    }

    #[test]
    fn affine_maps() {
        assert!(AffineMap::new(r(1, 2), r(3, 4)).is_err());
        let f = AffineMap::new(r(1, 2), r(1, 4)).unwrap();
        assert_eq!(f.apply(&q(1, 2)), q(1, 2));
        let refl = AffineMap::new(r(-1, 1), r(1, 1)).unwrap();
        assert!(refl.apply(&UnitRational::zero()).is_zero());
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(text, r#"{"scale":"1/2","offset":"1/4"}"#);
        assert_eq!(serde_json::from_str::<AffineMap>(&text).unwrap(), f);
    }

    #[test]
    fn json_round_trip() {
        let id = AffineMap::identity();
        let e = run_orbit(&q(5, 97), &id, &id, 5, 3, 50, 2, 4).unwrap();
        let text = serde_json::to_string(&e).unwrap();
        assert!(text.contains("\"0,0\":[50.0,0.0]"));
        let back: EmpiricalMeasure2D = serde_json::from_str(&text).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn merge_rejects_shape_mismatch() {
        let mut a = EmpiricalMeasure2D::new(2, 4);
        assert!(a.merge(&EmpiricalMeasure2D::new(3, 4)).is_err());
    }
}
