//! Exact-arithmetic laboratory for simultaneous equidistribution of orbits
//! of `(x, x)` under `T_m × T_n`.
//!
//! Points are exact rationals ([`exact::UnitRational`]), measures are small
//! algebraic expressions with exact CDFs and certified Fourier coefficients
//! ([`measures::MeasureExpr`]), and orbit statistics are accumulated as
//! streaming Fourier sums plus a grid histogram ([`orbits::EmpiricalMeasure2D`]).

pub mod convdim;
pub mod density;
pub mod equidist;
pub mod exact;
pub mod measures;
pub mod orbits;
pub mod par;
pub mod ratio;
pub mod scenery;
pub mod seeds;

pub use exact::{PartitionCell, UnitRational};
pub use measures::{MeasureError, MeasureExpr, ProbVector};
