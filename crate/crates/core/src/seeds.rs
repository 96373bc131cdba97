//! Seed fan-out.
//!
//! Ensemble member `i` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`. No other entropy
//! source is used anywhere in the crate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exact::UnitRational;
use crate::measures::{MeasureError, MeasureExpr};
use crate::par::Execution;

pub fn member_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// `size` points drawn from `mu`, member `i` from [`member_rng`]`(seed, i)`.
pub fn sample_ensemble(
    mu: &MeasureExpr,
    size: usize,
    master_seed: u64,
    digits: usize,
    exec: Execution,
) -> Result<Vec<UnitRational>, MeasureError> {
    exec.try_map(size, |i| mu.sample(&mut member_rng(master_seed, i as u64), digits))
}
