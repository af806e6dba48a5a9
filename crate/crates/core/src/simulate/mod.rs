//! Path simulation.
//!
//! Between regime jumps the short rate is a constant-coefficient CIR process,
//! so paths are sampled exactly with the noncentral chi-square transition.
//! Rate-level dependent switching falls back to a full-truncation Euler
//! scheme with per-step thinning.
//!
//! Every path draws from its own ChaCha stream `(seed, path index)`, so
//! output does not depend on the worker count.

mod cir;
mod paths;
mod skeleton;
mod timechange;

pub use cir::{cir_transition, exact_cir_step, CirParams, SMALL_BETA_DT};
pub use paths::{euler_path, exact_path, simulate_paths, PathBundle, Scheme, SimConfig};
pub(crate) use paths::regime_params;
pub use skeleton::{
    sample_regime_path, sample_regime_path_state_dep, sample_regime_path_with, RegimeSkeleton, ThinningStats,
};
pub use timechange::{bessel_time_change, rho_to_r, simulate_rho_on, r_to_rho, TimeChange};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for stream `stream` of master seed `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `{:.16e}`: 17 significant digits, round-trips every `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn check_grid(grid: &[f64]) -> crate::Result<()> {
    use crate::Error;
    if grid.is_empty() {
        return Err(Error::Precondition("time grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Precondition("time grid must be finite and nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("time grid must be strictly increasing".into()));
    }
    Ok(())
}
