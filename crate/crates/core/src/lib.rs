//! Regime-switching Cox-Ingersoll-Ross processes.
//!
//! The short rate follows
//!
//! ```text
//! dr_t = a(Λ_t) (b(Λ_t) − r_t) dt + 2 σ(Λ_t) √r_t dB_t
//! ```
//!
//! where `Λ_t` is an irreducible continuous-time Markov chain on a finite set of
//! regimes. The crate decides positive recurrence vs. transience, computes the
//! tail threshold `κ = sup{p > 0 : η_p > 0}` of the stationary law, samples
//! trajectories exactly between regime jumps, and provides the Monte-Carlo
//! estimators used to check the light-tail / heavy-tail dichotomy empirically.
//!
//! Module map:
//!
//! * [`model`]: model types, validation, invariant measure, rate bounds.
//! * [`spectral`]: `η_p`, `κ`, `η̃₁`, variational eigenvalues, M-matrix test.
//! * [`classify`]: recurrence and tail verdicts.
//! * [`simulate`]: regime skeletons, exact and Euler path engines, time change.
//! * [`analyze`]: stationary sampling, tail/moment probes, ergodic averages, KS.
//! * [`exec`]: sequential / rayon execution of per-path work.

pub mod analyze;
pub mod classify;
pub mod error;
pub mod exec;
pub mod model;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Exec;
pub use model::{InvariantMeasure, ModelSpec, StateDepModel};
