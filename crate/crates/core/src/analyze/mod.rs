//! Monte-Carlo checks of the classifier's predictions.
//!
//! Moments are probed on nested prefixes of one stationary sample: an
//! estimate that settles (last two within 20%) reads as finite, one that
//! grows more than tenfold from the first to the last sample size reads as
//! infinite. Neither is a proof.

mod ergodic;
mod probes;
mod stationary;
mod stats;

pub use ergodic::{bessel_check, ergodic_average, ergodic_averages, eta_sandwich_check, BesselCheck, ErgodicConfig, SandwichRow, SandwichTable};
pub use probes::{
    exp_moment_probe, exp_moment_table, moment_explosion_probe, moment_table, tail_report, ExpMomentProbe, MomentRow,
    MomentTable, ProbeVerdict, TailReport, TailReportConfig, EXPLOSION_FACTOR, STABILITY_BAND,
};
pub use stationary::{default_burn_in, require_positive_recurrent, stationary_sample, StationaryConfig, StationarySample};
pub use stats::{
    default_hill_k, hill_estimator, hill_k_grid, hill_sweep, ks_distance, linear_fit, log_mean_exp, mean, HillSweep,
    HILL_LIGHT_SLOPE,
};
