//! Approximate draws from the stationary distribution.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::classify::{classify_recurrence, classify_recurrence_state_dep, Recurrence};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{Model, ModelSpec};
use crate::simulate::{euler_path, exact_path, path_rng, regime_params, sample_regime_path_with};

use super::stats::ks_distance;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarySample {
    /// `r` at time `burn_in` on independent paths.
    pub values: Vec<f64>,
    pub regimes: Vec<usize>,
    pub burn_in: f64,
    /// Last simulated time, `2·burn_in` when the diagnostic ran.
    pub horizon: f64,
    pub n: usize,
    /// KS distance between the samples at `burn_in` and `2·burn_in`.
    pub burn_in_ks: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryConfig {
    pub n: usize,
    /// `None` uses [`default_burn_in`].
    pub burn_in: Option<f64>,
    pub seed: u64,
    /// Continue every path to `2·burn_in` and compare.
    pub diagnostic: bool,
    /// Euler step for rate-level dependent switching.
    pub euler_dt: f64,
}

impl StationaryConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        StationaryConfig { n, burn_in: None, seed, diagnostic: true, euler_dt: 0.01 }
    }
}

/// `50 / min_{a_i ≠ 0} |a_i|`.
pub fn default_burn_in(spec: &ModelSpec) -> f64 {
    let m = spec.a().iter().map(|a| a.abs()).filter(|a| *a > 0.0).fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        50.0 / m
    } else {
        50.0
    }
}

/// Constant-rate view of a model whose rates do not depend on `r`.
pub(crate) fn constant_rate_spec(model: &Model) -> Result<Option<ModelSpec>> {
    match model {
        Model::Homogeneous(m) => Ok(Some(m.clone())),
        Model::StateDependent(sd) if sd.is_time_homogeneous() => {
            let s = sd.base();
            Ok(Some(ModelSpec::new(s.a().to_vec(), s.b().to_vec(), s.sigma().to_vec(), sd.q_at(0.0))?))
        }
        Model::StateDependent(_) => Ok(None),
    }
}

pub fn require_positive_recurrent(model: &Model) -> Result<()> {
    model.require_usable()?;
    let verdict = match (constant_rate_spec(model)?, model) {
        (Some(spec), _) => classify_recurrence(&spec)?.verdict,
        (None, Model::StateDependent(sd)) => classify_recurrence_state_dep(sd, &[])?.verdict,
        (None, Model::Homogeneous(_)) => unreachable!(),
    };
    if verdict != Recurrence::PositiveRecurrent {
        return Err(Error::Contract(format!(
            "stationary quantities need a model certified positive recurrent (drift sum mu_i a_i > 0), got {verdict:?}"
        )));
    }
    Ok(())
}

/// Overdispersed start: `x₀ ~ Gamma(1/2, 2m)` with `m = max(1, max |b_i|)`,
/// regime uniform.
pub(crate) fn draw_start<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> (f64, usize) {
    let m = spec.b().iter().fold(1.0f64, |acc, b| acc.max(b.abs()));
    let x0 = Gamma::new(0.5, 2.0 * m).expect("valid").sample(rng).max(f64::MIN_POSITIVE);
    (x0, rng.random_range(0..spec.n_regimes()))
}

pub fn stationary_sample(model: &Model, cfg: &StationaryConfig, exec: &Exec) -> Result<StationarySample> {
    require_positive_recurrent(model)?;
    if cfg.n == 0 {
        return Err(Error::Precondition("sample size must be positive".into()));
    }
    let spec = model.spec();
    let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(spec));
    if !(burn_in > 0.0 && burn_in.is_finite()) {
        return Err(Error::Precondition(format!("burn-in must be positive, got {burn_in}")));
    }
    let grid: Vec<f64> = if cfg.diagnostic { vec![burn_in, 2.0 * burn_in] } else { vec![burn_in] };
    let horizon = *grid.last().expect("nonempty");

    let paths: Vec<(Vec<f64>, Vec<usize>)> = match constant_rate_spec(model)? {
        Some(cs) => {
            cs.require_h1()?;
            let params = regime_params(&cs);
            exec.try_map(cfg.n, |p| {
                let mut rng = path_rng(cfg.seed, p as u64);
                let (x0, start) = draw_start(&cs, &mut rng);
                let sk = sample_regime_path_with(&cs, horizon, start, &mut rng)?;
                Ok(exact_path(&params, &sk, x0, &grid, &mut rng))
            })?
        }
        None => {
            let sd = model.as_state_dependent();
            let substeps = ((burn_in / cfg.euler_dt).ceil() as usize).max(1);
            exec.try_map(cfg.n, |p| {
                let mut rng = path_rng(cfg.seed, p as u64);
                let (x0, start) = draw_start(spec, &mut rng);
                let (v, l, _) = euler_path(&sd, x0, start, &grid, substeps, &mut rng)?;
                Ok((v, l))
            })?
        }
    };
    let values: Vec<f64> = paths.iter().map(|(v, _)| v[0]).collect();
    let regimes: Vec<usize> = paths.iter().map(|(_, l)| l[0]).collect();
    let burn_in_ks = if cfg.diagnostic {
        let later: Vec<f64> = paths.iter().map(|(v, _)| v[1]).collect();
        Some(ks_distance(&values, &later)?)
    } else {
        None
    };
    Ok(StationarySample { n: values.len(), values, regimes, burn_in, horizon, burn_in_ks })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYM: [&[f64]; 2] = [&[-1.0, 1.0], &[1.0, -1.0]];

    fn light() -> Model {
        Model::Homogeneous(ModelSpec::from_rows(&[2.0, 1.0], &[1.0, 2.0], &[1.0, 1.0], &SYM).unwrap())
    }

    #[test]
    fn burn_in_diagnostic_and_regime_marginal() {
        let s = stationary_sample(&light(), &StationaryConfig::new(20_000, 5), &Exec::default()).unwrap();
        assert_eq!(s.burn_in, 50.0);
        assert_eq!(s.horizon, 100.0);
        assert!(s.burn_in_ks.unwrap() < 0.02);
        assert!(s.values.iter().all(|v| *v > 0.0));
        let frac = s.regimes.iter().filter(|&&l| l == 0).count() as f64 / s.n as f64;
        assert!((frac - 0.5).abs() < 0.02);
        // E[a_Λ (b_Λ − r)] = 0 under π, so E[a_Λ r] = Σ μ_i a_i b_i = 2
        let a = [2.0, 1.0];
        let w: Vec<f64> = s.values.iter().zip(&s.regimes).map(|(v, &l)| a[l] * v).collect();
        let m = super::super::mean(&w);
        assert!((m - 2.0).abs() < 0.05, "{m}");
    }

    #[test]
    fn transient_model_rejected() {
        let m = Model::Homogeneous(ModelSpec::from_rows(&[1.0, -2.0], &[2.0, -1.0], &[1.0, 1.0], &SYM).unwrap());
        let err = stationary_sample(&m, &StationaryConfig::new(10, 0), &Exec::Sequential).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn deterministic_across_workers() {
        let cfg = StationaryConfig { burn_in: Some(5.0), ..StationaryConfig::new(200, 8) };
        let a = stationary_sample(&light(), &cfg, &Exec::Sequential).unwrap();
        let b = stationary_sample(&light(), &cfg, &Exec::Parallel { threads: Some(4) }).unwrap();
        assert_eq!(a, b);
    }
}
