//! Long-path averages, the `η_p` decay check and the time-change check.

use rand::distr::weighted::WeightedIndex;
use rand_distr::Distribution;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{invariant_measure, Model, ModelSpec};
use crate::simulate::{euler_path, exact_path, fmt17, path_rng, regime_params, sample_regime_path_with, simulate_rho_on};
use crate::spectral::eta;

use super::stationary::{constant_rate_spec, require_positive_recurrent};
use super::stats::{ks_distance, linear_fit, log_mean_exp, mean};

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicConfig {
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    /// Zero-based; `None` draws from the invariant measure.
    pub initial_regime: Option<usize>,
}

impl ErgodicConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        ErgodicConfig { x0: 1.0, horizon, dt: 0.01, seed, initial_regime: None }
    }
}

/// Trapezoidal time averages `(1/T) ∫_0^T f(r_s, Λ_s) ds` of several
/// functionals along one path.
pub fn ergodic_averages(model: &Model, fs: &[&dyn Fn(f64, usize) -> f64], cfg: &ErgodicConfig) -> Result<Vec<f64>> {
    require_positive_recurrent(model)?;
    if !(cfg.horizon > 0.0 && cfg.dt > 0.0 && cfg.horizon.is_finite()) {
        return Err(Error::Precondition("horizon and dt must be positive".into()));
    }
    let steps = (cfg.horizon / cfg.dt).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| (k as f64 * cfg.dt).min(cfg.horizon)).collect();
    let mut rng = path_rng(cfg.seed, 0);
    let (values, regimes) = match constant_rate_spec(model)? {
        Some(spec) => {
            spec.require_h1()?;
            let mu = invariant_measure(&spec)?.mu;
            let start = match cfg.initial_regime {
                Some(i) => i,
                None => WeightedIndex::new(&mu).expect("probability vector").sample(&mut rng),
            };
            let sk = sample_regime_path_with(&spec, cfg.horizon, start, &mut rng)?;
            exact_path(&regime_params(&spec), &sk, cfg.x0, &grid, &mut rng)
        }
        None => {
            let sd = model.as_state_dependent();
            let (v, l, _) = euler_path(&sd, cfg.x0, cfg.initial_regime.unwrap_or(0), &grid, 1, &mut rng)?;
            (v, l)
        }
    };
    let mut out = Vec::with_capacity(fs.len());
    for f in fs {
        let ys: Vec<f64> = values.iter().zip(&regimes).map(|(&v, &l)| f(v, l)).collect();
        if let Some(k) = ys.iter().position(|y| !y.is_finite()) {
            return Err(Error::Contract(format!("functional is not finite at t = {}", grid[k])));
        }
        let (mut acc, mut weight) = (0.0, 0.0);
        for k in 1..grid.len() {
            let h = grid[k] - grid[k - 1];
            acc += 0.5 * h * (ys[k] + ys[k - 1]);
            weight += 0.5 * h * 2.0;
        }
        out.push(acc / weight);
    }
    Ok(out)
}

pub fn ergodic_average(model: &Model, f: &dyn Fn(f64, usize) -> f64, cfg: &ErgodicConfig) -> Result<f64> {
    Ok(ergodic_averages(model, &[f], cfg)?[0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRow {
    pub t: f64,
    pub mc: f64,
    pub log_mc: f64,
    pub theory: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichTable {
    pub p: f64,
    pub eta: f64,
    pub rows: Vec<SandwichRow>,
    /// Fitted slope of `ln mc` against `t`; compare with `−η_p`.
    pub slope: f64,
    /// Fitted intercept; the bracketing constants are not identified.
    pub intercept: f64,
}

impl SandwichTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mc,theory\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", fmt17(r.t), fmt17(r.mc), fmt17(r.theory)));
        }
        out
    }
}

/// Monte-Carlo `E_μ[exp(−p ∫_0^t a_{Λ_s} ds)]` on `t_grid` against
/// `e^{−η_p t}`; the integral is exact on each skeleton.
pub fn eta_sandwich_check(spec: &ModelSpec, p: f64, t_grid: &[f64], n: usize, seed: u64, exec: &Exec) -> Result<SandwichTable> {
    crate::simulate::check_grid(t_grid)?;
    if n == 0 {
        return Err(Error::Precondition("need at least one path".into()));
    }
    spec.require_usable()?;
    let eta_p = eta(spec, p)?;
    let mu = invariant_measure(spec)?.mu;
    let horizon = t_grid.last().copied().expect("nonempty").max(f64::MIN_POSITIVE);
    let exponents: Vec<Vec<f64>> = exec.try_map(n, |k| {
        let mut rng = path_rng(seed, k as u64);
        let start = WeightedIndex::new(&mu).expect("probability vector").sample(&mut rng);
        let sk = sample_regime_path_with(spec, horizon, start, &mut rng)?;
        Ok(t_grid.iter().map(|&t| -p * sk.integral(spec.a(), t)).collect())
    })?;
    let rows: Vec<SandwichRow> = t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let col: Vec<f64> = exponents.iter().map(|e| e[j]).collect();
            let log_mc = log_mean_exp(&col);
            SandwichRow { t, mc: log_mc.exp(), log_mc, theory: (-eta_p * t).exp() }
        })
        .collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let ls: Vec<f64> = rows.iter().map(|r| r.log_mc).collect();
    let (slope, intercept) = if rows.len() > 1 { linear_fit(&ts, &ls) } else { (0.0, ls[0]) };
    Ok(SandwichTable { p, eta: eta_p, rows, slope, intercept })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BesselCheck {
    pub t: f64,
    pub n: usize,
    pub ks: f64,
    pub direct_mean: f64,
    pub transformed_mean: f64,
}

/// Law of `r_t` simulated directly versus through `ρ(C(t))/ℓ(t)`, the two
/// sharing each regime path.
pub fn bessel_check(spec: &ModelSpec, x0: f64, t: f64, n: usize, seed: u64, exec: &Exec) -> Result<BesselCheck> {
    spec.require_usable()?;
    spec.require_h1()?;
    if !(x0 > 0.0 && t > 0.0) || n == 0 {
        return Err(Error::Precondition("need x0 > 0, t > 0 and at least one path".into()));
    }
    let mu = invariant_measure(spec)?.mu;
    let params = regime_params(spec);
    let pairs: Vec<(f64, f64)> = exec.try_map(n, |k| {
        let mut rng = path_rng(seed, k as u64);
        let start = WeightedIndex::new(&mu).expect("probability vector").sample(&mut rng);
        let sk = sample_regime_path_with(spec, t, start, &mut rng)?;
        let direct = exact_path(&params, &sk, x0, &[t], &mut rng).0[0];
        let via = simulate_rho_on(spec, &sk, x0, &[t], &mut rng)[0];
        Ok((direct, via))
    })?;
    let (direct, via): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(BesselCheck { t, n, ks: ks_distance(&direct, &via)?, direct_mean: mean(&direct), transformed_mean: mean(&via) })
}
