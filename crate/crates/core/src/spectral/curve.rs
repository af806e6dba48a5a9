use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{drift_index, ModelSpec};

use super::perron::{eta, eta_tilde_1};
use super::serialize_extended;

/// Bisection stops once the bracket is this narrow (well inside the 1e-8 target).
const KAPPA_BRACKET_WIDTH: f64 = 1e-11;
const MAX_BRACKET_DOUBLINGS: u32 = 10;

/// `min{−q_ii / a_i : a_i < 0}`, or `+∞` when every `a_i ≥ 0`.
///
/// The bound is usually written with the total jump rate `q_i` of regime
/// `i`; here `q_i = −q_ii`.
pub fn kappa_upper_bound(spec: &ModelSpec) -> f64 {
    (0..spec.n_regimes())
        .filter(|&i| spec.a()[i] < 0.0)
        .map(|i| spec.exit_rate(i) / -spec.a()[i])
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaReport {
    #[serde(serialize_with = "serialize_extended")]
    pub kappa: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub upper_bound: f64,
    /// `Σ μ_i a_i > 0`; without it `κ` carries no tail information.
    pub drift_positive: bool,
    /// `|η_κ|` (0 when `κ` is infinite).
    pub residual: f64,
    /// Times the bracket was doubled past the bound before `η` turned negative.
    pub bracket_doublings: u32,
}

/// `κ = sup{p > 0 : η_p > 0}`.
///
/// `+∞` when `a_min ≥ 0`. Otherwise `η` is concave in `p` with `η_0 = 0`, so
/// for a positive drift index it has exactly one positive root, found by
/// bisection on `(0, p_ub]`. With a nonpositive drift index the set is empty
/// and `0` is returned with `drift_positive = false`.
pub fn kappa(spec: &ModelSpec) -> Result<KappaReport> {
    let upper_bound = kappa_upper_bound(spec);
    let drift = drift_index(spec)?;
    let drift_positive = drift > 0.0;
    if spec.a_min() >= 0.0 {
        return Ok(KappaReport { kappa: f64::INFINITY, upper_bound, drift_positive, residual: 0.0, bracket_doublings: 0 });
    }
    if !drift_positive {
        return Ok(KappaReport {
            kappa: 0.0,
            upper_bound,
            drift_positive,
            residual: 0.0,
            bracket_doublings: 0,
        });
    }

    let mut hi = upper_bound;
    let mut doublings = 0;
    while eta(spec, hi)? >= 0.0 {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::Consistency(format!(
                "eta_p stays nonnegative up to p = {hi}; no sign change above the bound {upper_bound}"
            )));
        }
        hi *= 2.0;
        doublings += 1;
    }
    let mut lo = 0.0;
    while hi - lo > KAPPA_BRACKET_WIDTH {
        let mid = 0.5 * (lo + hi);
        if eta(spec, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    Ok(KappaReport { kappa: k, upper_bound, drift_positive, residual: eta(spec, k)?.abs(), bracket_doublings: doublings })
}

/// `η_p` on a grid together with `κ`, its bound and `η̃₁`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralCurve {
    #[serde(rename = "p")]
    pub p_grid: Vec<f64>,
    pub eta: Vec<f64>,
    #[serde(serialize_with = "serialize_extended")]
    pub kappa: f64,
    #[serde(rename = "kappa_bound", serialize_with = "serialize_extended")]
    pub kappa_upper_bound: f64,
    pub eta_tilde_1: f64,
}

impl SpectralCurve {
    /// `p,eta` rows, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,eta\n");
        for (p, e) in self.p_grid.iter().zip(&self.eta) {
            out.push_str(&format!("{p:.16e},{e:.16e}\n"));
        }
        out
    }
}

pub fn spectral_curve(spec: &ModelSpec, p_grid: &[f64]) -> Result<SpectralCurve> {
    if p_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("p grid must be strictly increasing".into()));
    }
    let eta_values = p_grid.iter().map(|&p| eta(spec, p)).collect::<Result<Vec<_>>>()?;
    let k = kappa(spec)?;
    Ok(SpectralCurve {
        p_grid: p_grid.to_vec(),
        eta: eta_values,
        kappa: k.kappa,
        kappa_upper_bound: k.upper_bound,
        eta_tilde_1: eta_tilde_1(spec)?,
    })
}
