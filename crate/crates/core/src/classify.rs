//! Recurrence and tail verdicts.
//!
//! * Constant switching rates: the sign of the drift index `Σ μ_i a_i`
//!   decides positive recurrence (> 0) or transience (< 0).
//! * Rate-level dependent switching: an auxiliary chain `Q̃` built from the
//!   rate bounds is combined with a power `p`; a non-singular M-matrix
//!   `−(Q̃ − (p/2)·diag(a))·H` for some `p > 0` (resp. `p < 0`) certifies
//!   positive recurrence (resp. transience). The criterion is only sufficient.
//! * Tails: `a_min > 0` gives a finite exponential moment for every
//!   `δ < 1/(2α)`, `α = max σ_i²/a_i`; `a_min < 0` gives finite `p`-th
//!   moments exactly for `p < κ` (for `κ ≤ 1` only under `a_i b_i ≥ 4σ_i²`
//!   and `η̃₁ > 0`).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{bound_matrix, drift_index, invariant_measure, ModelSpec, StateDepModel};
use crate::spectral::{eta_tilde_1, kappa, minors_positive, serialize_extended};

/// `|Σ μ_i a_i|` below this is treated as the (uncovered) critical case.
pub const DRIFT_TOL: f64 = 1e-12;
/// `κ > 1 + KAPPA_GUARD` routes to the `κ > 1` criterion; everything else,
/// including `κ = 1`, needs the strengthened hypotheses.
pub const KAPPA_GUARD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Recurrence {
    PositiveRecurrent,
    Transient,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Witness {
    DriftIndex(f64),
    MMatrix {
        p: f64,
        /// One-based regime labels in the order used for `Q̃`.
        ordering: Vec<usize>,
        /// Decreasing positive weights `ξ = Hη` with `Xξ > 0`, positional.
        weights: Vec<f64>,
        /// `min_i (Xξ)_i` for the normalized weights.
        margin: f64,
        /// Leading principal minors of `XH`.
        minors: Vec<f64>,
        /// Whether `XH` is a non-singular M-matrix outright.
        m_matrix: bool,
    },
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceVerdict {
    pub verdict: Recurrence,
    pub witness: Witness,
}

pub fn classify_recurrence(spec: &ModelSpec) -> Result<RecurrenceVerdict> {
    let d = drift_index(spec)?;
    let verdict = if d > DRIFT_TOL {
        Recurrence::PositiveRecurrent
    } else if d < -DRIFT_TOL {
        Recurrence::Transient
    } else {
        Recurrence::Inconclusive
    };
    Ok(RecurrenceVerdict { verdict, witness: Witness::DriftIndex(d) })
}

/// `p` grid of the M-matrix search: `ε·2^k`, `k = 0..=20`.
pub const P_SEARCH_EPS: f64 = 1e-3;
pub const P_SEARCH_MAX_EXP: i32 = 20;

/// Identity and reversed orderings.
pub fn default_orderings(n: usize) -> Vec<Vec<usize>> {
    let id: Vec<usize> = (0..n).collect();
    let rev: Vec<usize> = (0..n).rev().collect();
    if n > 1 {
        vec![id, rev]
    } else {
        vec![id]
    }
}

/// Upper-triangular all-ones matrix.
fn upper_ones(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j >= i { 1.0 } else { 0.0 })
}

/// `X = −(Q̃ − (p/2)·diag(a))`.
fn criterion_matrix(q_tilde: &DMatrix<f64>, a: &[f64], p: f64) -> DMatrix<f64> {
    let mut x = -q_tilde.clone();
    for (i, ai) in a.iter().enumerate() {
        x[(i, i)] += 0.5 * p * ai;
    }
    x
}

/// Best `η ∈ [0,1]^N` for `max_η min(min_i (XHη)_i, min_j η_j)`, with that value
/// recomputed in plain arithmetic.
fn certificate(xh: &DMatrix<f64>) -> (Vec<f64>, f64) {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let n = xh.nrows();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let t = lp.add_var(1.0, (-1.0, 1.0));
    let eta: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    for &e in &eta {
        lp.add_constraint(&[(e, 1.0), (t, -1.0)], ComparisonOp::Ge, 0.0);
    }
    for i in 0..n {
        let mut row: Vec<_> = eta.iter().enumerate().map(|(j, &e)| (e, xh[(i, j)])).collect();
        row.push((t, -1.0));
        lp.add_constraint(&row, ComparisonOp::Ge, 0.0);
    }
    let Ok(sol) = lp.solve() else {
        return (vec![0.0; n], f64::NEG_INFINITY);
    };
    let eta: Vec<f64> = eta.iter().map(|&e| sol[e]).collect();
    let value = (0..n)
        .map(|i| (0..n).map(|j| xh[(i, j)] * eta[j]).sum::<f64>())
        .chain(eta.iter().copied())
        .fold(f64::INFINITY, f64::min);
    (eta, value)
}

/// Certificate value with a relative floor: positive only when it clears
/// round-off in `XH`.
fn certified(xh: &DMatrix<f64>) -> Option<(Vec<f64>, f64)> {
    let (eta, value) = certificate(xh);
    let scale = xh.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    (value > 1e-10 * scale).then_some((eta, value))
}

/// Golden-section maximization of the certificate value on `[lo, hi]`.
fn refine(q_tilde: &DMatrix<f64>, a: &[f64], lo: f64, hi: f64) -> f64 {
    let h = upper_ones(a.len());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |p: f64| certificate(&(criterion_matrix(q_tilde, a, p) * &h)).1;
    let (mut lo, mut hi) = (lo, hi);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..40 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Searches `p` and regime orderings for a certificate.
///
/// The certificate for `p` is `η > 0` with `−(Q̃ − (p/2)·diag(a))·H·η > 0`,
/// so `V(x, i) = x^p ξ_i` with decreasing `ξ = Hη` is a Lyapunov function for
/// every rate path bracketed by `Q̃`. A non-singular M-matrix `XH` always
/// admits such `η`. `extra_orderings` (zero-based) are tried after the
/// identity and reversal.
pub fn classify_recurrence_state_dep(sd: &StateDepModel, extra_orderings: &[Vec<usize>]) -> Result<RecurrenceVerdict> {
    let n = sd.n_regimes();
    let mut orderings = default_orderings(n);
    for o in extra_orderings {
        if !orderings.contains(o) {
            orderings.push(o.clone());
        }
    }
    let bounds = orderings.iter().map(|o| bound_matrix(sd, o)).collect::<Result<Vec<_>>>()?;
    let h = upper_ones(n);

    for (sign, verdict) in [(1.0, Recurrence::PositiveRecurrent), (-1.0, Recurrence::Transient)] {
        for bm in &bounds {
            for k in 0..=P_SEARCH_MAX_EXP {
                let p = sign * P_SEARCH_EPS * 2f64.powi(k);
                let Some(found) = certified(&(criterion_matrix(&bm.q_tilde, &bm.a, p) * &h)) else {
                    continue;
                };
                let (lo, hi) = if p > 0.0 { (p / 2.0, p * 2.0) } else { (p * 2.0, p / 2.0) };
                let refined = refine(&bm.q_tilde, &bm.a, lo, hi);
                let (p, (eta, _)) = match certified(&(criterion_matrix(&bm.q_tilde, &bm.a, refined) * &h)) {
                    Some(better) if better.1 > found.1 => (refined, better),
                    _ => (p, found),
                };
                let x = criterion_matrix(&bm.q_tilde, &bm.a, p);
                let xh = &x * &h;
                let weights: Vec<f64> = (0..n).map(|i| eta[i..].iter().sum()).collect();
                let top = weights[0];
                let weights: Vec<f64> = weights.iter().map(|w| w / top).collect();
                let margin = (0..n)
                    .map(|i| (0..n).map(|j| x[(i, j)] * weights[j]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                let (minors_ok, minors, _) = minors_positive(&xh);
                let z = (0..n).all(|i| (0..n).all(|j| i == j || xh[(i, j)] <= 0.0));
                return Ok(RecurrenceVerdict {
                    verdict,
                    witness: Witness::MMatrix {
                        p,
                        ordering: bm.ordering.iter().map(|k| k + 1).collect(),
                        weights,
                        margin,
                        minors,
                        m_matrix: z && minors_ok,
                    },
                });
            }
        }
    }
    Ok(RecurrenceVerdict { verdict: Recurrence::Inconclusive, witness: Witness::None })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Tail {
    LightTailed { delta_max: f64 },
    HeavyTailed { kappa: f64 },
    Inconclusive { reason: String },
}

/// Which tail criterion produced the verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailCriterion {
    /// `a_min > 0`: exponential moments below `δ_max`.
    ExponentialMoment,
    /// `a_min < 0`, `κ > 1`.
    PolynomialMoments,
    /// `a_min < 0`, `κ ≤ 1`, with `a_i b_i ≥ 4σ_i²` and `η̃₁ > 0`.
    PolynomialMomentsStrong,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailVerdict {
    pub tail: Tail,
    pub criterion: TailCriterion,
    /// `max σ_i²/a_i` when `a_min > 0`.
    pub alpha: Option<f64>,
    #[serde(serialize_with = "serialize_extended")]
    pub kappa: f64,
}

pub fn classify_tail(spec: &ModelSpec) -> Result<TailVerdict> {
    let rec = classify_recurrence(spec)?;
    if rec.verdict != Recurrence::PositiveRecurrent {
        let detail = match rec.witness {
            Witness::DriftIndex(d) => format!(" with drift index {d}"),
            _ => String::new(),
        };
        return Err(Error::Contract(format!(
            "tail classification needs a positive recurrent model (sum mu_i a_i > 0), got {:?}{detail}",
            rec.verdict
        )));
    }
    spec.require_h1()?;
    let n = spec.n_regimes();
    let a_min = spec.a_min();
    let k = kappa(spec)?.kappa;

    if a_min > 0.0 {
        let alpha = (0..n).map(|i| spec.sigma()[i].powi(2) / spec.a()[i]).fold(f64::NEG_INFINITY, f64::max);
        return Ok(TailVerdict {
            tail: Tail::LightTailed { delta_max: 1.0 / (2.0 * alpha) },
            criterion: TailCriterion::ExponentialMoment,
            alpha: Some(alpha),
            kappa: k,
        });
    }
    if a_min == 0.0 {
        return Ok(TailVerdict {
            tail: Tail::Inconclusive { reason: "a_min = 0 is covered by neither tail criterion".into() },
            criterion: TailCriterion::None,
            alpha: None,
            kappa: k,
        });
    }
    if k > 1.0 + KAPPA_GUARD {
        return Ok(TailVerdict { tail: Tail::HeavyTailed { kappa: k }, criterion: TailCriterion::PolynomialMoments, alpha: None, kappa: k });
    }
    if !spec.satisfies_h1_strong() {
        return Ok(TailVerdict {
            tail: Tail::Inconclusive { reason: "kappa <= 1 requires a_i b_i >= 4 sigma_i^2 for all i (H1-strong)".into() },
            criterion: TailCriterion::None,
            alpha: None,
            kappa: k,
        });
    }
    let et = eta_tilde_1(spec)?;
    if !(et > 0.0) {
        return Ok(TailVerdict {
            tail: Tail::Inconclusive { reason: format!("kappa <= 1 requires eta_tilde_1 > 0, got {et}") },
            criterion: TailCriterion::None,
            alpha: None,
            kappa: k,
        });
    }
    Ok(TailVerdict { tail: Tail::HeavyTailed { kappa: k }, criterion: TailCriterion::PolynomialMomentsStrong, alpha: None, kappa: k })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovRow {
    pub x: f64,
    /// `L^(i) h(x)` per regime.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub p: f64,
    pub rows: Vec<LyapunovRow>,
    /// `lim L^(i)h / h = −(p/2) a_i`.
    pub asymptotic_rates: Vec<f64>,
    /// `−(p/2) Σ μ_i a_i`.
    pub weighted_rate: f64,
}

/// `L^(i) h` for `h(x) = x^p` on the square-root scale `x = √r`:
///
/// ```text
/// L^(i) h(x) = (p/2) x^p [((p−1)σ_i² + a_i b_i − σ_i²)/x² − a_i]
/// ```
pub fn lyapunov_drift_report(spec: &ModelSpec, p: f64, x_grid: &[f64]) -> Result<LyapunovReport> {
    if let Some(x) = x_grid.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Contract(format!("x grid must be positive and finite, got {x}")));
    }
    let n = spec.n_regimes();
    let rows = x_grid
        .iter()
        .map(|&x| LyapunovRow {
            x,
            values: (0..n)
                .map(|i| {
                    let (a, b, s2) = (spec.a()[i], spec.b()[i], spec.sigma()[i].powi(2));
                    0.5 * p * x.powf(p) * (((p - 1.0) * s2 + a * b - s2) / (x * x) - a)
                })
                .collect(),
        })
        .collect();
    let mu = invariant_measure(spec)?;
    Ok(LyapunovReport {
        p,
        rows,
        asymptotic_rates: spec.a().iter().map(|a| -0.5 * p * a).collect(),
        weighted_rate: -0.5 * p * mu.expectation(spec.a()),
    })
}

/// Combined recurrence and tail verdicts with the spectral summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub recurrence: Recurrence,
    pub witness: Witness,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailSummary>,
    /// Tail criterion applied, `"none"` without a tail verdict.
    pub criterion: TailCriterion,
    pub drift_index: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub kappa: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub kappa_bound: f64,
    pub eta_tilde_1: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailSummary {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<&Tail> for TailSummary {
    fn from(t: &Tail) -> Self {
        match t {
            Tail::LightTailed { delta_max } => {
                TailSummary { kind: "LightTailed", kappa: None, delta_max: Some(*delta_max), reason: None }
            }
            Tail::HeavyTailed { kappa } => TailSummary { kind: "HeavyTailed", kappa: Some(*kappa), delta_max: None, reason: None },
            Tail::Inconclusive { reason } => {
                TailSummary { kind: "Inconclusive", kappa: None, delta_max: None, reason: Some(reason.clone()) }
            }
        }
    }
}

/// Recurrence verdict, tail verdict when the model is positive recurrent
/// and satisfies H1, and `κ`, its bound, `η̃₁`.
pub fn classify(spec: &ModelSpec) -> Result<Classification> {
    let rec = classify_recurrence(spec)?;
    let k = kappa(spec)?;
    let mut notes = vec!["kappa bound reads the jump rate q_i as -q_ii".to_string()];
    let (tail, criterion) = if rec.verdict == Recurrence::PositiveRecurrent {
        if spec.satisfies_h1() {
            let t = classify_tail(spec)?;
            (Some(TailSummary::from(&t.tail)), t.criterion)
        } else {
            notes.push("tail verdict skipped: H1 fails".into());
            (None, TailCriterion::None)
        }
    } else {
        (None, TailCriterion::None)
    };
    let drift = match rec.witness {
        Witness::DriftIndex(d) => d,
        _ => unreachable!(),
    };
    Ok(Classification {
        recurrence: rec.verdict,
        witness: rec.witness,
        tail,
        criterion,
        drift_index: drift,
        kappa: k.kappa,
        kappa_bound: k.upper_bound,
        eta_tilde_1: eta_tilde_1(spec)?,
        notes,
    })
}
