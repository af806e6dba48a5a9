//! Regime-chain trajectories.

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{invariant_measure, ModelSpec, StateDepModel};

use super::{fmt17, path_rng};

/// Jump times `τ_1 < τ_2 < …` (with `τ_0 = 0` implicit) and the regime held
/// on each interval: `states[k]` on `[τ_k, τ_{k+1})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeSkeleton {
    pub jump_times: Vec<f64>,
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl RegimeSkeleton {
    pub fn constant(state: usize, horizon: f64) -> Self {
        RegimeSkeleton { jump_times: Vec::new(), states: vec![state], horizon }
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// Right-continuous regime at `t`; the last state persists past the horizon.
    pub fn state_at(&self, t: f64) -> usize {
        self.states[self.jump_times.partition_point(|&tau| tau <= t)]
    }

    pub fn final_state(&self) -> usize {
        *self.states.last().expect("nonempty")
    }

    /// `(start, end, state)` for every holding interval within `[0, horizon]`.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        (0..self.states.len()).map(move |k| {
            let start = if k == 0 { 0.0 } else { self.jump_times[k - 1] };
            let end = self.jump_times.get(k).copied().unwrap_or(self.horizon);
            (start, end, self.states[k])
        })
    }

    /// Fraction of `[0, horizon]` spent in each of `n` regimes.
    pub fn occupation(&self, n: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n];
        for (s, e, i) in self.intervals() {
            occ[i] += e - s;
        }
        occ.iter().map(|v| v / self.horizon).collect()
    }

    /// `∫_0^t f(Λ_u) du` for a per-regime coefficient, exact.
    pub fn integral(&self, f: &[f64], t: f64) -> f64 {
        let mut acc = 0.0;
        for (s, e, i) in self.intervals() {
            if s >= t {
                break;
            }
            acc += f[i] * (e.min(t) - s);
        }
        let last_end = self.jump_times.last().copied().unwrap_or(0.0).max(self.horizon);
        if t > last_end {
            acc += f[self.final_state()] * (t - last_end);
        }
        acc
    }

    /// CSV `k,tau_k,state` with one-based states; row `k = 0` is time 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,tau_k,state\n");
        for (k, (s, _, i)) in self.intervals().enumerate() {
            out.push_str(&format!("{k},{},{}\n", fmt17(s), i + 1));
        }
        out
    }
}

/// Counters of the thinning sampler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ThinningStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl ThinningStats {
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Precondition(format!("horizon must be positive and finite, got {horizon}")));
    }
    Ok(())
}

fn draw_initial<R: Rng + ?Sized>(law: &[f64], rng: &mut R) -> Result<usize> {
    let w = WeightedIndex::new(law).map_err(|e| Error::Precondition(format!("initial law: {e}")))?;
    Ok(w.sample(rng))
}

/// Initial law: `None` means the invariant measure.
pub(crate) fn initial_law(spec: &ModelSpec, initial: Option<&[f64]>) -> Result<Vec<f64>> {
    match initial {
        Some(l) if l.len() != spec.n_regimes() => {
            Err(Error::Precondition(format!("initial law has {} entries, model has {} regimes", l.len(), spec.n_regimes())))
        }
        Some(l) => Ok(l.to_vec()),
        None => Ok(invariant_measure(spec)?.mu),
    }
}

/// Regime path on `[0, horizon]` from master seed `seed` (stream 0).
pub fn sample_regime_path(spec: &ModelSpec, horizon: f64, initial: Option<&[f64]>, seed: u64) -> Result<RegimeSkeleton> {
    let law = initial_law(spec, initial)?;
    let mut rng = path_rng(seed, 0);
    let start = draw_initial(&law, &mut rng)?;
    sample_regime_path_with(spec, horizon, start, &mut rng)
}

/// Regime path from a fixed initial state using the caller's RNG.
pub fn sample_regime_path_with<R: Rng + ?Sized>(
    spec: &ModelSpec,
    horizon: f64,
    start: usize,
    rng: &mut R,
) -> Result<RegimeSkeleton> {
    check_horizon(horizon)?;
    let n = spec.n_regimes();
    if start >= n {
        return Err(Error::Precondition(format!("initial regime {start} out of range")));
    }
    if n == 1 {
        return Ok(RegimeSkeleton::constant(0, horizon));
    }
    let q = spec.q();
    let mut jump_times = Vec::new();
    let mut states = vec![start];
    let mut t = 0.0;
    let mut i = start;
    loop {
        let rate = -q[(i, i)];
        if !(rate > 0.0) {
            return Err(Error::Model(format!("regime {} is absorbing (q_ii = 0)", i + 1)));
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t >= horizon {
            break;
        }
        let targets: Vec<f64> = (0..n).map(|j| if j == i { 0.0 } else { q[(i, j)].max(0.0) }).collect();
        i = WeightedIndex::new(&targets).expect("positive exit rate").sample(rng);
        jump_times.push(t);
        states.push(i);
    }
    Ok(RegimeSkeleton { jump_times, states, horizon })
}

/// Regime path for rate-level dependent switching by thinning.
///
/// Proposals arrive at the dominating rate `M_i = Σ_j sup_x q_ij(x)`; at a
/// proposal time `t` the callback supplies `r_t` and the chain moves to `j`
/// with probability `q_ij(r_t)/M_i`.
pub fn sample_regime_path_state_dep<R, F>(
    sd: &StateDepModel,
    mut r_at: F,
    horizon: f64,
    start: usize,
    rng: &mut R,
) -> Result<(RegimeSkeleton, ThinningStats)>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    check_horizon(horizon)?;
    let n = sd.n_regimes();
    if start >= n {
        return Err(Error::Precondition(format!("initial regime {start} out of range")));
    }
    let mut stats = ThinningStats::default();
    if n == 1 {
        return Ok((RegimeSkeleton::constant(0, horizon), stats));
    }
    let mut jump_times = Vec::new();
    let mut states = vec![start];
    let mut t = 0.0;
    let mut i = start;
    loop {
        let m = sd.dominating_rate(i);
        if !(m > 0.0) {
            return Err(Error::Model(format!("regime {} is absorbing (all rates vanish)", i + 1)));
        }
        t += Exp::new(m).expect("positive rate").sample(rng);
        if t >= horizon {
            break;
        }
        let r = r_at(t);
        if !(r > 0.0) {
            return Err(Error::Contract(format!("rate callback returned r = {r} at t = {t}")));
        }
        stats.proposed += 1;
        if let Some(j) = thin_target(sd, i, r, m, rng) {
            stats.accepted += 1;
            i = j;
            jump_times.push(t);
            states.push(i);
        }
    }
    Ok((RegimeSkeleton { jump_times, states, horizon }, stats))
}

/// Target of one proposal from `i` at level `r`, `None` for a rejection.
pub(crate) fn thin_target<R: Rng + ?Sized>(sd: &StateDepModel, i: usize, r: f64, m: f64, rng: &mut R) -> Option<usize> {
    let mut u = rng.random::<f64>() * m;
    for j in (0..sd.n_regimes()).filter(|&j| j != i) {
        let q = sd.rate(i, j, r);
        if u < q {
            return Some(j);
        }
        u -= q;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RateFn;

    const SYM: [&[f64]; 2] = [&[-1.0, 1.0], &[1.0, -1.0]];

    fn spec(q: &[&[f64]]) -> ModelSpec {
        let n = q.len();
        ModelSpec::from_rows(&vec![2.0; n], &vec![1.0; n], &vec![1.0; n], q).unwrap()
    }

    #[test]
    fn tiny_rates_rarely_jump() {
        let s = spec(&[&[-1e-9, 1e-9], &[1e-9, -1e-9]]);
        let jumps: usize = (0..1000).map(|k| sample_regime_path(&s, 1.0, None, k).unwrap().n_jumps()).sum();
        assert_eq!(jumps, 0);
    }

    #[test]
    fn unit_chain_jump_count() {
        let s = spec(&SYM);
        let t = 50.0;
        let counts: Vec<f64> = (0..2000).map(|k| sample_regime_path(&s, t, None, k).unwrap().n_jumps() as f64).collect();
        let m = counts.iter().sum::<f64>() / counts.len() as f64;
        // Poisson(T): standard error √(T/n)
        assert!((m - t).abs() < 3.0 * (t / counts.len() as f64).sqrt(), "{m}");
    }

    #[test]
    fn occupation_matches_mu() {
        let s = spec(&[&[-2.0, 2.0], &[1.0, -1.0]]);
        let sk = sample_regime_path(&s, 1e4, None, 11).unwrap();
        let occ = sk.occupation(2);
        assert!((occ[0] - 1.0 / 3.0).abs() < 0.01 && (occ[1] - 2.0 / 3.0).abs() < 0.01, "{occ:?}");
        assert!(sk.states.windows(2).all(|w| w[0] != w[1]));
        assert!(sk.jump_times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn marginal_matches_matrix_exponential() {
        // P(Λ_T = 1 | Λ_0 = 0) for rates (2, 1): (2/3)(1 − e^{−3T})
        let s = spec(&[&[-2.0, 2.0], &[1.0, -1.0]]);
        let t = 0.4;
        let n = 10_000;
        let mut rng = path_rng(5, 0);
        let hits = (0..n).filter(|_| sample_regime_path_with(&s, t, 0, &mut rng).unwrap().final_state() == 1).count();
        let p = 2.0 / 3.0 * (1.0 - (-3.0 * t).exp());
        assert!((hits as f64 / n as f64 - p).abs() < 0.02);
    }

    #[test]
    fn absorbing_state_is_an_error() {
        let q = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, -1.0]);
        let s = ModelSpec::new(vec![2.0; 2], vec![1.0; 2], vec![1.0; 2], q).unwrap();
        let mut rng = path_rng(0, 0);
        assert!(matches!(sample_regime_path_with(&s, 1.0, 0, &mut rng), Err(Error::Model(_))));
    }

    #[test]
    fn single_regime_has_no_jumps() {
        let s = ModelSpec::from_rows(&[2.0], &[1.0], &[1.0], &[&[0.0]]).unwrap();
        let sk = sample_regime_path(&s, 5.0, None, 0).unwrap();
        assert_eq!(sk.n_jumps(), 0);
        assert_eq!(sk.integral(&[2.0], 5.0), 10.0);
    }

    #[test]
    fn integral_and_lookup() {
        let sk = RegimeSkeleton { jump_times: vec![1.0, 2.5], states: vec![0, 1, 0], horizon: 4.0 };
        assert_eq!(sk.state_at(0.0), 0);
        assert_eq!(sk.state_at(1.0), 1);
        assert_eq!(sk.state_at(3.0), 0);
        assert_eq!(sk.integral(&[1.0, -2.0], 4.0), 1.0 - 3.0 + 1.5);
        assert_eq!(sk.integral(&[1.0, -2.0], 5.0), 1.0 - 3.0 + 2.5);
        assert_eq!(sk.to_csv().lines().nth(2).unwrap(), "1,1.0000000000000000e0,2");
    }

    #[test]
    fn constant_rates_thinning_matches_direct() {
        let s = spec(&[&[-2.0, 2.0], &[1.0, -1.0]]);
        let sd = StateDepModel::new(s.clone(), []).unwrap();
        let mut r1 = path_rng(8, 0);
        let mut r2 = path_rng(8, 1);
        let n = 4000;
        let direct: Vec<f64> = (0..n).map(|_| sample_regime_path_with(&s, 3.0, 0, &mut r1).unwrap().n_jumps() as f64).collect();
        let mut acc = 1.0f64;
        let thin: Vec<f64> = (0..n)
            .map(|_| {
                let (sk, st) = sample_regime_path_state_dep(&sd, |_| 1.0, 3.0, 0, &mut r2).unwrap();
                acc = acc.min(st.acceptance());
                sk.n_jumps() as f64
            })
            .collect();
        assert_eq!(acc, 1.0);
        let md = direct.iter().sum::<f64>() / n as f64;
        let mt = thin.iter().sum::<f64>() / n as f64;
        assert!((md - mt).abs() < 0.15, "{md} vs {mt}");
    }

    #[test]
    fn zero_channel_never_used_and_acceptance_bounds() {
        let base = spec(&[&[-1.0, 0.5, 0.5], &[1.0, -2.0, 1.0], &[1.0, 1.0, -2.0]]);
        let sd = StateDepModel::new(base, [((0, 1), RateFn::Constant { rate: 0.0 })]).unwrap();
        let mut rng = path_rng(2, 0);
        let (sk, _) = sample_regime_path_state_dep(&sd, |_| 1.0, 500.0, 0, &mut rng).unwrap();
        assert!(sk.states.windows(2).all(|w| !(w[0] == 0 && w[1] == 1)));

        let sd = StateDepModel::new(
            spec(&SYM),
            [((0, 1), RateFn::Logistic { low: 1.0, high: 3.0, steepness: 1.0 })],
        )
        .unwrap();
        let (_, st) = sample_regime_path_state_dep(&sd, |t| 0.1 + (t * 0.37).sin().abs() * 5.0, 2000.0, 0, &mut rng).unwrap();
        assert!(st.acceptance() >= 1.0 / 3.0 && st.acceptance() <= 1.0);
        assert!(st.acceptance() < 1.0);
    }

    #[test]
    fn nonpositive_callback_is_contract_error() {
        let sd = StateDepModel::new(spec(&SYM), []).unwrap();
        let mut rng = path_rng(0, 0);
        assert!(matches!(sample_regime_path_state_dep(&sd, |_| 0.0, 100.0, 0, &mut rng), Err(Error::Contract(_))));
    }
}
