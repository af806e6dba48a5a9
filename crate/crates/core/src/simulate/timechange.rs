//! Squared-Bessel time change.
//!
//! With `ℓ(t) = exp ∫_0^t a_{Λ_u} du`, `C(t) = ∫_0^t ℓ(s) ds` and
//! `A = C^{-1}`, the process `ρ_s = ℓ(A(s))·r_{A(s)}` solves
//! `dρ = a b ds + 2σ√ρ dW` with regime `Λ_{A(s)}`, and
//! `r_t = ρ(C(t))/ℓ(t)`. All three maps are closed form on each holding
//! interval.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

use super::cir::CirParams;
use super::paths::exact_path;
use super::skeleton::RegimeSkeleton;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeChange {
    /// Interval starts `0 = τ_0 < τ_1 < …`.
    pub starts: Vec<f64>,
    /// `a` of the regime held on each interval.
    pub rates: Vec<f64>,
    /// `ℓ(τ_k)`.
    pub ell_start: Vec<f64>,
    /// `C(τ_k)`.
    pub c_start: Vec<f64>,
}

/// `(e^{a·dt} − 1)/a`, `dt` at `a = 0`.
fn exp_integral(a: f64, dt: f64) -> f64 {
    if a == 0.0 {
        dt
    } else {
        (a * dt).exp_m1() / a
    }
}

impl TimeChange {
    fn interval(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn ell(&self, t: f64) -> f64 {
        let k = self.interval(t);
        self.ell_start[k] * (self.rates[k] * (t - self.starts[k])).exp()
    }

    pub fn c(&self, t: f64) -> f64 {
        let k = self.interval(t);
        self.c_start[k] + self.ell_start[k] * exp_integral(self.rates[k], t - self.starts[k])
    }

    /// `A(s) = inf{t : C(t) > s}`; infinite when `C` stays below `s`.
    pub fn inverse(&self, s: f64) -> f64 {
        let k = self.c_start.partition_point(|&c| c <= s).saturating_sub(1);
        let (a, l, c0) = (self.rates[k], self.ell_start[k], self.c_start[k]);
        let u = s - c0;
        if a == 0.0 {
            return self.starts[k] + u / l;
        }
        let arg = a * u / l;
        if arg <= -1.0 {
            return f64::INFINITY;
        }
        self.starts[k] + arg.ln_1p() / a
    }

    /// `(ℓ(t_k), C(t_k))` on a grid.
    pub fn on_grid(&self, grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (grid.iter().map(|&t| self.ell(t)).collect(), grid.iter().map(|&t| self.c(t)).collect())
    }

    /// Regime path in the new clock: jumps at `C(τ_k)`, horizon `C(T)`.
    pub fn time_changed_skeleton(&self, skeleton: &RegimeSkeleton) -> RegimeSkeleton {
        RegimeSkeleton {
            jump_times: self.c_start[1..].to_vec(),
            states: skeleton.states.clone(),
            horizon: self.c(skeleton.horizon),
        }
    }
}

pub fn bessel_time_change(spec: &ModelSpec, skeleton: &RegimeSkeleton) -> TimeChange {
    let mut starts = vec![0.0];
    starts.extend_from_slice(&skeleton.jump_times);
    let rates: Vec<f64> = skeleton.states.iter().map(|&i| spec.a()[i]).collect();
    let mut ell_start = vec![1.0];
    let mut c_start = vec![0.0];
    for k in 1..starts.len() {
        let dt = starts[k] - starts[k - 1];
        let (a, l) = (rates[k - 1], ell_start[k - 1]);
        c_start.push(c_start[k - 1] + l * exp_integral(a, dt));
        ell_start.push(l * (a * dt).exp());
    }
    TimeChange { starts, rates, ell_start, c_start }
}

/// `r(t_k) = ρ(C(t_k))/ℓ(t_k)`; `rho_at_c[k]` is `ρ` at `C(grid[k])`.
pub fn rho_to_r(tc: &TimeChange, grid: &[f64], rho_at_c: &[f64]) -> Result<Vec<f64>> {
    if grid.len() != rho_at_c.len() {
        return Err(Error::Contract(format!("grid has {} points, rho path {}", grid.len(), rho_at_c.len())));
    }
    Ok(grid.iter().zip(rho_at_c).map(|(&t, &rho)| rho / tc.ell(t)).collect())
}

/// `ρ(s_k) = ℓ(A(s_k))·r(A(s_k))`; `r_at_a[k]` is `r` at `A(s_grid[k])`.
pub fn r_to_rho(tc: &TimeChange, s_grid: &[f64], r_at_a: &[f64]) -> Result<Vec<f64>> {
    if s_grid.len() != r_at_a.len() {
        return Err(Error::Contract(format!("grid has {} points, r path {}", s_grid.len(), r_at_a.len())));
    }
    Ok(s_grid.iter().zip(r_at_a).map(|(&s, &r)| tc.ell(tc.inverse(s)) * r).collect())
}

/// `r` on `grid` through an exact simulation of `ρ` on the shared skeleton.
pub fn simulate_rho_on<R: Rng + ?Sized>(
    spec: &ModelSpec,
    skeleton: &RegimeSkeleton,
    x0: f64,
    grid: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let tc = bessel_time_change(spec, skeleton);
    let params: Vec<CirParams> = (0..spec.n_regimes())
        .map(|i| CirParams { alpha: spec.a()[i] * spec.b()[i], beta: 0.0, sigma: spec.sigma()[i] })
        .collect();
    let (ell, c) = tc.on_grid(grid);
    let (rho, _) = exact_path(&params, &tc.time_changed_skeleton(skeleton), x0, &c, rng);
    rho.iter().zip(&ell).map(|(p, l)| p / l).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{path_rng, regime_params, sample_regime_path_with};
    use proptest::prelude::*;

    const SYM: [&[f64]; 2] = [&[-1.0, 1.0], &[1.0, -1.0]];

    #[test]
    fn zero_a_is_identity() {
        let spec = ModelSpec::from_rows(&[0.0, 0.0], &[1.0, 1.0], &[1.0, 1.0], &SYM).unwrap();
        let sk = RegimeSkeleton { jump_times: vec![0.3, 1.1], states: vec![0, 1, 0], horizon: 2.0 };
        let tc = bessel_time_change(&spec, &sk);
        for t in [0.0, 0.2, 0.3, 1.5, 2.0] {
            assert_eq!(tc.ell(t), 1.0);
            assert!((tc.c(t) - t).abs() < 1e-15);
            assert!((tc.inverse(t) - t).abs() < 1e-15);
        }
        assert_eq!(rho_to_r(&tc, &[0.5, 1.0], &[2.0, 3.0]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn single_regime_closed_form() {
        let spec = ModelSpec::from_rows(&[2.0], &[1.0], &[1.0], &[&[0.0]]).unwrap();
        let tc = bessel_time_change(&spec, &RegimeSkeleton::constant(0, 1.0));
        let e2 = 2f64.exp();
        assert!((tc.ell(1.0) - e2).abs() < 1e-14 * e2);
        assert!((tc.c(1.0) - (e2 - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn negative_rate_saturates() {
        let spec = ModelSpec::from_rows(&[-1.0], &[-4.0], &[1.0], &[&[0.0]]).unwrap();
        let tc = bessel_time_change(&spec, &RegimeSkeleton::constant(0, 1.0));
        assert!((tc.c(50.0) - 1.0).abs() < 1e-15);
        assert_eq!(tc.inverse(1.5), f64::INFINITY);
    }

    #[test]
    fn mismatched_lengths() {
        let spec = ModelSpec::from_rows(&[2.0], &[1.0], &[1.0], &[&[0.0]]).unwrap();
        let tc = bessel_time_change(&spec, &RegimeSkeleton::constant(0, 1.0));
        assert!(matches!(rho_to_r(&tc, &[0.5], &[1.0, 2.0]), Err(Error::Contract(_))));
        assert!(matches!(r_to_rho(&tc, &[0.5, 0.6], &[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn transforms_invert_each_other() {
        let spec = ModelSpec::from_rows(&[2.0, -0.5], &[1.0, -4.0], &[1.0, 1.0], &SYM).unwrap();
        let mut rng = path_rng(12, 0);
        let sk = sample_regime_path_with(&spec, 3.0, 0, &mut rng).unwrap();
        let tc = bessel_time_change(&spec, &sk);
        let grid: Vec<f64> = (0..=30).map(|k| 0.1 * k as f64).collect();
        let r: Vec<f64> = grid.iter().map(|t| 1.0 + t).collect();
        let (_, c) = tc.on_grid(&grid);
        let rho = r_to_rho(&tc, &c, &r).unwrap();
        let back = rho_to_r(&tc, &grid, &rho).unwrap();
        for (x, y) in r.iter().zip(&back) {
            assert!((x - y).abs() < 1e-10 * x);
        }
    }

    #[test]
    fn transformed_law_matches_direct() {
        let spec = ModelSpec::from_rows(&[2.0, -0.5], &[1.0, -4.0], &[1.0, 1.0], &SYM).unwrap();
        let params = regime_params(&spec);
        let n = 10_000;
        let t = 1.5;
        let (mut direct, mut via) = (Vec::new(), Vec::new());
        for p in 0..n {
            let mut rng = path_rng(21, p);
            let sk = sample_regime_path_with(&spec, t, (p % 2) as usize, &mut rng).unwrap();
            direct.push(exact_path(&params, &sk, 1.0, &[t], &mut rng).0[0]);
            via.push(simulate_rho_on(&spec, &sk, 1.0, &[t], &mut rng)[0]);
        }
        let ks = crate::analyze::ks_distance(&direct, &via).unwrap();
        assert!(ks < 0.023, "{ks}");
    }

    proptest! {
        #[test]
        fn inverse_round_trip(seed in 0u64..500, a1 in -3.0f64..3.0, a2 in -3.0f64..3.0) {
            let spec = ModelSpec::from_rows(&[a1, a2], &[1.0, 1.0], &[1.0, 1.0], &SYM).unwrap();
            let mut rng = path_rng(seed, 0);
            let sk = sample_regime_path_with(&spec, 4.0, 0, &mut rng).unwrap();
            let tc = bessel_time_change(&spec, &sk);
            prop_assert_eq!(tc.ell(0.0), 1.0);
            let mut prev = -1.0;
            for k in 0..=40 {
                let t = 0.1 * k as f64;
                let c = tc.c(t);
                prop_assert!(c > prev);
                prev = c;
                prop_assert!((tc.inverse(c) - t).abs() < 1e-10);
            }
        }
    }
}
