//! Exact CIR transition.
//!
//! For `dr = (α − βr)dt + 2σ√r dW` the law of `r_{t+dt}` given `r_t = x` is
//! `c·χ²_d(λ)` with
//!
//! ```text
//! c = σ²(1 − e^{−β·dt})/β,   d = α/σ²,   λ = x·e^{−β·dt}/c,
//! ```
//!
//! sampled as `Gamma(d/2 + K, 2c)` with `K ~ Poisson(λ/2)`. A CIR regime
//! `a(b − r)dt` has `α = ab`, `β = a`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};

/// Below `|β·dt|` the scale uses `σ²·dt·(1 − β·dt/2)`.
pub const SMALL_BETA_DT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CirParams {
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl CirParams {
    /// Regime coefficients `a(b − r)dt + 2σ√r dB`.
    pub fn regime(a: f64, b: f64, sigma: f64) -> Self {
        CirParams { alpha: a * b, beta: a, sigma }
    }

    pub fn dof(&self) -> f64 {
        self.alpha / (self.sigma * self.sigma)
    }

    pub fn scale(&self, dt: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let bd = self.beta * dt;
        if bd.abs() < SMALL_BETA_DT {
            s2 * dt * (1.0 - 0.5 * bd)
        } else {
            -s2 * (-bd).exp_m1() / self.beta
        }
    }

    /// `E[r_{dt} | r_0 = x]`.
    pub fn mean(&self, x: f64, dt: f64) -> f64 {
        let c = self.scale(dt);
        c * (self.dof() + x * (-self.beta * dt).exp() / c)
    }

    /// `Var[r_{dt} | r_0 = x]`.
    pub fn variance(&self, x: f64, dt: f64) -> f64 {
        let c = self.scale(dt);
        c * c * (2.0 * self.dof() + 4.0 * x * (-self.beta * dt).exp() / c)
    }
}

/// One exact draw; parameters are assumed checked.
pub fn cir_transition<R: Rng + ?Sized>(p: &CirParams, x: f64, dt: f64, rng: &mut R) -> f64 {
    let c = p.scale(dt);
    let half_lambda = 0.5 * x * (-p.beta * dt).exp() / c;
    let k = if half_lambda > 0.0 {
        Poisson::new(half_lambda).map(|d| d.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    };
    let shape = 0.5 * p.dof() + k;
    Gamma::new(shape, 2.0 * c).expect("positive shape and scale").sample(rng)
}

/// Exact step of `dr = a(b − r)dt + 2σ√r dB` from `x` over `dt`.
pub fn exact_cir_step<R: Rng + ?Sized>(a: f64, b: f64, sigma: f64, x: f64, dt: f64, rng: &mut R) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Precondition(format!("start value must be positive, got {x}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    let p = CirParams::regime(a, b, sigma);
    if !(p.dof() >= 2.0) {
        return Err(Error::Precondition(format!(
            "degrees of freedom ab/sigma^2 = {} < 2: zero is attainable (H1 fails)",
            p.dof()
        )));
    }
    Ok(cir_transition(&p, x, dt, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::path_rng;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn moments_match_ode() {
        let (a, b, s, x, dt) = (2.0, 1.0, 1.0f64, 3.0, 0.5);
        let mut rng = path_rng(7, 0);
        let v: Vec<f64> = (0..100_000).map(|_| exact_cir_step(a, b, s, x, dt, &mut rng).unwrap()).collect();
        let (m, var) = mean_var(&v);
        let e = (-a * dt).exp();
        let m_true = b + (x - b) * e;
        assert!((m_true - 1.0 - 2.0 * (-1f64).exp()).abs() < 1e-15);
        let var_true = x * (4.0 * s * s / a) * (e - e * e) + (2.0 * b * s * s / a) * (1.0 - e).powi(2);
        let p = CirParams::regime(a, b, s);
        assert!((p.mean(x, dt) - m_true).abs() < 1e-14);
        assert!((p.variance(x, dt) - var_true).abs() < 1e-13);
        let se = (var_true / v.len() as f64).sqrt();
        assert!((m - m_true).abs() < 3.0 * se, "mean {m} vs {m_true}");
        // sample variance standard error via the fourth moment proxy 2σ⁴/(n−1)
        let se_var = var_true * (2.0 / v.len() as f64).sqrt() * 2.0;
        assert!((var - var_true).abs() < 3.0 * se_var, "var {var} vs {var_true}");
        assert!(v.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn negative_a_branch() {
        let p = CirParams::regime(-0.5, -4.0, 1.0);
        let c = p.scale(0.2);
        assert!((c - (1.0 - 0.1f64.exp()) / -0.5).abs() < 1e-15 && c > 0.0);
        let mut rng = path_rng(1, 0);
        for _ in 0..1000 {
            assert!(exact_cir_step(-0.5, -4.0, 1.0, 1.0, 0.2, &mut rng).unwrap() > 0.0);
        }
    }

    #[test]
    fn small_beta_branch_is_continuous() {
        for beta in [1e-9, -1e-9, 0.0] {
            let p = CirParams { alpha: 2.0, beta, sigma: 1.0 };
            let q = CirParams { alpha: 2.0, beta: 2e-8 * beta.signum(), sigma: 1.0 };
            assert!((p.scale(1.0) - 1.0).abs() < 2e-9);
            if beta != 0.0 {
                assert!((p.scale(1.0) - q.scale(1.0)).abs() < 1e-8);
            }
        }
        assert_eq!(CirParams { alpha: 2.0, beta: 0.0, sigma: 0.5 }.scale(2.0), 0.5);
    }

    #[test]
    fn preconditions() {
        let mut rng = path_rng(0, 0);
        assert!(matches!(exact_cir_step(1.0, 1.0, 1.0, 1.0, 0.1, &mut rng), Err(Error::Precondition(_))));
        assert!(exact_cir_step(2.0, 1.0, 1.0, 0.0, 0.1, &mut rng).is_err());
        assert!(exact_cir_step(2.0, 1.0, 1.0, 1.0, 0.0, &mut rng).is_err());
        assert!(exact_cir_step(2.0, 1.0, 1.0, 1.0, 0.1, &mut rng).is_ok());
    }

    #[test]
    fn semigroup_in_distribution() {
        let mut r1 = path_rng(3, 0);
        let mut r2 = path_rng(3, 1);
        let n = 10_000;
        let one: Vec<f64> = (0..n).map(|_| exact_cir_step(2.0, 1.0, 1.0, 1.5, 0.7, &mut r1).unwrap()).collect();
        let two: Vec<f64> = (0..n)
            .map(|_| {
                let y = exact_cir_step(2.0, 1.0, 1.0, 1.5, 0.3, &mut r2).unwrap();
                exact_cir_step(2.0, 1.0, 1.0, y, 0.4, &mut r2).unwrap()
            })
            .collect();
        assert!(crate::analyze::ks_distance(&one, &two).unwrap() < 0.023);
    }
}
