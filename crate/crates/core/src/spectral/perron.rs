use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::ModelSpec;

pub const PERRON_REL_TOL: f64 = 1e-12;
pub const PERRON_MAX_ITER: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct PerronRoot {
    pub rho: f64,
    /// Positive eigenvector, unit sum.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Spectral radius of an irreducible nonnegative matrix with positive diagonal.
///
/// Stops when the Collatz–Wielandt bounds `min_i (Bx)_i/x_i ≤ ρ ≤ max_i (Bx)_i/x_i`
/// agree to relative tolerance `rel_tol`.
pub fn perron_root(b: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> Result<PerronRoot> {
    let n = b.nrows();
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    for it in 1..=max_iter {
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += b[(i, j)] * x[j];
            }
            y[i] = acc;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Numeric { msg: "power iteration produced non-finite ratios".into(), last_iterate: x });
        }
        let total: f64 = y.iter().sum();
        for i in 0..n {
            x[i] = y[i] / total;
        }
        if hi - lo <= rel_tol * hi {
            return Ok(PerronRoot { rho: 0.5 * (lo + hi), vector: x, iterations: it });
        }
    }
    Err(Error::Numeric { msg: format!("power iteration did not converge in {max_iter} iterations"), last_iterate: x })
}

/// `η` of an arbitrary Metzler matrix `m` (nonnegative off-diagonals):
/// minus its rightmost eigenvalue.
pub fn eta_matrix(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let diag_max = (0..n).map(|i| -m[(i, i)]).fold(0.0f64, f64::max);
    let shift = diag_max + 1.0;
    let mut b = m.clone();
    for i in 0..n {
        b[(i, i)] += shift;
    }
    let root = perron_root(&b, PERRON_REL_TOL, PERRON_MAX_ITER)?;
    Ok(shift - root.rho)
}

/// `η_p` for `Q_p = Q − p·diag(a)`.
pub fn eta(spec: &ModelSpec, p: f64) -> Result<f64> {
    let n = spec.n_regimes();
    let q = spec.q();
    let a = spec.a();
    // s = max(p a_i)^+ + max|q_ii| (+1 keeps the shifted diagonal positive)
    let pa_max = a.iter().map(|&ai| p * ai).fold(0.0f64, f64::max);
    let qd_max = (0..n).map(|i| q[(i, i)].abs()).fold(0.0f64, f64::max);
    let shift = pa_max + qd_max + 1.0;
    let mut b = q.clone();
    for i in 0..n {
        b[(i, i)] += shift - p * a[i];
    }
    let root = perron_root(&b, PERRON_REL_TOL, PERRON_MAX_ITER)?;
    Ok(shift - root.rho)
}

/// `η̃₁`: `η` of `Q − diag(−a) = Q + diag(a)`.
pub fn eta_tilde_1(spec: &ModelSpec) -> Result<f64> {
    let flipped = spec.with_a(spec.a().iter().map(|v| -v).collect())?;
    eta(&flipped, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(a: &[f64], q: &[&[f64]]) -> ModelSpec {
        let n = a.len();
        ModelSpec::from_rows(a, &vec![1.0; n], &vec![1.0; n], q).unwrap()
    }

    const SYM: [&[f64]; 2] = [&[-1.0, 1.0], &[1.0, -1.0]];

    #[test]
    fn eta_at_zero_vanishes() {
        let m = model(&[2.0, -0.5], &SYM);
        assert_eq!(eta(&m, 0.0).unwrap(), 0.0);
        let m = model(&[1.0, 3.0, -2.0], &[&[-3.0, 1.0, 2.0], &[0.5, -0.5, 0.0], &[4.0, 1.0, -5.0]]);
        assert!(eta(&m, 0.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn heavy_reference_root_at_three_halves() {
        // (λ + 1 + 2p)(λ + 1 − p/2) = 1 has λ = 0 at p = 3/2
        let m = model(&[2.0, -0.5], &SYM);
        assert!(eta(&m, 1.5).unwrap().abs() < 1e-11);
    }

    #[test]
    fn constant_a_shifts_spectrum() {
        let m = model(&[0.7, 0.7, 0.7], &[&[-3.0, 1.0, 2.0], &[0.5, -0.5, 0.0], &[4.0, 1.0, -5.0]]);
        for p in [-2.0, 0.3, 1.0, 4.0] {
            assert!((eta(&m, p).unwrap() - 0.7 * p).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_two_state() {
        // Q_p = [[−1−2p, 1], [1, −1+p/2]]: top eigenvalue from the quadratic formula
        let m = model(&[2.0, -0.5], &SYM);
        for p in [0.25f64, 0.5, 1.0, 2.0, -1.0] {
            let (t, d) = (-2.0 - 1.5 * p, (-1.0 - 2.0 * p) * (-1.0 + 0.5 * p) - 1.0);
            let top = 0.5 * (t + (t * t - 4.0 * d).sqrt());
            assert!((eta(&m, p).unwrap() + top).abs() < 1e-11, "p={p}");
        }
    }

    #[test]
    fn eta_tilde_examples() {
        let m = model(&[2.0, -1.0], &SYM);
        let expected = -(-1.0 + 13f64.sqrt()) / 2.0;
        assert!((eta_tilde_1(&m).unwrap() - expected).abs() < 1e-11);
        let m = model(&[-1.3, -1.3], &SYM);
        assert!((eta_tilde_1(&m).unwrap() - 1.3).abs() < 1e-11);
        let m = model(&[0.0, 0.0], &SYM);
        assert!(eta_tilde_1(&m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn periodic_shift_still_converges() {
        // without the extra unit shift this is [[0,1],[1,0]]
        let m = model(&[0.0, 0.0], &SYM);
        assert_eq!(eta(&m, 0.0).unwrap(), 0.0);
        assert!(eta(&m, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn non_convergence_reports_last_iterate() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1e-9, 1e-9, 1.0 - 1e-9]);
        match perron_root(&b, 1e-15, 3) {
            Err(Error::Numeric { last_iterate, .. }) => assert_eq!(last_iterate.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
