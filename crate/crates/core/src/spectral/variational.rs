use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{invariant_measure, is_reversible, InvariantMeasure, ModelSpec};

const REVERSIBILITY_TOL: f64 = 1e-10;

/// Data of the forms
///
/// ```text
/// D(f) = ½ Σ_ij μ_i q_ij (f_j − f_i)² + w Σ_i μ_i a_i f_i²,   w = 1 (D) or ½ (D̃)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticFormSpec {
    pub mu: InvariantMeasure,
    pub q: DMatrix<f64>,
    pub a: Vec<f64>,
    pub halved: bool,
}

impl QuadraticFormSpec {
    pub fn new(mu: InvariantMeasure, q: DMatrix<f64>, a: Vec<f64>, halved: bool) -> Result<Self> {
        if !is_reversible(&mu, &q, REVERSIBILITY_TOL) {
            return Err(Error::Precondition("regime chain is not reversible (detailed balance fails)".into()));
        }
        Ok(Self { mu, q, a, halved })
    }

    pub fn from_spec(spec: &ModelSpec, halved: bool) -> Result<Self> {
        Self::new(invariant_measure(spec)?, spec.q().clone(), spec.a().to_vec(), halved)
    }

    fn weight(&self) -> f64 {
        if self.halved {
            0.5
        } else {
            1.0
        }
    }

    /// Symmetric matrix `M` with `D(f) = fᵀ M f`.
    fn matrix(&self) -> DMatrix<f64> {
        let n = self.a.len();
        let mu = &self.mu.mu;
        let w = self.weight();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let dir = -mu[i] * self.q[(i, j)];
            if i == j {
                dir + w * mu[i] * self.a[i]
            } else {
                dir
            }
        });
        (&m + m.transpose()) * 0.5
    }
}

/// `D(f)` evaluated from its defining double sum.
pub fn quadratic_form(form: &QuadraticFormSpec, f: &[f64]) -> f64 {
    let n = f.len();
    let mu = &form.mu.mu;
    let mut dirichlet = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dirichlet += mu[i] * form.q[(i, j)] * (f[j] - f[i]).powi(2);
            }
        }
    }
    let potential: f64 = (0..n).map(|i| mu[i] * form.a[i] * f[i] * f[i]).sum();
    0.5 * dirichlet + form.weight() * potential
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationalEigen {
    pub lambda: f64,
    /// Minimizer with `Σ μ_i g_i² = 1`, first nonzero component positive.
    pub minimizer: Vec<f64>,
}

/// `λ₀ = inf{D(f) : ‖f‖_{L²(μ)} = 1}`: the smallest eigenvalue of the pencil
/// `(M, diag(μ))`, solved as the symmetric problem `diag(μ)^{-½} M diag(μ)^{-½}`.
///
/// The minimizer satisfies `Qg(i) − w a_i g_i = −λ₀ g_i`.
pub fn variational_eigenvalue(form: &QuadraticFormSpec) -> Result<VariationalEigen> {
    let n = form.a.len();
    let m = form.matrix();
    let inv_sqrt: Vec<f64> = form.mu.mu.iter().map(|v| 1.0 / v.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * m[(i, j)] * inv_sqrt[j]);
    let eig = SymmetricEigen::new(s);
    let k = eig.eigenvalues.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).map(|(k, _)| k).unwrap();
    let lambda = eig.eigenvalues[k];
    let mut g: Vec<f64> = (0..n).map(|i| inv_sqrt[i] * eig.eigenvectors[(i, k)]).collect();
    let norm = g.iter().zip(&form.mu.mu).map(|(gi, mi)| mi * gi * gi).sum::<f64>().sqrt();
    let scale = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let sign = g.iter().find(|v| v.abs() > 1e-12 * scale).map_or(1.0, |v| v.signum());
    for v in g.iter_mut() {
        *v *= sign / norm;
    }
    Ok(VariationalEigen { lambda, minimizer: g })
}

/// Reversible chain on a countable state space, accessed by index.
pub trait CountableChain {
    /// `q_ij` for `i ≠ j`.
    fn rate(&self, i: usize, j: usize) -> f64;
    /// `−q_ii`, including rates to states beyond any truncation.
    fn exit_rate(&self, i: usize) -> f64;
    fn a(&self, i: usize) -> f64;
    /// Invariant probability of state `i`.
    fn mu(&self, i: usize) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationLevel {
    pub n_states: usize,
    pub lambda: f64,
    /// Change from the previous level (`NaN` for the first).
    pub delta: f64,
    /// `min_i |g_i|` over the truncation; a proxy for the requirement that
    /// the minimizer stays away from zero at infinity.
    pub min_abs_minimizer: f64,
}

/// `λ₀` (or `λ̃₀`) on truncations to the first `2^k` states, `k = 1..=k_max`,
/// with killing at the boundary: the exit rate keeps the mass sent beyond
/// the truncation, which is the form restricted to `f` vanishing outside.
///
/// Convergence is only monitored through `delta`; there is no error bound.
pub fn truncated_eigenvalues(chain: &dyn CountableChain, k_max: u32, halved: bool) -> Result<Vec<TruncationLevel>> {
    let mut out: Vec<TruncationLevel> = Vec::new();
    for k in 1..=k_max {
        let n = 1usize << k;
        let mu: Vec<f64> = (0..n).map(|i| chain.mu(i)).collect();
        let q = DMatrix::from_fn(n, n, |i, j| if i == j { -chain.exit_rate(i) } else { chain.rate(i, j) });
        let a = (0..n).map(|i| chain.a(i)).collect();
        let form = QuadraticFormSpec::new(InvariantMeasure { mu }, q, a, halved)?;
        let eig = variational_eigenvalue(&form)?;
        let delta = out.last().map_or(f64::NAN, |prev| eig.lambda - prev.lambda);
        let min_abs_minimizer = eig.minimizer.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        out.push(TruncationLevel { n_states: n, lambda: eig.lambda, delta, min_abs_minimizer });
    }
    Ok(out)
}
