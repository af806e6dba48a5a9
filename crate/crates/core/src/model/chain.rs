use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

use super::spec::ModelSpec;

/// Stationary law of the regime chain: `μQ = 0`, `Σμ = 1`, `μ > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantMeasure {
    pub mu: Vec<f64>,
}

impl InvariantMeasure {
    /// `‖μQ‖_∞`.
    pub fn residual(&self, q: &DMatrix<f64>) -> f64 {
        let n = self.mu.len();
        (0..n)
            .map(|j| (0..n).map(|i| self.mu[i] * q[(i, j)]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.mu.iter().zip(f).map(|(m, v)| m * v).sum()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { mu: perm.iter().map(|&k| self.mu[k]).collect() }
    }
}

/// Strong connectivity of the graph with an edge `i → j` whenever `q_ij > 0`.
pub fn is_irreducible(q: &DMatrix<f64>) -> bool {
    let n = q.nrows();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { q[(i, j)] } else { q[(j, i)] };
                if i != j && w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Solves `μQ = 0, Σμ = 1` as the overdetermined system `[Qᵀ; 1ᵀ] μ = e_{N+1}`.
pub fn invariant_measure(spec: &ModelSpec) -> Result<InvariantMeasure> {
    let q = spec.q();
    let n = q.nrows();
    if n == 1 {
        return Ok(InvariantMeasure { mu: vec![1.0] });
    }

    let scale = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::DegenerateChain("rate matrix is identically zero".into()));
    }
    let sv = q.clone().svd(false, false).singular_values;
    let tol = 1e-12 * (n as f64) * scale;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    if rank < n - 1 {
        return Err(Error::DegenerateChain(format!("rate matrix has numerical rank {rank} < N-1 = {}", n - 1)));
    }

    let mut sys = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            sys[(i, j)] = q[(j, i)] / scale;
        }
        sys[(n, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;

    let svd = sys.clone().svd(true, true);
    let mut mu = svd.solve(&rhs, 1e-14).map_err(|e| Error::DegenerateChain(e.to_string()))?;
    // one step of iterative refinement
    let r = &rhs - &sys * &mu;
    if let Ok(d) = svd.solve(&r, 1e-14) {
        mu += d;
    }

    let total: f64 = mu.iter().sum();
    let mu: Vec<f64> = mu.iter().map(|v| v / total).collect();
    if let Some(i) = mu.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateChain(format!("invariant measure has nonpositive mass {} at regime {}", mu[i], i + 1)));
    }
    Ok(InvariantMeasure { mu })
}

/// `Σ μ_i a_i`; its sign decides recurrence vs. transience.
pub fn drift_index(spec: &ModelSpec) -> Result<f64> {
    Ok(invariant_measure(spec)?.expectation(spec.a()))
}

/// Detailed balance `μ_i q_ij = μ_j q_ji` within `tol`.
pub fn is_reversible(mu: &InvariantMeasure, q: &DMatrix<f64>, tol: f64) -> bool {
    let n = q.nrows();
    (0..n).all(|i| (0..i).all(|j| (mu.mu[i] * q[(i, j)] - mu.mu[j] * q[(j, i)]).abs() <= tol))
}
