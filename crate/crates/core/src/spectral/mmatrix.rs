use nalgebra::DMatrix;
use serde::Serialize;

/// Relative threshold below which a minor counts as zero, measured against
/// Hadamard's bound `Π ‖row_i‖` for the block.
const MINOR_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MMatrixDiagnostics {
    pub is_nonsingular_m: bool,
    /// Off-diagonals all `≤ 0`.
    pub sign_pattern: bool,
    /// First positive off-diagonal entry (zero-based), if any.
    pub offending_entry: Option<(usize, usize)>,
    /// Leading principal minors `Δ_1, …, Δ_n`.
    pub minors: Vec<f64>,
    /// One-based order of the first nonpositive leading minor.
    pub first_failing_minor: Option<usize>,
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(mut m: DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs())).unwrap();
        if m[(piv, col)] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap_rows(piv, col);
            det = -det;
        }
        let p = m[(col, col)];
        det *= p;
        for r in col + 1..n {
            let f = m[(r, col)] / p;
            if f != 0.0 {
                for c in col..n {
                    let v = m[(col, c)];
                    m[(r, c)] -= f * v;
                }
            }
        }
    }
    det
}

pub fn leading_principal_minors(a: &DMatrix<f64>) -> Vec<f64> {
    (1..=a.nrows()).map(|k| determinant(a.view((0, 0), (k, k)).into_owned())).collect()
}

/// All leading principal minors positive; returns the minors and the first
/// failing order.
pub fn minors_positive(a: &DMatrix<f64>) -> (bool, Vec<f64>, Option<usize>) {
    let minors = leading_principal_minors(a);
    let first = minors.iter().enumerate().find_map(|(k, &d)| {
        let hadamard: f64 = (0..=k).map(|i| (0..=k).map(|j| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt()).product();
        (!(d > MINOR_REL_TOL * hadamard)).then_some(k + 1)
    });
    (first.is_none(), minors, first)
}

/// Non-singular M-matrix test: off-diagonals `≤ 0` (so `A = sI − B` with
/// `B ≥ 0`) and every leading principal minor positive.
pub fn is_nonsingular_m_matrix(a: &DMatrix<f64>) -> MMatrixDiagnostics {
    let n = a.nrows();
    let offending_entry = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).find(|&(i, j)| i != j && a[(i, j)] > 0.0);
    let (ok, minors, first_failing_minor) = minors_positive(a);
    MMatrixDiagnostics {
        is_nonsingular_m: offending_entry.is_none() && ok,
        sign_pattern: offending_entry.is_none(),
        offending_entry,
        minors,
        first_failing_minor,
    }
}
