//! Spectral quantities behind the recurrence and tail criteria.
//!
//! `η_p = −max Re spec(Q − p·diag(a))` is computed as a Perron root: the
//! matrix has nonnegative off-diagonals, so after a diagonal shift it is an
//! irreducible nonnegative matrix whose dominant eigenvalue is real.

mod curve;
mod mmatrix;
mod perron;
mod variational;

pub use curve::{kappa, kappa_upper_bound, spectral_curve, KappaReport, SpectralCurve};
pub use mmatrix::{is_nonsingular_m_matrix, leading_principal_minors, minors_positive, MMatrixDiagnostics};
pub use perron::{eta, eta_matrix, eta_tilde_1, perron_root, PerronRoot, PERRON_MAX_ITER, PERRON_REL_TOL};
pub use variational::{
    quadratic_form, truncated_eigenvalues, variational_eigenvalue, CountableChain, QuadraticFormSpec, TruncationLevel,
    VariationalEigen,
};

/// Serializes `±∞` as the strings `"inf"` / `"-inf"`.
pub(crate) fn serialize_extended<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}
