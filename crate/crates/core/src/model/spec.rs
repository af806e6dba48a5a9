use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

use super::chain::is_irreducible;

/// Regime-switching CIR coefficients and the rate matrix of the regime chain.
///
/// Regimes are indexed `0..n` internally; file formats and CLI output use
/// one-based labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    a: Vec<f64>,
    b: Vec<f64>,
    sigma: Vec<f64>,
    q: DMatrix<f64>,
}

impl ModelSpec {
    /// Builds a model after structural checks only (shapes, finiteness, N ≥ 1).
    /// Use [`validate`] for the modelling conditions.
    pub fn new(a: Vec<f64>, b: Vec<f64>, sigma: Vec<f64>, q: DMatrix<f64>) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::Structural("model has no regimes".into()));
        }
        if b.len() != n || sigma.len() != n {
            return Err(Error::Structural(format!(
                "coefficient lengths differ: a={}, b={}, sigma={}",
                n,
                b.len(),
                sigma.len()
            )));
        }
        if q.nrows() != q.ncols() {
            return Err(Error::Structural(format!("Q is {}x{}, not square", q.nrows(), q.ncols())));
        }
        if q.nrows() != n {
            return Err(Error::Structural(format!("Q is {0}x{0} but there are {1} regimes", q.nrows(), n)));
        }
        let finite = a.iter().chain(&b).chain(&sigma).chain(q.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Structural("non-finite entry in model".into()));
        }
        Ok(Self { a, b, sigma, q })
    }

    pub fn from_rows(a: &[f64], b: &[f64], sigma: &[f64], q_rows: &[&[f64]]) -> Result<Self> {
        let n = q_rows.len();
        if q_rows.iter().any(|r| r.len() != n) {
            return Err(Error::Structural("Q rows have unequal length".into()));
        }
        let q = DMatrix::from_fn(n, n, |i, j| q_rows[i][j]);
        Self::new(a.to_vec(), b.to_vec(), sigma.to_vec(), q)
    }

    pub fn n_regimes(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn a_min(&self) -> f64 {
        self.a.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Total jump rate out of regime `i`, `−q_ii`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.q[(i, i)]
    }

    /// Same coefficients with `a` replaced (used for sign-flipped spectra).
    pub fn with_a(&self, a: Vec<f64>) -> Result<Self> {
        Self::new(a, self.b.clone(), self.sigma.clone(), self.q.clone())
    }

    /// Same coefficients with the rate matrix multiplied by `c`.
    pub fn with_q_scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.sigma.clone(), &self.q * c)
    }

    /// Relabels regimes: new regime `k` is old regime `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n_regimes())?;
        let pick = |v: &[f64]| perm.iter().map(|&k| v[k]).collect::<Vec<_>>();
        let q = DMatrix::from_fn(perm.len(), perm.len(), |i, j| self.q[(perm[i], perm[j])]);
        Self::new(pick(&self.a), pick(&self.b), pick(&self.sigma), q)
    }

    pub fn satisfies_h1(&self) -> bool {
        (0..self.n_regimes()).all(|i| self.feller_ratio(i) >= 2.0)
    }

    pub fn satisfies_h1_strong(&self) -> bool {
        (0..self.n_regimes()).all(|i| self.feller_ratio(i) >= 4.0)
    }

    /// `a_i b_i / σ_i²`, the noncentral χ² degrees of freedom in regime `i`.
    pub fn feller_ratio(&self, i: usize) -> f64 {
        self.a[i] * self.b[i] / (self.sigma[i] * self.sigma[i])
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Fails with the first violated usability condition.
    pub fn require_usable(&self) -> Result<()> {
        let report = self.validate();
        match report.first_failure() {
            Some(c) => Err(Error::Precondition(format!("model is not usable: {} fails ({})", c.code, c.detail))),
            None => Ok(()),
        }
    }

    pub fn require_h1(&self) -> Result<()> {
        if let Some(i) = (0..self.n_regimes()).find(|&i| self.feller_ratio(i) < 2.0) {
            return Err(Error::Precondition(format!(
                "H1 fails in regime {}: a*b = {} < 2*sigma^2 = {}",
                i + 1,
                self.a[i] * self.b[i],
                2.0 * self.sigma[i] * self.sigma[i]
            )));
        }
        Ok(())
    }

    /// Drift of `R = √r` in regime `i`: `(a b − σ² − a x²) / (2x)`.
    pub fn sqrt_drift(&self, i: usize, x: f64) -> f64 {
        let (a, b, s2) = (self.a[i], self.b[i], self.sigma[i] * self.sigma[i]);
        (a * b - s2 - a * x * x) / (2.0 * x)
    }

    /// Diffusion part `L^(i)` of the generator of `(R_t, Λ_t)` applied to a
    /// function given by its first and second derivative at `x`.
    pub fn sqrt_generator(&self, i: usize, x: f64, df: f64, d2f: f64) -> f64 {
        0.5 * self.sigma[i] * self.sigma[i] * d2f + self.sqrt_drift(i, x) * df
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::Contract(format!("ordering has {} entries for {} regimes", perm.len(), n)));
    }
    for &k in perm {
        if k >= n || seen[k] {
            return Err(Error::Contract(format!("ordering {perm:?} is not a permutation of 0..{n}")));
        }
        seen[k] = true;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Condition {
    #[serde(rename = "conservative")]
    Conservative,
    #[serde(rename = "irreducible")]
    Irreducible,
    #[serde(rename = "sigma-nonzero")]
    SigmaNonzero,
    #[serde(rename = "H1")]
    H1,
    #[serde(rename = "H1-strong")]
    H1Strong,
    /// Only reported for state-dependent models; never gates usability.
    #[serde(rename = "lipschitz")]
    Lipschitz,
}

impl Condition {
    pub fn code(&self) -> &'static str {
        match self {
            Condition::Conservative => "conservative",
            Condition::Irreducible => "irreducible",
            Condition::SigmaNonzero => "sigma-nonzero",
            Condition::H1 => "H1",
            Condition::H1Strong => "H1-strong",
            Condition::Lipschitz => "lipschitz",
        }
    }

    /// Conditions that must pass before other modules accept the model.
    pub fn gates_usability(&self) -> bool {
        matches!(self, Condition::Conservative | Condition::Irreducible | Condition::SigmaNonzero | Condition::H1)
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionResult {
    pub code: Condition,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub conditions: Vec<ConditionResult>,
    pub usable: bool,
}

impl ValidationReport {
    pub(crate) fn from_conditions(conditions: Vec<ConditionResult>) -> Self {
        let usable = conditions.iter().filter(|c| c.code.gates_usability()).all(|c| c.passed);
        Self { conditions, usable }
    }

    pub fn get(&self, code: Condition) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.code == code)
    }

    pub fn passed(&self, code: Condition) -> bool {
        self.get(code).is_some_and(|c| c.passed)
    }

    /// First failing condition among those that gate usability.
    pub fn first_failure(&self) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.code.gates_usability() && !c.passed)
    }
}

const ROW_SUM_TOL: f64 = 1e-10;

pub fn validate(spec: &ModelSpec) -> ValidationReport {
    let n = spec.n_regimes();
    let q = spec.q();
    let mut conditions = Vec::with_capacity(5);

    let mut bad = Vec::new();
    for i in 0..n {
        let mut scale = 0.0f64;
        let mut sum = 0.0;
        for j in 0..n {
            let v = q[(i, j)];
            if i != j && v < 0.0 {
                bad.push(format!("q[{},{}] = {} < 0", i + 1, j + 1, v));
            }
            scale = scale.max(v.abs());
            sum += v;
        }
        if sum.abs() > ROW_SUM_TOL * scale.max(1.0) {
            bad.push(format!("row {} sums to {}", i + 1, sum));
        }
    }
    conditions.push(ConditionResult {
        code: Condition::Conservative,
        passed: bad.is_empty(),
        detail: if bad.is_empty() { "rows sum to zero, off-diagonals nonnegative".into() } else { bad.join("; ") },
    });

    let irreducible = is_irreducible(q);
    conditions.push(ConditionResult {
        code: Condition::Irreducible,
        passed: irreducible,
        detail: if irreducible {
            "rate graph strongly connected".into()
        } else {
            "rate graph is not strongly connected".into()
        },
    });

    let zero_sigma: Vec<String> = (0..n).filter(|&i| spec.sigma()[i] == 0.0).map(|i| (i + 1).to_string()).collect();
    conditions.push(ConditionResult {
        code: Condition::SigmaNonzero,
        passed: zero_sigma.is_empty(),
        detail: if zero_sigma.is_empty() {
            "all sigma nonzero".into()
        } else {
            format!("sigma = 0 in regimes {}", zero_sigma.join(","))
        },
    });

    for (code, factor) in [(Condition::H1, 2.0), (Condition::H1Strong, 4.0)] {
        let failing: Vec<String> = (0..n)
            .filter(|&i| spec.a()[i] * spec.b()[i] < factor * spec.sigma()[i] * spec.sigma()[i])
            .map(|i| {
                format!(
                    "regime {}: a*b = {} < {}*sigma^2 = {}",
                    i + 1,
                    spec.a()[i] * spec.b()[i],
                    factor,
                    factor * spec.sigma()[i] * spec.sigma()[i]
                )
            })
            .collect();
        conditions.push(ConditionResult {
            code,
            passed: failing.is_empty(),
            detail: if failing.is_empty() {
                format!("a_i*b_i >= {factor}*sigma_i^2 for all i")
            } else {
                failing.join("; ")
            },
        });
    }

    ValidationReport::from_conditions(conditions)
}
