use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::chain::is_irreducible;
use super::spec::{check_permutation, validate, Condition, ConditionResult, ModelSpec, ValidationReport};

/// Switching-rate function `x ↦ q_ij(x)` on `(0, ∞)` with closed-form bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RateFn {
    Constant { rate: f64 },
    /// `low + (high − low)·tanh(s x / 2)` for `s > 0`; mirrored
    /// (`high` at 0, decaying to `low`) for `s < 0`. Range is `[low, high)`.
    Logistic { low: f64, high: f64, steepness: f64 },
    /// `values[k]` on `[breakpoints[k−1], breakpoints[k])`, with implicit
    /// end points 0 and ∞.
    Piecewise { breakpoints: Vec<f64>, values: Vec<f64> },
}

impl RateFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RateFn::Constant { rate } => *rate,
            RateFn::Logistic { low, high, steepness } => {
                let t = (steepness.abs() * x / 2.0).tanh();
                if *steepness > 0.0 {
                    low + (high - low) * t
                } else {
                    high - (high - low) * t
                }
            }
            RateFn::Piecewise { breakpoints, values } => {
                let k = breakpoints.partition_point(|&b| b <= x);
                values[k]
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            RateFn::Constant { rate } => *rate,
            RateFn::Logistic { high, .. } => *high,
            RateFn::Piecewise { values, .. } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn inf(&self) -> f64 {
        match self {
            RateFn::Constant { rate } => *rate,
            RateFn::Logistic { low, .. } => *low,
            RateFn::Piecewise { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Lipschitz constant, or `None` when the function jumps.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            RateFn::Constant { .. } => Some(0.0),
            RateFn::Logistic { low, high, steepness } => Some((high - low) * steepness.abs() / 2.0),
            RateFn::Piecewise { values, .. } => values.windows(2).all(|w| w[0] == w[1]).then_some(0.0),
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Structural(m));
        match self {
            RateFn::Constant { rate } => {
                if !(rate.is_finite() && *rate >= 0.0) {
                    return bad(format!("constant rate {rate} must be finite and >= 0"));
                }
            }
            RateFn::Logistic { low, high, steepness } => {
                if !(low.is_finite() && high.is_finite() && steepness.is_finite()) {
                    return bad("logistic parameters must be finite".into());
                }
                if *low < 0.0 || low > high {
                    return bad(format!("logistic needs 0 <= low <= high, got low={low}, high={high}"));
                }
                if *steepness == 0.0 {
                    return bad("logistic steepness must be nonzero".into());
                }
            }
            RateFn::Piecewise { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    return bad(format!(
                        "piecewise rate needs breakpoints+1 values, got {} breakpoints and {} values",
                        breakpoints.len(),
                        values.len()
                    ));
                }
                if breakpoints.iter().any(|b| !(b.is_finite() && *b > 0.0)) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("piecewise breakpoints must be positive and strictly increasing".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("piecewise values must be finite and >= 0".into());
                }
            }
        }
        Ok(())
    }
}

/// Regime-switching CIR model whose switching rates depend on the current rate level.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDepModel {
    base: ModelSpec,
    /// `rates[i][j]` for `i ≠ j`; diagonal slots are unused.
    rates: Vec<Vec<RateFn>>,
}

impl StateDepModel {
    /// Pairs without an override use the constant `q_ij` of `base`.
    pub fn new(base: ModelSpec, overrides: impl IntoIterator<Item = ((usize, usize), RateFn)>) -> Result<Self> {
        let n = base.n_regimes();
        let mut rates: Vec<Vec<RateFn>> = (0..n)
            .map(|i| (0..n).map(|j| RateFn::Constant { rate: if i == j { 0.0 } else { base.q()[(i, j)] } }).collect())
            .collect();
        for ((i, j), f) in overrides {
            if i >= n || j >= n || i == j {
                return Err(Error::Structural(format!("rate override ({},{}) is not an off-diagonal pair", i + 1, j + 1)));
            }
            f.check()?;
            rates[i][j] = f;
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    rates[i][j].check()?;
                }
            }
        }
        Ok(Self { base, rates })
    }

    pub fn base(&self) -> &ModelSpec {
        &self.base
    }

    pub fn n_regimes(&self) -> usize {
        self.base.n_regimes()
    }

    pub fn rate_fn(&self, i: usize, j: usize) -> &RateFn {
        &self.rates[i][j]
    }

    pub fn rate(&self, i: usize, j: usize, x: f64) -> f64 {
        if i == j {
            -self.exit_rate(i, x)
        } else {
            self.rates[i][j].eval(x)
        }
    }

    pub fn exit_rate(&self, i: usize, x: f64) -> f64 {
        (0..self.n_regimes()).filter(|&j| j != i).map(|j| self.rates[i][j].eval(x)).sum()
    }

    /// Thinning bound `M_i = Σ_{j≠i} sup_x q_ij(x)` (≥ `sup_x Σ_j q_ij(x)`).
    pub fn dominating_rate(&self, i: usize) -> f64 {
        (0..self.n_regimes()).filter(|&j| j != i).map(|j| self.rates[i][j].sup()).sum()
    }

    /// True when every rate function is constant in `x`.
    pub fn is_time_homogeneous(&self) -> bool {
        let n = self.n_regimes();
        (0..n).all(|i| (0..n).all(|j| i == j || self.rates[i][j].sup() == self.rates[i][j].inf()))
    }

    /// Rate matrix with every off-diagonal entry at its supremum.
    pub fn sup_matrix(&self) -> DMatrix<f64> {
        self.envelope(|f| f.sup())
    }

    pub fn inf_matrix(&self) -> DMatrix<f64> {
        self.envelope(|f| f.inf())
    }

    /// Rate matrix frozen at level `x`.
    pub fn q_at(&self, x: f64) -> DMatrix<f64> {
        self.envelope(|f| f.eval(x))
    }

    fn envelope(&self, pick: impl Fn(&RateFn) -> f64) -> DMatrix<f64> {
        let n = self.n_regimes();
        let mut q = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { pick(&self.rates[i][j]) });
        for i in 0..n {
            let s: f64 = q.row(i).sum();
            q[(i, i)] = -s;
        }
        q
    }

    /// Coefficient conditions of the base model, irreducibility of the graph
    /// of pairs that can ever switch (`sup q_ij > 0`), and a non-gating
    /// Lipschitz report.
    pub fn validate(&self) -> ValidationReport {
        let mut conditions = validate(&self.base).conditions;
        let sup = self.sup_matrix();
        for c in conditions.iter_mut() {
            match c.code {
                // rows are conservative by construction
                Condition::Conservative => {
                    *c = ConditionResult { code: c.code, passed: true, detail: "diagonal defined by row sums".into() };
                }
                Condition::Irreducible => {
                    let ok = is_irreducible(&sup);
                    c.passed = ok;
                    c.detail = if ok {
                        "graph of pairs with sup rate > 0 strongly connected".into()
                    } else {
                        "graph of pairs with sup rate > 0 is not strongly connected".into()
                    };
                }
                _ => {}
            }
        }
        let n = self.n_regimes();
        let jumps: Vec<String> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.rates[i][j].lipschitz().is_none())
            .map(|(i, j)| format!("{},{}", i + 1, j + 1))
            .collect();
        conditions.push(ConditionResult {
            code: Condition::Lipschitz,
            passed: jumps.is_empty(),
            detail: if jumps.is_empty() {
                "all rate functions Lipschitz".into()
            } else {
                format!("discontinuous piecewise rates at pairs {}", jumps.join(" "))
            },
        });
        ValidationReport::from_conditions(conditions)
    }

    pub fn require_usable(&self) -> Result<()> {
        match self.validate().first_failure() {
            Some(c) => Err(Error::Precondition(format!("model is not usable: {} fails ({})", c.code, c.detail))),
            None => Ok(()),
        }
    }
}

/// Auxiliary rate matrix `Q̃` under a regime ordering, in positional labels:
/// position `k` holds regime `ordering[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundMatrix {
    pub ordering: Vec<usize>,
    pub q_tilde: DMatrix<f64>,
    /// `a` in positional order.
    pub a: Vec<f64>,
    pub warnings: Vec<String>,
}

impl BoundMatrix {
    /// `Q̃` with rows and columns back in the original regime labels.
    pub fn in_original_labels(&self) -> DMatrix<f64> {
        let n = self.ordering.len();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for k in 0..n {
                out[(self.ordering[i], self.ordering[k])] = self.q_tilde[(i, k)];
            }
        }
        out
    }
}

/// `q̃_ik = sup q_ik` below the diagonal, `inf q_ik` above it, in the given ordering.
pub fn bound_matrix(sd: &StateDepModel, ordering: &[usize]) -> Result<BoundMatrix> {
    let n = sd.n_regimes();
    check_permutation(ordering, n)?;
    let mut q = DMatrix::zeros(n, n);
    let mut warnings = Vec::new();
    for i in 0..n {
        let from = ordering[i];
        let mut total = 0.0;
        let mut original_positive = false;
        for k in 0..n {
            if k == i {
                continue;
            }
            let f = sd.rate_fn(from, ordering[k]);
            original_positive |= f.sup() > 0.0;
            let v = if k < i { f.sup() } else { f.inf() };
            q[(i, k)] = v;
            total += v;
        }
        q[(i, i)] = -total;
        if total == 0.0 && original_positive {
            warnings.push(format!(
                "row of regime {} has no positive bound rate; the auxiliary chain may be reducible",
                from + 1
            ));
        }
    }
    let a = ordering.iter().map(|&k| sd.base().a()[k]).collect();
    Ok(BoundMatrix { ordering: ordering.to_vec(), q_tilde: q, a, warnings })
}
