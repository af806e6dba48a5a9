//! JSON model file.
//!
//! ```json
//! {"regimes": 2, "a": [2, -0.5], "b": [1, -4], "sigma": [1, 1],
//!  "Q": [[-1, 1], [1, -1]],
//!  "state_dependent": {"1,2": {"kind": "logistic", "low": 1, "high": 3, "steepness": 1}}}
//! ```
//!
//! `state_dependent` keys name a one-based pair, either `"i,j"` or, when both
//! labels are single digits, `"ij"`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::rates::{RateFn, StateDepModel};
use super::spec::{ModelSpec, ValidationReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub regimes: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_dependent: Option<BTreeMap<String, RateFn>>,
}

/// A loaded model: constant switching rates or rate-level dependent ones.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Homogeneous(ModelSpec),
    StateDependent(StateDepModel),
}

impl Model {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), column: e.column(), msg: e.to_string() })?;
        file.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Coefficients and reference rate matrix.
    pub fn spec(&self) -> &ModelSpec {
        match self {
            Model::Homogeneous(m) => m,
            Model::StateDependent(sd) => sd.base(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            Model::Homogeneous(m) => m.validate(),
            Model::StateDependent(sd) => sd.validate(),
        }
    }

    pub fn require_usable(&self) -> Result<()> {
        match self {
            Model::Homogeneous(m) => m.require_usable(),
            Model::StateDependent(sd) => sd.require_usable(),
        }
    }

    pub fn as_state_dependent(&self) -> StateDepModel {
        match self {
            Model::Homogeneous(m) => StateDepModel::new(m.clone(), []).expect("constant rates of a valid spec"),
            Model::StateDependent(sd) => sd.clone(),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<Model> {
        let n = self.regimes;
        if n == 0 {
            return Err(Error::Structural("\"regimes\" must be at least 1".into()));
        }
        if self.q.len() != n || self.q.iter().any(|r| r.len() != n) {
            return Err(Error::Structural(format!("\"Q\" must be a {n}x{n} matrix")));
        }
        if self.a.len() != n || self.b.len() != n || self.sigma.len() != n {
            return Err(Error::Structural(format!("\"a\", \"b\", \"sigma\" must each have {n} entries")));
        }
        let q = DMatrix::from_fn(n, n, |i, j| self.q[i][j]);
        let spec = ModelSpec::new(self.a, self.b, self.sigma, q)?;
        match self.state_dependent {
            None => Ok(Model::Homogeneous(spec)),
            Some(map) => {
                let overrides = map
                    .into_iter()
                    .map(|(k, f)| parse_pair(&k, n).map(|p| (p, f)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::StateDependent(StateDepModel::new(spec, overrides)?))
            }
        }
    }

    pub fn from_spec(spec: &ModelSpec) -> Self {
        let n = spec.n_regimes();
        Self {
            regimes: n,
            a: spec.a().to_vec(),
            b: spec.b().to_vec(),
            sigma: spec.sigma().to_vec(),
            q: (0..n).map(|i| (0..n).map(|j| spec.q()[(i, j)]).collect()).collect(),
            state_dependent: None,
        }
    }
}

/// One-based `"i,j"` or `"ij"` to a zero-based pair.
fn parse_pair(key: &str, n: usize) -> Result<(usize, usize)> {
    let bad = || Error::Structural(format!("state_dependent key {key:?} is not a regime pair \"i,j\""));
    let (i, j) = if let Some((l, r)) = key.split_once(',') {
        (l.trim().parse::<usize>().map_err(|_| bad())?, r.trim().parse::<usize>().map_err(|_| bad())?)
    } else {
        let digits: Vec<u32> = key.chars().map(|c| c.to_digit(10)).collect::<Option<_>>().ok_or_else(bad)?;
        if digits.len() != 2 {
            return Err(bad());
        }
        (digits[0] as usize, digits[1] as usize)
    };
    if i == 0 || j == 0 || i > n || j > n || i == j {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}
