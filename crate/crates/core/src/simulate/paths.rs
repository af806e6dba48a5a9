//! Path ensembles.

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{invariant_measure, Model, ModelSpec, StateDepModel};

use super::cir::{cir_transition, CirParams};
use super::skeleton::{sample_regime_path_with, thin_target, RegimeSkeleton};
use super::{check_grid, fmt17, path_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scheme {
    ExactNCChi2,
    FullTruncationEuler,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub x0: f64,
    pub grid: Vec<f64>,
    pub n_paths: usize,
    pub scheme: Scheme,
    pub seed: u64,
    /// Zero-based starting regime; `None` draws it from the invariant measure
    /// (of `Q(x0)` for rate-level dependent switching).
    pub initial_regime: Option<usize>,
    /// Euler steps per grid interval.
    pub euler_substeps: usize,
}

impl SimConfig {
    pub fn new(x0: f64, grid: Vec<f64>, n_paths: usize, scheme: Scheme, seed: u64) -> Self {
        SimConfig { x0, grid, n_paths, scheme, seed, initial_regime: None, euler_substeps: 1 }
    }
}

/// `r_values[path][k]` and `regimes[path][k]` at `time_grid[k]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathBundle {
    pub time_grid: Vec<f64>,
    pub r_values: Vec<Vec<f64>>,
    pub regimes: Vec<Vec<usize>>,
    pub seed: u64,
    pub scheme: Scheme,
    /// Euler steps that ended at a nonpositive raw value; always 0 for the
    /// exact scheme.
    pub positivity_violations: u64,
}

impl PathBundle {
    pub fn n_paths(&self) -> usize {
        self.r_values.len()
    }

    /// Values of every path at grid index `k`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.r_values.iter().map(|p| p[k]).collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.column(self.time_grid.len() - 1)
    }

    /// CSV `path_id,t,r,regime`, one-based regimes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path_id,t,r,regime\n");
        for (p, (rs, ls)) in self.r_values.iter().zip(&self.regimes).enumerate() {
            for ((t, r), l) in self.time_grid.iter().zip(rs).zip(ls) {
                out.push_str(&format!("{p},{},{},{}\n", fmt17(*t), fmt17(*r), l + 1));
            }
        }
        out
    }
}

pub(crate) fn regime_params(spec: &ModelSpec) -> Vec<CirParams> {
    (0..spec.n_regimes()).map(|i| CirParams::regime(spec.a()[i], spec.b()[i], spec.sigma()[i])).collect()
}

/// Exact values on `grid` given a skeleton covering it. Grid points inside a
/// holding interval are reached by composing exact transitions.
pub fn exact_path<R: Rng + ?Sized>(
    params: &[CirParams],
    skeleton: &RegimeSkeleton,
    x0: f64,
    grid: &[f64],
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>) {
    let mut values = Vec::with_capacity(grid.len());
    let mut regimes = Vec::with_capacity(grid.len());
    let (mut t, mut r, mut state, mut idx) = (0.0, x0, skeleton.states[0], 0);
    for &g in grid {
        while idx < skeleton.jump_times.len() && skeleton.jump_times[idx] <= g {
            let tau = skeleton.jump_times[idx];
            if tau > t {
                r = cir_transition(&params[state], r, tau - t, rng);
                t = tau;
            }
            idx += 1;
            state = skeleton.states[idx];
        }
        if g > t {
            r = cir_transition(&params[state], r, g - t, rng);
            t = g;
        }
        values.push(r);
        regimes.push(state);
    }
    (values, regimes)
}

/// Full-truncation Euler with per-step thinning of the regime chain.
/// Returns values `max(r, 0)`, regimes and the raw violation count.
pub fn euler_path<R: Rng + ?Sized>(
    sd: &StateDepModel,
    x0: f64,
    start: usize,
    grid: &[f64],
    substeps: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<usize>, u64)> {
    let spec = sd.base();
    let (a, b, s) = (spec.a(), spec.b(), spec.sigma());
    let mut values = Vec::with_capacity(grid.len());
    let mut regimes = Vec::with_capacity(grid.len());
    let (mut t, mut r, mut i, mut violations) = (0.0, x0, start, 0u64);
    for &g in grid {
        if g > t {
            let h = (g - t) / substeps as f64;
            for _ in 0..substeps {
                let rp = r.max(0.0);
                let z: f64 = StandardNormal.sample(rng);
                r += a[i] * (b[i] - rp) * h + 2.0 * s[i] * rp.sqrt() * h.sqrt() * z;
                if r <= 0.0 {
                    violations += 1;
                }
                let mut elapsed = 0.0;
                loop {
                    let m = sd.dominating_rate(i);
                    if !(m > 0.0) {
                        if sd.n_regimes() > 1 {
                            return Err(Error::Model(format!("regime {} is absorbing (all rates vanish)", i + 1)));
                        }
                        break;
                    }
                    elapsed += Exp::new(m).expect("positive rate").sample(rng);
                    if elapsed >= h {
                        break;
                    }
                    if let Some(j) = thin_target(sd, i, rp, m, rng) {
                        i = j;
                    }
                }
            }
            t = g;
        }
        values.push(r.max(0.0));
        regimes.push(i);
    }
    Ok((values, regimes, violations))
}

/// Exact-scheme rate matrix for a model whose rates do not depend on `r`.
fn homogeneous_spec(model: &Model) -> Result<ModelSpec> {
    match model {
        Model::Homogeneous(m) => Ok(m.clone()),
        Model::StateDependent(sd) if sd.is_time_homogeneous() => {
            let s = sd.base();
            ModelSpec::new(s.a().to_vec(), s.b().to_vec(), s.sigma().to_vec(), sd.q_at(0.0))
        }
        Model::StateDependent(_) => Err(Error::Contract(
            "ExactNCChi2 needs switching rates independent of r; use FullTruncationEuler".into(),
        )),
    }
}

fn draw<R: Rng + ?Sized>(law: &[f64], rng: &mut R) -> usize {
    WeightedIndex::new(law).expect("probability vector").sample(rng)
}

pub fn simulate_paths(model: &Model, cfg: &SimConfig, exec: &Exec) -> Result<PathBundle> {
    model.require_usable()?;
    check_grid(&cfg.grid)?;
    if !(cfg.x0 > 0.0 && cfg.x0.is_finite()) {
        return Err(Error::Precondition(format!("x0 must be positive, got {}", cfg.x0)));
    }
    if cfg.euler_substeps == 0 {
        return Err(Error::Precondition("euler_substeps must be at least 1".into()));
    }
    let n = model.spec().n_regimes();
    if let Some(i) = cfg.initial_regime {
        if i >= n {
            return Err(Error::Precondition(format!("initial regime {} out of range", i + 1)));
        }
    }
    let horizon = *cfg.grid.last().expect("nonempty grid");
    let (paths, violations): (Vec<(Vec<f64>, Vec<usize>)>, u64) = match cfg.scheme {
        Scheme::ExactNCChi2 => {
            let spec = homogeneous_spec(model)?;
            spec.require_h1()?;
            let params = regime_params(&spec);
            let mu = invariant_measure(&spec)?.mu;
            let paths = exec.try_map(cfg.n_paths, |p| {
                let mut rng = path_rng(cfg.seed, p as u64);
                let start = cfg.initial_regime.unwrap_or_else(|| draw(&mu, &mut rng));
                let sk = if horizon > 0.0 {
                    sample_regime_path_with(&spec, horizon, start, &mut rng)?
                } else {
                    RegimeSkeleton::constant(start, 0.0)
                };
                Ok(exact_path(&params, &sk, cfg.x0, &cfg.grid, &mut rng))
            })?;
            (paths, 0)
        }
        Scheme::FullTruncationEuler => {
            let sd = model.as_state_dependent();
            let s = sd.base();
            let mu = invariant_measure(&ModelSpec::new(s.a().to_vec(), s.b().to_vec(), s.sigma().to_vec(), sd.q_at(cfg.x0))?)?.mu;
            let out = exec.try_map(cfg.n_paths, |p| {
                let mut rng = path_rng(cfg.seed, p as u64);
                let start = cfg.initial_regime.unwrap_or_else(|| draw(&mu, &mut rng));
                euler_path(&sd, cfg.x0, start, &cfg.grid, cfg.euler_substeps, &mut rng)
            })?;
            let v = out.iter().map(|o| o.2).sum();
            (out.into_iter().map(|(r, l, _)| (r, l)).collect(), v)
        }
    };
    let (r_values, regimes) = paths.into_iter().unzip();
    Ok(PathBundle {
        time_grid: cfg.grid.clone(),
        r_values,
        regimes,
        seed: cfg.seed,
        scheme: cfg.scheme,
        positivity_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RateFn;

    const SYM: [&[f64]; 2] = [&[-1.0, 1.0], &[1.0, -1.0]];

    fn light() -> Model {
        Model::Homogeneous(ModelSpec::from_rows(&[2.0, 1.0], &[1.0, 2.0], &[1.0, 1.0], &SYM).unwrap())
    }

    fn grid(t: f64, k: usize) -> Vec<f64> {
        (0..=k).map(|i| t * i as f64 / k as f64).collect()
    }

    #[test]
    fn deterministic_for_any_worker_count() {
        let cfg = SimConfig::new(1.0, grid(2.0, 8), 64, Scheme::ExactNCChi2, 99);
        let a = simulate_paths(&light(), &cfg, &Exec::Sequential).unwrap();
        let b = simulate_paths(&light(), &cfg, &Exec::Parallel { threads: Some(3) }).unwrap();
        let c = simulate_paths(&light(), &cfg, &Exec::Parallel { threads: None }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.r_values.iter().flatten().all(|&r| r > 0.0));
        assert!(a.r_values.iter().all(|p| p[0] == 1.0));
    }

    #[test]
    fn exact_rejects_state_dependent_rates() {
        let sd = StateDepModel::new(
            light().spec().clone(),
            [((0, 1), RateFn::Logistic { low: 1.0, high: 3.0, steepness: 1.0 })],
        )
        .unwrap();
        let cfg = SimConfig::new(1.0, grid(1.0, 4), 4, Scheme::ExactNCChi2, 0);
        assert!(matches!(simulate_paths(&Model::StateDependent(sd.clone()), &cfg, &Exec::Sequential), Err(Error::Contract(_))));
        let cfg = SimConfig { scheme: Scheme::FullTruncationEuler, euler_substeps: 10, ..cfg };
        assert!(simulate_paths(&Model::StateDependent(sd), &cfg, &Exec::Sequential).is_ok());
    }

    #[test]
    fn exact_requires_h1() {
        let m = Model::Homogeneous(ModelSpec::from_rows(&[1.0, 1.0], &[1.0, 2.0], &[1.0, 1.0], &SYM).unwrap());
        let cfg = SimConfig::new(1.0, grid(1.0, 4), 4, Scheme::ExactNCChi2, 0);
        assert!(matches!(simulate_paths(&m, &cfg, &Exec::Sequential), Err(Error::Precondition(_))));
    }

    #[test]
    fn tiny_volatility_tracks_ode() {
        // regime-modulated ODE r' = a(b − r) solved exactly on the same skeleton
        let spec = ModelSpec::from_rows(&[2.0, 0.5], &[1.0, 3.0], &[1e-6, 1e-6], &SYM).unwrap();
        let sd = StateDepModel::new(spec.clone(), []).unwrap();
        let g = grid(3.0, 30);
        let mut rng = path_rng(4, 0);
        let (vals, regs, viol) = euler_path(&sd, 2.0, 0, &g, 1000, &mut rng).unwrap();
        assert_eq!(viol, 0);
        // intervals whose end regimes differ contain a jump; restart there
        let mut r = 2.0;
        let mut worst: f64 = 0.0;
        for k in 1..g.len() {
            let i = regs[k - 1];
            if regs[k] != i {
                r = vals[k];
                continue;
            }
            let dt = g[k] - g[k - 1];
            r = spec.b()[i] + (r - spec.b()[i]) * (-spec.a()[i] * dt).exp();
            worst = worst.max((r - vals[k]).abs());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn euler_and_exact_agree_on_one_regime() {
        let m = Model::Homogeneous(ModelSpec::from_rows(&[2.0], &[1.0], &[0.5], &[&[0.0]]).unwrap());
        let n = 10_000;
        let ex = simulate_paths(&m, &SimConfig::new(1.0, vec![0.0, 1.0], n, Scheme::ExactNCChi2, 1), &Exec::default()).unwrap();
        let cfg = SimConfig { euler_substeps: 1000, ..SimConfig::new(1.0, vec![0.0, 1.0], n, Scheme::FullTruncationEuler, 2) };
        let eu = simulate_paths(&m, &cfg, &Exec::default()).unwrap();
        let ks = crate::analyze::ks_distance(&ex.terminal(), &eu.terminal()).unwrap();
        assert!(ks < 0.023, "{ks}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = SimConfig::new(1.0, vec![0.0, 1.0, 0.5], 4, Scheme::ExactNCChi2, 0);
        assert!(simulate_paths(&light(), &cfg, &Exec::Sequential).is_err());
        let cfg = SimConfig::new(-1.0, vec![0.0, 1.0], 4, Scheme::ExactNCChi2, 0);
        assert!(simulate_paths(&light(), &cfg, &Exec::Sequential).is_err());
        let cfg = SimConfig { initial_regime: Some(5), ..SimConfig::new(1.0, vec![1.0], 4, Scheme::ExactNCChi2, 0) };
        assert!(simulate_paths(&light(), &cfg, &Exec::Sequential).is_err());
    }

    #[test]
    fn csv_layout() {
        let cfg = SimConfig { initial_regime: Some(1), ..SimConfig::new(1.0, vec![0.0, 0.5], 2, Scheme::ExactNCChi2, 3) };
        let b = simulate_paths(&light(), &cfg, &Exec::Sequential).unwrap();
        let csv = b.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "path_id,t,r,regime");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,0.0000000000000000e0,1.0000000000000000e0,2");
        let r: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(r, b.r_values[0][1]);
    }
}
