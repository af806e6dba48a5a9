//! Moment, exponential-moment and tail-index probes.

use serde::Serialize;

use crate::classify::{classify_tail, Tail, TailVerdict};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::Model;
use crate::simulate::fmt17;

use super::stationary::{constant_rate_spec, stationary_sample, StationaryConfig};
use super::stats::{default_hill_k, hill_estimator, hill_k_grid, hill_sweep, log_mean_exp, HillSweep};

/// Growth from the first to the last sample size that reads as divergence.
pub const EXPLOSION_FACTOR: f64 = 10.0;
/// Relative band for the last two estimates to count as settled.
pub const STABILITY_BAND: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeVerdict {
    Stabilizing,
    Exploding,
    Undetermined,
}

/// Verdict from log-estimates along increasing sample sizes.
fn verdict_from_logs(logs: &[f64]) -> ProbeVerdict {
    let k = logs.len();
    if k < 2 {
        return ProbeVerdict::Undetermined;
    }
    if logs[k - 1] - logs[0] > EXPLOSION_FACTOR.ln() {
        ProbeVerdict::Exploding
    } else if (logs[k - 1] - logs[k - 2]).exp_m1().abs() <= STABILITY_BAND {
        ProbeVerdict::Stabilizing
    } else {
        ProbeVerdict::Undetermined
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub p: f64,
    pub n: usize,
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
    pub verdicts: Vec<(f64, ProbeVerdict)>,
}

impl MomentTable {
    pub fn verdict(&self, p: f64) -> Option<ProbeVerdict> {
        self.verdicts.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,n,estimate\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", fmt17(r.p), r.n, fmt17(r.estimate)));
        }
        out
    }
}

fn check_n_list(n_list: &[usize], available: usize) -> Result<()> {
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("sample sizes must be positive and strictly increasing".into()));
    }
    if *n_list.last().expect("nonempty") > available {
        return Err(Error::Precondition(format!("largest sample size exceeds the {available} values available")));
    }
    Ok(())
}

/// Empirical `p`-th moments on nested prefixes `values[..n]`.
pub fn moment_table(values: &[f64], p_list: &[f64], n_list: &[usize]) -> Result<MomentTable> {
    check_n_list(n_list, values.len())?;
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for &p in p_list {
        let mut logs = Vec::new();
        let mut acc = 0.0;
        let mut done = 0;
        for &n in n_list {
            acc += values[done..n].iter().map(|v| v.powf(p)).sum::<f64>();
            done = n;
            let estimate = acc / n as f64;
            rows.push(MomentRow { p, n, estimate });
            logs.push(estimate.ln());
        }
        verdicts.push((p, verdict_from_logs(&logs)));
    }
    Ok(MomentTable { rows, verdicts })
}

/// Stationary sample of the largest size, then [`moment_table`].
pub fn moment_explosion_probe(
    model: &Model,
    p_list: &[f64],
    n_list: &[usize],
    seed: u64,
    exec: &Exec,
) -> Result<MomentTable> {
    let n = *n_list.last().ok_or_else(|| Error::Precondition("empty sample-size list".into()))?;
    let cfg = StationaryConfig { diagnostic: false, ..StationaryConfig::new(n, seed) };
    let s = stationary_sample(model, &cfg, exec)?;
    moment_table(&s.values, p_list, n_list)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpMomentProbe {
    pub delta: f64,
    /// `(n, ln mean e^{δ r})` on nested prefixes.
    pub log_estimates: Vec<(usize, f64)>,
    /// `mean e^{δ r}` over the full sample (may be `inf` in `f64`).
    pub estimate: f64,
    pub verdict: ProbeVerdict,
}

pub fn exp_moment_table(values: &[f64], delta: f64, n_list: &[usize]) -> Result<ExpMomentProbe> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Precondition(format!("delta must be nonnegative, got {delta}")));
    }
    check_n_list(n_list, values.len())?;
    let scaled: Vec<f64> = values.iter().map(|v| delta * v).collect();
    let log_estimates: Vec<(usize, f64)> = n_list.iter().map(|&n| (n, log_mean_exp(&scaled[..n]))).collect();
    let logs: Vec<f64> = log_estimates.iter().map(|(_, l)| *l).collect();
    let last = *logs.last().expect("nonempty");
    Ok(ExpMomentProbe { delta, estimate: last.exp(), verdict: verdict_from_logs(&logs), log_estimates })
}

/// `mean e^{δ r}` at `n/8, n/4, n/2, n`.
pub fn exp_moment_probe(model: &Model, delta: f64, n: usize, seed: u64, exec: &Exec) -> Result<ExpMomentProbe> {
    let cfg = StationaryConfig { diagnostic: false, ..StationaryConfig::new(n, seed) };
    let s = stationary_sample(model, &cfg, exec)?;
    exp_moment_table(&s.values, delta, &doubling_sizes(n))
}

fn doubling_sizes(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [n / 8, n / 4, n / 2, n].into_iter().filter(|&k| k > 0).collect();
    v.dedup();
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailReportConfig {
    pub n: usize,
    pub seed: u64,
    pub p_list: Vec<f64>,
    /// `None` uses `n/100, n/10, n`.
    pub n_list: Option<Vec<usize>>,
    /// `None` uses `δ_max/2` for light tails, `0.25` otherwise.
    pub delta: Option<f64>,
    /// `None` uses `⌊√n⌋`.
    pub hill_k: Option<usize>,
    /// `None` uses the default burn-in.
    pub burn_in: Option<f64>,
}

impl TailReportConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        TailReportConfig { n, seed, p_list: vec![0.5, 1.0, 2.0, 4.0], n_list: None, delta: None, hill_k: None, burn_in: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub verdict: TailVerdict,
    pub hill_index: f64,
    pub hill_k: usize,
    pub hill_sweep: HillSweep,
    pub moment_table: MomentTable,
    pub exp_moment_probe: ExpMomentProbe,
    pub burn_in: f64,
    pub burn_in_ks: Option<f64>,
    /// No probe contradicts the verdict: moments below `κ` do not explode,
    /// moments above it do not settle, light tails keep the exponential
    /// moment settled and heavy ones do not. Vacuous for `Inconclusive`.
    pub verdict_consistency: bool,
}

pub fn tail_report(model: &Model, cfg: &TailReportConfig, exec: &Exec) -> Result<TailReport> {
    let spec = constant_rate_spec(model)?
        .ok_or_else(|| Error::Contract("tail verdicts need switching rates independent of r".into()))?;
    let verdict = classify_tail(&spec)?;
    let s = stationary_sample(model, &StationaryConfig { burn_in: cfg.burn_in, ..StationaryConfig::new(cfg.n, cfg.seed) }, exec)?;
    let n_list = match &cfg.n_list {
        Some(l) => l.clone(),
        None => {
            let mut l: Vec<usize> = [cfg.n / 100, cfg.n / 10, cfg.n].into_iter().filter(|&k| k > 0).collect();
            l.dedup();
            l
        }
    };
    let moment_table = moment_table(&s.values, &cfg.p_list, &n_list)?;
    let delta = cfg.delta.unwrap_or(match verdict.tail {
        Tail::LightTailed { delta_max } => delta_max / 2.0,
        _ => 0.25,
    });
    let exp_moment_probe = exp_moment_table(&s.values, delta, &doubling_sizes(s.n))?;
    let hill_k = cfg.hill_k.unwrap_or_else(|| default_hill_k(s.n));
    let hill_index = hill_estimator(&s.values, Some(hill_k))?;
    let hill_sweep = hill_sweep(&s.values, &hill_k_grid(s.n, 16))?;

    let verdict_consistency = match verdict.tail {
        Tail::LightTailed { .. } => {
            moment_table.verdicts.iter().all(|(_, v)| *v != ProbeVerdict::Exploding)
                && exp_moment_probe.verdict != ProbeVerdict::Exploding
        }
        Tail::HeavyTailed { kappa } => {
            moment_table.verdicts.iter().all(|(p, v)| {
                if *p < kappa {
                    *v != ProbeVerdict::Exploding
                } else if *p > kappa {
                    *v != ProbeVerdict::Stabilizing
                } else {
                    true
                }
            }) && exp_moment_probe.verdict != ProbeVerdict::Stabilizing
        }
        Tail::Inconclusive { .. } => true,
    };
    Ok(TailReport {
        verdict,
        hill_index,
        hill_k,
        hill_sweep,
        moment_table,
        exp_moment_probe,
        burn_in: s.burn_in,
        burn_in_ks: s.burn_in_ks,
        verdict_consistency,
    })
}
