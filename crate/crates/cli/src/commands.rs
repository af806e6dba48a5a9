//! Command implementations.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use cirregime::analyze::{bessel_check, ergodic_average, tail_report, ErgodicConfig, TailReportConfig};
use cirregime::classify::{classify, classify_recurrence_state_dep};
use cirregime::model::Model;
use cirregime::simulate::{simulate_paths, Scheme, SimConfig};
use cirregime::spectral::{kappa, spectral_curve};
use cirregime::{Error, Exec, ModelSpec};

use crate::manifest::{sidecar_path, write_with_manifest, ManifestBuilder};
use crate::{Command, SchemeArg};

/// KS threshold of the time-change check.
pub const BESSEL_KS_THRESHOLD: f64 = 0.02;
/// Tail reports on fewer stationary draws carry a warning.
pub const TAILS_MIN_N: u64 = 1000;

pub struct Outcome {
    pub json: Value,
    pub warnings: Vec<String>,
    pub code: u8,
}

impl Outcome {
    fn ok(json: Value, warnings: Vec<String>) -> Self {
        Outcome { json, warnings, code: 0 }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(Error::Parse { .. } | Error::Structural(_) | Error::Io(_)) => 2,
            CliError::Lib(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    One,
    Value,
    ValuePow(f64),
    /// One-based regime label.
    Regime(usize),
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::One => f.write_str("one"),
            Functional::Value => f.write_str("value"),
            Functional::ValuePow(p) => write!(f, "value^p:{p}"),
            Functional::Regime(i) => write!(f, "regime:{i}"),
        }
    }
}

pub fn parse_functional(s: &str) -> Result<Functional, String> {
    match s {
        "one" => Ok(Functional::One),
        "value" => Ok(Functional::Value),
        _ => {
            if let Some(p) = s.strip_prefix("value^p:") {
                let p: f64 = p.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
                if !p.is_finite() {
                    return Err(format!("bad exponent in {s:?}"));
                }
                Ok(Functional::ValuePow(p))
            } else if let Some(i) = s.strip_prefix("regime:") {
                match i.parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(Functional::Regime(i)),
                    _ => Err(format!("bad regime label in {s:?} (one-based)")),
                }
            } else {
                Err(format!("unknown functional {s:?}; expected one, value, value^p:<p> or regime:<i>"))
            }
        }
    }
}

/// `±inf` as strings, like the library's JSON.
fn ext(v: f64) -> Value {
    if v == f64::INFINITY {
        json!("inf")
    } else if v == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(v)
    }
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad {what} entry {t:?}"))))
        .collect()
}

fn parse_orderings(s: &str, n: usize) -> CliResult<Vec<Vec<usize>>> {
    s.split(';')
        .map(|o| {
            let perm = o
                .split(',')
                .map(|t| match t.trim().parse::<usize>() {
                    Ok(k) if (1..=n).contains(&k) => Ok(k - 1),
                    _ => Err(CliError::Usage(format!("bad regime label {t:?} in ordering {o:?}"))),
                })
                .collect::<CliResult<Vec<usize>>>()?;
            let mut seen = perm.clone();
            seen.sort_unstable();
            if seen != (0..n).collect::<Vec<_>>() {
                return Err(CliError::Usage(format!("ordering {o:?} is not a permutation of 1..={n}")));
            }
            Ok(perm)
        })
        .collect()
}

fn load(path: &Path) -> CliResult<(Model, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Usage(format!("model file is not UTF-8: {e}")))?;
    Ok((Model::from_json(&text)?, bytes))
}

/// Constant-rate spec, or a contract error naming the command.
fn constant_spec(model: &Model, what: &str) -> CliResult<ModelSpec> {
    match model {
        Model::Homogeneous(m) => Ok(m.clone()),
        Model::StateDependent(sd) if sd.is_time_homogeneous() => {
            let s = sd.base();
            Ok(ModelSpec::new(s.a().to_vec(), s.b().to_vec(), s.sigma().to_vec(), sd.q_at(0.0))?)
        }
        Model::StateDependent(_) => {
            Err(Error::Contract(format!("{what} needs switching rates that do not depend on r")).into())
        }
    }
}

fn with_manifest(mut json: Value, manifest: &ManifestBuilder) -> Value {
    json["manifest"] = serde_json::to_value(manifest.finish()).expect("serializable");
    json
}

pub fn run(command: Command, exec: &Exec) -> CliResult<Outcome> {
    match command {
        Command::Validate { model } => validate(&model),
        Command::Classify { model, orderings, p_grid } => classify_cmd(&model, orderings.as_deref(), p_grid.as_deref()),
        Command::Spectral { model, p_min, p_max, p_steps, out } => spectral(&model, p_min, p_max, p_steps as usize, out),
        Command::Simulate { model, x0, horizon, dt, paths, scheme, substeps, seed, out } => {
            simulate(&model, x0, horizon, dt, paths as usize, scheme, substeps as usize, seed, &out, exec)
        }
        Command::Tails { model, n, burn_in, p_list, seed, out_dir } => tails(&model, n, burn_in, &p_list, seed, out_dir, exec),
        Command::BesselCheck { model, t, n, x0, seed } => bessel(&model, t, n as usize, x0, seed, exec),
        Command::Ergodic { model, f, horizon, dt, x0, seed } => ergodic(&model, f, horizon, dt, x0, seed),
    }
}

fn validate(path: &Path) -> CliResult<Outcome> {
    let (model, bytes) = load(path)?;
    let m = ManifestBuilder::new("validate", path, &bytes);
    let report = model.validate();
    let first = report.first_failure().map(|c| c.code.code());
    let json = json!({
        "usable": report.usable,
        "first_failure": first,
        "conditions": report.conditions,
    });
    Ok(Outcome { json: with_manifest(json, &m), warnings: Vec::new(), code: if report.usable { 0 } else { 1 } })
}

fn classify_cmd(path: &Path, orderings: Option<&str>, p_grid: Option<&str>) -> CliResult<Outcome> {
    let (model, bytes) = load(path)?;
    let m = ManifestBuilder::new("classify", path, &bytes).param("orderings", orderings).param("p_grid", p_grid);
    model.require_usable()?;
    let n = model.spec().n_regimes();
    let extra = match orderings {
        Some(s) => parse_orderings(s, n)?,
        None => Vec::new(),
    };
    let grid = p_grid.map(|g| parse_list(g, "p-grid")).transpose()?;
    let mut warnings = Vec::new();
    let mut json = match &model {
        Model::Homogeneous(spec) => {
            if !extra.is_empty() {
                warnings.push("orderings only apply to rate-level dependent models".into());
            }
            serde_json::to_value(classify(spec)?).expect("serializable")
        }
        Model::StateDependent(sd) => {
            let v = classify_recurrence_state_dep(sd, &extra)?;
            json!({
                "recurrence": v.verdict,
                "witness": v.witness,
                "notes": ["tail verdicts need switching rates that do not depend on r"],
            })
        }
    };
    if let Some(g) = grid {
        let curve = spectral_curve(model.spec(), &g)?;
        json["curve"] = json!({ "p": curve.p_grid, "eta": curve.eta });
    }
    Ok(Outcome::ok(with_manifest(json, &m), warnings))
}

fn spectral(path: &Path, p_min: f64, p_max: f64, steps: usize, out: Option<PathBuf>) -> CliResult<Outcome> {
    if !(p_max > p_min) {
        return Err(CliError::Usage(format!("--p-max ({p_max}) must exceed --p-min ({p_min})")));
    }
    let (model, bytes) = load(path)?;
    let m = ManifestBuilder::new("spectral", path, &bytes).param("p_min", p_min).param("p_max", p_max).param("p_steps", steps);
    model.require_usable()?;
    let mut warnings = Vec::new();
    if matches!(model, Model::StateDependent(_)) {
        warnings.push("spectral quantities use the reference rate matrix Q".into());
    }
    let grid: Vec<f64> = (0..steps).map(|k| p_min + (p_max - p_min) * k as f64 / (steps - 1) as f64).collect();
    let curve = spectral_curve(model.spec(), &grid)?;
    let report = kappa(model.spec())?;
    let bracket = curve
        .p_grid
        .windows(2)
        .zip(curve.eta.windows(2))
        .find(|(p, e)| p[0] >= 0.0 && e[0] > 0.0 && e[1] <= 0.0)
        .map(|(p, _)| [p[0], p[1]]);
    let mut json = json!({
        "kappa": ext(report.kappa),
        "kappa_bound": ext(report.upper_bound),
        "drift_positive": report.drift_positive,
        "eta_tilde_1": curve.eta_tilde_1,
        "sign_change": bracket,
        "points": curve.p_grid.len(),
    });
    if let Some(out) = &out {
        write_with_manifest(out, &curve.to_csv(), &m.finish())?;
        json["out"] = json!(out.display().to_string());
        json["manifest_path"] = json!(sidecar_path(out).display().to_string());
    }
    Ok(Outcome::ok(with_manifest(json, &m), warnings))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    path: &Path,
    x0: f64,
    horizon: f64,
    dt: f64,
    paths: usize,
    scheme: SchemeArg,
    substeps: usize,
    seed: u64,
    out: &Path,
    exec: &Exec,
) -> CliResult<Outcome> {
    let (model, bytes) = load(path)?;
    let scheme = match scheme {
        SchemeArg::Exact => Scheme::ExactNCChi2,
        SchemeArg::Euler => Scheme::FullTruncationEuler,
    };
    let m = ManifestBuilder::new("simulate", path, &bytes)
        .seed(seed)
        .param("x0", x0)
        .param("horizon", horizon)
        .param("dt", dt)
        .param("paths", paths)
        .param("scheme", scheme)
        .param("substeps", substeps);
    let steps = (horizon / dt).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| (k as f64 * dt).min(horizon)).collect();
    let cfg = SimConfig { euler_substeps: substeps, ..SimConfig::new(x0, grid, paths, scheme, seed) };
    let bundle = simulate_paths(&model, &cfg, exec)?;
    write_with_manifest(out, &bundle.to_csv(), &m.finish())?;
    let terminal = bundle.terminal();
    let mut warnings = Vec::new();
    if bundle.positivity_violations > 0 {
        warnings.push(format!("{} Euler steps ended at a nonpositive value", bundle.positivity_violations));
    }
    let json = json!({
        "out": out.display().to_string(),
        "manifest_path": sidecar_path(out).display().to_string(),
        "scheme": scheme,
        "n_paths": bundle.n_paths(),
        "n_times": bundle.time_grid.len(),
        "positivity_violations": bundle.positivity_violations,
        "terminal_mean": terminal.iter().sum::<f64>() / terminal.len() as f64,
    });
    Ok(Outcome::ok(with_manifest(json, &m), warnings))
}

fn tails(
    path: &Path,
    n: u64,
    burn_in: Option<f64>,
    p_list: &str,
    seed: u64,
    out_dir: Option<PathBuf>,
    exec: &Exec,
) -> CliResult<Outcome> {
    let p_list = parse_list(p_list, "p-list")?;
    let (model, bytes) = load(path)?;
    let m = ManifestBuilder::new("tails", path, &bytes)
        .seed(seed)
        .param("n", n)
        .param("burn_in", burn_in)
        .param("p_list", &p_list);
    let mut warnings = Vec::new();
    if n < TAILS_MIN_N {
        warnings.push(format!("n = {n} is below {TAILS_MIN_N}; tail estimates are unreliable"));
    }
    let cfg = TailReportConfig { p_list, burn_in, ..TailReportConfig::new(n as usize, seed) };
    let report = tail_report(&model, &cfg, exec)?;
    let mut json = serde_json::to_value(&report).expect("serializable");
    json["verdict"]["kappa"] = ext(report.verdict.kappa);
    json["warnings"] = json!(warnings);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(&dir)?;
        let manifest = m.finish();
        let hill = dir.join("hill_sweep.csv");
        let moments = dir.join("moments.csv");
        write_with_manifest(&hill, &report.hill_sweep.to_csv(), &manifest)?;
        write_with_manifest(&moments, &report.moment_table.to_csv(), &manifest)?;
        json["files"] = json!([hill.display().to_string(), moments.display().to_string()]);
    }
    Ok(Outcome::ok(with_manifest(json, &m), warnings))
}

fn bessel(path: &Path, t: f64, n: usize, x0: f64, seed: u64, exec: &Exec) -> CliResult<Outcome> {
    let (model, bytes) = load(path)?;
    let m = ManifestBuilder::new("bessel-check", path, &bytes).seed(seed).param("t", t).param("n", n).param("x0", x0);
    let spec = constant_spec(&model, "the time-change check")?;
    let c = bessel_check(&spec, x0, t, n, seed, exec)?;
    let pass = c.ks < BESSEL_KS_THRESHOLD;
    let json = json!({
        "ks": c.ks,
        "pass": pass,
        "threshold": BESSEL_KS_THRESHOLD,
        "t": c.t,
        "n": c.n,
        "direct_mean": c.direct_mean,
        "transformed_mean": c.transformed_mean,
    });
    Ok(Outcome { json: with_manifest(json, &m), warnings: Vec::new(), code: if pass { 0 } else { 1 } })
}

fn ergodic(path: &Path, f: Functional, horizon: f64, dt: f64, x0: f64, seed: u64) -> CliResult<Outcome> {
    let (model, bytes) = load(path)?;
    let m = ManifestBuilder::new("ergodic", path, &bytes)
        .seed(seed)
        .param("f", f.to_string())
        .param("horizon", horizon)
        .param("dt", dt)
        .param("x0", x0);
    let n = model.spec().n_regimes();
    if let Functional::Regime(i) = f {
        if i > n {
            return Err(CliError::Usage(format!("regime:{i} out of range, model has {n} regimes")));
        }
    }
    let mut warnings = Vec::new();
    let power = match f {
        Functional::Value => Some(1.0),
        Functional::ValuePow(p) => Some(p),
        _ => None,
    };
    if let (Some(p), Ok(spec)) = (power, constant_spec(&model, "")) {
        if spec.satisfies_h1() {
            let k = kappa(&spec)?.kappa;
            if p >= k {
                warnings.push(format!(
                    "p = {p} >= kappa = {k}: the stationary p-th moment is infinite and the time average does not converge"
                ));
            }
        }
    }
    let cfg = ErgodicConfig { x0, dt, ..ErgodicConfig::new(horizon, seed) };
    let func = move |v: f64, l: usize| match f {
        Functional::One => 1.0,
        Functional::Value => v,
        Functional::ValuePow(p) => v.powf(p),
        Functional::Regime(i) => f64::from(u8::from(l + 1 == i)),
    };
    let average = ergodic_average(&model, &func, &cfg)?;
    let json = json!({
        "f": f.to_string(),
        "average": average,
        "horizon": horizon,
        "dt": dt,
        "integrable": warnings.is_empty(),
        "warnings": warnings,
    });
    Ok(Outcome::ok(with_manifest(json, &m), warnings))
}
