use cirregime::analyze::{ergodic_average, stationary_sample, ErgodicConfig, StationaryConfig};
use cirregime::classify::{classify, Recurrence, TailSummary};
use cirregime::model::Model;
use cirregime::simulate::{simulate_paths, Scheme, SimConfig};
use cirregime::spectral::{eta, kappa};
use cirregime::Exec;

const HEAVY: &str = r#"{"regimes": 2, "a": [2, -0.5], "b": [1, -4], "sigma": [1, 1], "Q": [[-1, 1], [1, -1]]}"#;
const LOGISTIC: &str = r#"{"regimes": 2, "a": [2, -0.5], "b": [1, -4], "sigma": [1, 1], "Q": [[-2, 2], [1, -1]],
  "state_dependent": {"12": {"kind": "logistic", "low": 1, "high": 3, "steepness": 1}}}"#;

fn engines() -> [Exec; 3] {
    [Exec::Sequential, Exec::Parallel { threads: Some(3) }, Exec::Parallel { threads: None }]
}

#[test]
fn heavy_model_end_to_end() {
    let model = Model::from_json(HEAVY).unwrap();
    model.require_usable().unwrap();
    let c = classify(model.spec()).unwrap();
    assert_eq!(c.recurrence, Recurrence::PositiveRecurrent);
    assert!(matches!(c.tail, Some(TailSummary { .. })));
    let k = kappa(model.spec()).unwrap().kappa;
    assert!((k - 1.5).abs() < 1e-6);
    assert!(eta(model.spec(), k).unwrap().abs() < 1e-8);
    assert!((c.kappa - k).abs() < 1e-12);
}

#[test]
fn simulation_is_engine_independent() {
    let model = Model::from_json(HEAVY).unwrap();
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    for scheme in [Scheme::ExactNCChi2, Scheme::FullTruncationEuler] {
        let cfg = SimConfig::new(1.0, grid.clone(), 17, scheme, 5);
        let runs: Vec<_> = engines().iter().map(|e| simulate_paths(&model, &cfg, e).unwrap().to_csv()).collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }
}

#[test]
fn stationary_sample_is_engine_independent() {
    let model = Model::from_json(HEAVY).unwrap();
    let cfg = StationaryConfig { diagnostic: false, ..StationaryConfig::new(64, 11) };
    let a = stationary_sample(&model, &cfg, &Exec::Sequential).unwrap();
    let b = stationary_sample(&model, &cfg, &Exec::Parallel { threads: Some(4) }).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.regimes, b.regimes);
    assert!(a.values.iter().all(|&v| v > 0.0));
}

#[test]
fn state_dependent_model_runs_under_euler_only() {
    let model = Model::from_json(LOGISTIC).unwrap();
    let grid = vec![0.0, 0.5, 1.0];
    let exact = SimConfig::new(1.0, grid.clone(), 4, Scheme::ExactNCChi2, 1);
    assert!(simulate_paths(&model, &exact, &Exec::Sequential).is_err());
    let euler = SimConfig::new(1.0, grid, 4, Scheme::FullTruncationEuler, 1);
    let bundle = simulate_paths(&model, &euler, &Exec::Sequential).unwrap();
    assert_eq!(bundle.n_paths(), 4);
    assert!(bundle.r_values.iter().flatten().all(|&v| v >= 0.0));
}

#[test]
fn ergodic_occupation_of_symmetric_chain() {
    let model = Model::from_json(HEAVY).unwrap();
    let cfg = ErgodicConfig::new(5_000.0, 2);
    let occ = ergodic_average(&model, &|_, l| f64::from(u8::from(l == 0)), &cfg).unwrap();
    assert!((occ - 0.5).abs() < 0.02, "occupation {occ}");
}
