use std::fs;
use std::path::Path;

use pinch_isac::agent::Algorithm;
use pinch_isac::error::Error;
use pinch_isac::exp::{grid, load_config, parse_config, read_curve, run_batch, ExperimentConfig};
use pinch_isac::geometry::DeploymentKind;

fn reference() -> ExperimentConfig {
    load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")).unwrap()
}

#[test]
fn reference_config_resolves_to_the_documented_scenario() {
    let c = reference();
    let s = &c.scenario;
    assert_eq!((s.users, s.targets, s.slots), (6, 1, 10));
    assert_eq!((s.area, s.height, s.carrier_freq), (50.0, 10.0, 28e9));
    assert!((s.delta - 5.3534e-3).abs() < 1e-7);
    assert!((s.noise_power - 1e-12).abs() < 1e-24);
    assert_eq!(c.per_antenna_powers, vec![0.1, 0.02]);
    assert_eq!(c.seeds.len(), 3);
    assert_eq!(c.algorithms, Algorithm::ALL.to_vec());
    assert_eq!(c.total_antennas(DeploymentKind::OneD), 6);
    assert_eq!(c.total_antennas(DeploymentKind::ThreeD), 18);
    let env = c.env_config(DeploymentKind::TwoD, 0.02);
    assert!((env.p_max - 0.36).abs() < 1e-15);
    assert_eq!(env.energy_budget, 1000.0);
}

#[test]
fn resolved_echo_reloads_to_the_same_config() {
    let c = reference();
    let back = parse_config(&c.to_toml(), Path::new("echo.toml")).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.scenario_hash(0.1), c.scenario_hash(0.1));
}

#[test]
fn config_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[scenario]\nusers = \"six\"\n").unwrap();
    match load_config(&path) {
        Err(Error::Config { path: p, .. }) => assert_eq!(p, path),
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(matches!(load_config(&dir.path().join("missing.toml")), Err(Error::Config { .. })));
}

#[test]
fn batch_writes_every_artifact() {
    let mut cfg = reference();
    cfg.train.episodes = 4;
    cfg.train.hidden = 8;
    cfg.eval_episodes = 2;
    let out = tempfile::tempdir().unwrap();
    let specs = grid(&[DeploymentKind::OneD, DeploymentKind::ThreeD], &[0.1], &[Algorithm::Hgrl, Algorithm::Random], &[1]);
    let batch = run_batch(&cfg, &specs, out.path()).unwrap();
    assert!(batch.failures.is_empty());
    assert_eq!(batch.results.len(), 4);

    for r in &batch.results {
        assert_eq!(read_curve(&r.curve_path).unwrap(), r.curve);
        assert_eq!(r.checkpoint.is_some(), r.spec.algorithm.is_learned());
    }
    assert!(out.path().join("curves/hgrl_1d_0.1W_seed1.csv").exists());
    assert!(out.path().join("checkpoints/hgrl_3d_0.1W_seed1.json").exists());
    assert!(!out.path().join("checkpoints/random_3d_0.1W_seed1.json").exists());

    let summary = fs::read_to_string(out.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.starts_with("deployment,algorithm,per_antenna_power_w,"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 4);
    assert_eq!(batch.summary.warnings.len(), 4, "one seed per cell warns");
    let resolved = fs::read_to_string(out.path().join("config.resolved.toml")).unwrap();
    assert_eq!(parse_config(&resolved, Path::new("r.toml")).unwrap(), cfg);
    assert!(fs::read_to_string(out.path().join("curves.gp")).unwrap().contains("hgrl_3d_0.1W_seed1.csv"));
}

#[test]
fn a_failing_run_does_not_stop_its_siblings() {
    let mut cfg = reference();
    cfg.train.episodes = 2;
    cfg.train.hidden = 4;
    cfg.eval_episodes = 1;
    // A power cap of zero makes the environment reject its scenario.
    let specs = grid(&[DeploymentKind::OneD], &[0.1, 0.0], &[Algorithm::Random], &[1]);
    let out = tempfile::tempdir().unwrap();
    let batch = run_batch(&cfg, &specs, out.path()).unwrap();
    assert_eq!(batch.results.len(), 1);
    assert_eq!(batch.failures.len(), 1);
    assert_eq!(batch.failures[0].0.per_antenna_power, 0.0);
}
