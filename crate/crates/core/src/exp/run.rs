//! Executing runs and writing their artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{summarize, Summary};
use crate::agent::{evaluate, train_algorithm, Algorithm, EncoderKind, EpisodeRecord, EvalMetrics, Policy};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::geometry::DeploymentKind;
use crate::neural::checkpoint::{load_checkpoint, write_checkpoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub deployment: DeploymentKind,
    pub per_antenna_power: f64,
    pub seed: u64,
}

impl RunSpec {
    /// File stem shared by the curve and checkpoint, e.g. `hgrl_3d_0.1W_seed1`.
    pub fn stem(&self) -> String {
        format!(
            "{}_{}_{:?}W_seed{}",
            self.algorithm,
            self.deployment.to_string().to_ascii_lowercase(),
            self.per_antenna_power,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub spec: RunSpec,
    pub scenario_hash: String,
    pub eval: EvalMetrics,
    /// Mean and population std of the episode return over the final window.
    pub final_reward_mean: f64,
    pub final_reward_std: f64,
    pub curve_path: PathBuf,
    pub checkpoint: Option<PathBuf>,
    #[serde(skip)]
    pub curve: Vec<EpisodeRecord>,
}

/// Every combination, in deployment, power, algorithm, seed order.
pub fn grid(
    deployments: &[DeploymentKind],
    powers: &[f64],
    algorithms: &[Algorithm],
    seeds: &[u64],
) -> Vec<RunSpec> {
    let mut specs = Vec::new();
    for &deployment in deployments {
        for &per_antenna_power in powers {
            for &algorithm in algorithms {
                for &seed in seeds {
                    specs.push(RunSpec { algorithm, deployment, per_antenna_power, seed });
                }
            }
        }
    }
    specs
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn write_curve(path: &Path, curve: &[EpisodeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for rec in curve {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Trains (or runs the random baseline), evaluates greedily and writes the
/// learning curve and, for learned algorithms, a checkpoint under `out`.
pub fn run_one(cfg: &ExperimentConfig, spec: RunSpec, out: &Path) -> Result<RunResult> {
    let env_cfg = cfg.env_config(spec.deployment, spec.per_antenna_power);
    let outcome = train_algorithm(spec.algorithm, &env_cfg, &cfg.train, spec.seed)?;
    let eval = evaluate(outcome.policy.as_ref(), &env_cfg, cfg.eval_episodes, cfg.eval_seed)?;

    let curves = out.join("curves");
    fs::create_dir_all(&curves)?;
    let curve_path = curves.join(format!("{}.csv", spec.stem()));
    write_curve(&curve_path, &outcome.curve)?;
    let checkpoint = match &outcome.policy {
        Some(policy) => {
            let dir = out.join("checkpoints");
            fs::create_dir_all(&dir)?;
            let path = dir.join(format!("{}.json", spec.stem()));
            write_checkpoint(&policy.store, &path)?;
            Some(path)
        }
        None => None,
    };

    let tail: Vec<f64> =
        outcome.curve.iter().rev().take(cfg.final_window).map(|r| r.reward).collect();
    let (final_reward_mean, final_reward_std) = mean_std(&tail);
    Ok(RunResult {
        spec,
        scenario_hash: cfg.scenario_hash(spec.per_antenna_power),
        eval,
        final_reward_mean,
        final_reward_std,
        curve_path,
        checkpoint,
        curve: outcome.curve,
    })
}

/// Runs every spec in parallel. A failing run is reported in place and does
/// not stop the others.
pub fn run_all(cfg: &ExperimentConfig, specs: &[RunSpec], out: &Path) -> Vec<(RunSpec, Result<RunResult>)> {
    specs.par_iter().map(|&spec| (spec, run_one(cfg, spec, out))).collect()
}

/// Rebuilds a policy from a checkpoint for the given algorithm and deployment.
pub fn load_policy(
    cfg: &ExperimentConfig,
    algorithm: Algorithm,
    deployment: DeploymentKind,
    per_antenna_power: f64,
    path: &Path,
) -> Result<Policy> {
    let kind = EncoderKind::for_algorithm(algorithm)
        .ok_or_else(|| Error::InvalidScenario("the random baseline has no checkpoint".into()))?;
    let env = Environment::new(cfg.env_config(deployment, per_antenna_power), 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut policy = Policy::new(kind, &env.observation(), env.action_dim(), &cfg.train, &mut rng);
    load_checkpoint(&mut policy.store, path)?;
    Ok(policy)
}

/// Outcome of a batch of runs after its artifacts have been written.
#[derive(Debug)]
pub struct BatchOutcome {
    pub results: Vec<RunResult>,
    pub failures: Vec<(RunSpec, Error)>,
    pub summary: Summary,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    runs: &'a [RunResult],
    failures: Vec<FailureRow>,
    summary: &'a Summary,
}

#[derive(Serialize)]
struct FailureRow {
    spec: RunSpec,
    error: String,
}

/// Runs `specs`, then writes `summary.csv`, `report.json`,
/// `config.resolved.toml` and `curves.gp` into `out`.
pub fn run_batch(cfg: &ExperimentConfig, specs: &[RunSpec], out: &Path) -> Result<BatchOutcome> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.resolved.toml"), cfg.to_toml())?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (spec, res) in run_all(cfg, specs, out) {
        match res {
            Ok(r) => results.push(r),
            Err(e) => failures.push((spec, e)),
        }
    }
    let summary = summarize(&results)?;
    summary.write_csv(&out.join("summary.csv"))?;
    let report = ReportFile {
        runs: &results,
        failures: failures.iter().map(|(spec, e)| FailureRow { spec: *spec, error: e.to_string() }).collect(),
        summary: &summary,
    };
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(out.join("curves.gp"), gnuplot_script(&results))?;
    Ok(BatchOutcome { results, failures, summary })
}

/// Plots the episode return of every run, every tenth episode.
fn gnuplot_script(results: &[RunResult]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key outside right\nset xlabel 'episode'\nset ylabel 'episode reward'\n\
         set terminal pngcairo size 1200,700\nset output 'curves.png'\n",
    );
    let plots: Vec<String> = results
        .iter()
        .filter_map(|r| {
            let name = r.curve_path.file_name()?.to_string_lossy().into_owned();
            Some(format!("'curves/{name}' using 1:2 every 10 with lines title '{}'", r.spec.stem()))
        })
        .collect();
    if !plots.is_empty() {
        s.push_str("plot ");
        s.push_str(&plots.join(", \\\n     "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_and_grid_order() {
        let spec = RunSpec { algorithm: Algorithm::MlpA2c, deployment: DeploymentKind::ThreeD, per_antenna_power: 0.1, seed: 3 };
        assert_eq!(spec.stem(), "mlp_a2c_3d_0.1W_seed3");
        let g = grid(&DeploymentKind::ALL, &[0.1, 0.02], &[Algorithm::Hgrl], &[1, 2]);
        assert_eq!(g.len(), 12);
        assert_eq!(g[0].deployment, DeploymentKind::OneD);
        assert_eq!((g[1].seed, g[2].per_antenna_power), (2, 0.02));
    }

    #[test]
    fn curve_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let curve = vec![
            EpisodeRecord { episode: 0, reward: -1.25, sum_rate: 3.5, min_sensing_snr_db: 4.75, energy_used: 6.0 },
            EpisodeRecord { episode: 1, reward: 0.1, sum_rate: 1.0 / 3.0, min_sensing_snr_db: -300.0, energy_used: 0.0 },
        ];
        write_curve(&path, &curve).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("episode,reward,sum_rate,min_sensing_snr_db,energy_used\n"));
        assert_eq!(read_curve(&path).unwrap(), curve);
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert!(mean_std(&[]).0.is_nan());
    }
}
