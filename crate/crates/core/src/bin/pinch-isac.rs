use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pinch_isac::agent::{evaluate, Algorithm};
use pinch_isac::error::Result;
use pinch_isac::exp::{grid, load_config, load_policy, run_batch, BatchOutcome, ExperimentConfig};
use pinch_isac::geometry::DeploymentKind;

#[derive(Parser)]
#[command(name = "pinch-isac", version, about = "Pinching-antenna ISAC simulation and graph actor-critic training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm on one deployment for every seed.
    Train(Common),
    /// Evaluate a checkpoint, or the random baseline, greedily.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint written by `train`; required for learned algorithms.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the configured algorithm on every deployment and power level.
    CompareDeployments(Common),
    /// Train every configured algorithm on one deployment.
    CompareAlgorithms(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "configs/reference.toml")]
    config: PathBuf,
    /// Overrides the configured seeds; repeatable.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory; defaults to the config's `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    deployment: Option<DeploymentKind>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Per-antenna power cap in watts.
    #[arg(long)]
    per_antenna_power: Option<f64>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(&self.config)?;
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(d) = self.deployment {
            cfg.deployment = d;
            cfg.deployments = vec![d];
        }
        if let Some(a) = self.algorithm {
            cfg.algorithm = a;
            cfg.algorithms = vec![a];
        }
        if let Some(n) = self.episodes {
            cfg.train.episodes = n;
        }
        if let Some(p) = self.per_antenna_power {
            cfg.per_antenna_power = p;
            cfg.per_antenna_powers = vec![p];
        }
        Ok(cfg)
    }
}

fn report(outcome: &BatchOutcome, cfg: &ExperimentConfig) -> ExitCode {
    print!("{}", outcome.summary.render());
    println!("artifacts in {}", cfg.output_dir.display());
    for (spec, err) in &outcome.failures {
        eprintln!("run {} failed: {err}", spec.stem());
    }
    if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.resolve()?;
            let specs = grid(&[cfg.deployment], &[cfg.per_antenna_power], &[cfg.algorithm], &cfg.seeds);
            let outcome = run_batch(&cfg, &specs, &cfg.output_dir)?;
            Ok(report(&outcome, &cfg))
        }
        Command::CompareDeployments(common) => {
            let cfg = common.resolve()?;
            let specs = grid(&cfg.deployments, &cfg.per_antenna_powers, &[cfg.algorithm], &cfg.seeds);
            let outcome = run_batch(&cfg, &specs, &cfg.output_dir)?;
            Ok(report(&outcome, &cfg))
        }
        Command::CompareAlgorithms(common) => {
            let cfg = common.resolve()?;
            let specs = grid(&[cfg.deployment], &[cfg.per_antenna_power], &cfg.algorithms, &cfg.seeds);
            let outcome = run_batch(&cfg, &specs, &cfg.output_dir)?;
            Ok(report(&outcome, &cfg))
        }
        Command::Eval { common, checkpoint } => {
            let cfg = common.resolve()?;
            let env_cfg = cfg.env_config(cfg.deployment, cfg.per_antenna_power);
            let policy = match (cfg.algorithm.is_learned(), checkpoint) {
                (true, Some(path)) => {
                    Some(load_policy(&cfg, cfg.algorithm, cfg.deployment, cfg.per_antenna_power, &path)?)
                }
                (true, None) => {
                    eprintln!("error: --checkpoint is required to evaluate {}", cfg.algorithm);
                    return Ok(ExitCode::from(2));
                }
                (false, _) => None,
            };
            let metrics = evaluate(policy.as_ref(), &env_cfg, cfg.eval_episodes, cfg.eval_seed)?;
            println!("{}", serde_json::to_string_pretty(&metrics)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
