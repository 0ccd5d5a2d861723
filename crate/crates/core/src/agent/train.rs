use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{advantage_td, update_loss, EncoderKind, Policy, UpdateBatch};
use super::{Algorithm, TrainConfig};
use crate::env::{EnvConfig, Environment, Observation, StepOutcome};
use crate::error::{Error, Result};
use crate::neural::{Adam, Matrix};

/// Floor applied before converting a sensing SNR to dB.
const SNR_FLOOR: f64 = 1e-30;

fn to_db(x: f64) -> f64 {
    10.0 * x.max(SNR_FLOOR).log10()
}

/// One row of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Undiscounted, unscaled episode return.
    pub reward: f64,
    /// Mean over slots of the slot's sum rate (bps/Hz).
    pub sum_rate: f64,
    /// Mean over slots of the worst target's sensing SNR (dB).
    pub min_sensing_snr_db: f64,
    /// Cumulative energy at episode end.
    pub energy_used: f64,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub observation: Observation,
    pub raw_action: Vec<f64>,
    pub log_prob_old: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub algorithm: Algorithm,
    /// `None` for the random baseline.
    pub policy: Option<Policy>,
    pub curve: Vec<EpisodeRecord>,
}

#[derive(Debug, Default)]
struct EpisodeStats {
    reward: f64,
    rate: f64,
    min_snr_db: f64,
    snr_db: f64,
    alt_snr_db: f64,
    snr_samples: usize,
    feasible: usize,
    steps: usize,
}

impl EpisodeStats {
    fn push(&mut self, out: &StepOutcome) {
        self.reward += out.reward.total;
        self.rate += out.metrics.sum_rate();
        self.min_snr_db += to_db(out.metrics.min_sensing_snr());
        for (g, alt) in out.metrics.sensing_snrs.iter().zip(&out.metrics.alt_sensing_snrs) {
            self.snr_db += to_db(*g);
            self.alt_snr_db += to_db(*alt);
            self.snr_samples += 1;
        }
        self.feasible += usize::from(out.metrics.feasibility.all_satisfied());
        self.steps += 1;
    }

    fn record(&self, episode: usize, energy_used: f64) -> EpisodeRecord {
        let n = self.steps.max(1) as f64;
        EpisodeRecord {
            episode,
            reward: self.reward,
            sum_rate: self.rate / n,
            min_sensing_snr_db: self.min_snr_db / n,
            energy_used,
        }
    }
}

/// Per-episode environment seeds, independent of the policy's randomness.
fn episode_seeds(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn uniform_action(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Random baseline: uniform raw actions in `[-1, 1]` through the same projection.
pub fn baseline_random(env_cfg: &EnvConfig, episodes: usize, seed: u64) -> Result<Vec<EpisodeRecord>> {
    let mut seeds = episode_seeds(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Environment::new(env_cfg.clone(), seeds.next_u64())?;
    let dim = env.action_dim();
    let mut curve = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        env.reset(seeds.next_u64())?;
        let mut stats = EpisodeStats::default();
        loop {
            let out = env.step_raw(&uniform_action(dim, &mut rng))?;
            stats.push(&out);
            if out.done {
                break;
            }
        }
        curve.push(stats.record(episode, env.energy_used()));
    }
    Ok(curve)
}

/// Trains the graph actor-critic with relation-typed weights.
pub fn train(env_cfg: &EnvConfig, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_with(EncoderKind::Hetero, Algorithm::Hgrl, env_cfg, cfg, seed)
}

/// Same loop with a single shared relation matrix.
pub fn baseline_grl(env_cfg: &EnvConfig, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_with(EncoderKind::Homo, Algorithm::Grl, env_cfg, cfg, seed)
}

/// Same loop with a dense encoder over the flat state vector.
pub fn baseline_mlp_a2c(env_cfg: &EnvConfig, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_with(EncoderKind::Mlp, Algorithm::MlpA2c, env_cfg, cfg, seed)
}

/// Dispatches on the algorithm; the random baseline returns no policy.
pub fn train_algorithm(algorithm: Algorithm, env_cfg: &EnvConfig, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    match EncoderKind::for_algorithm(algorithm) {
        Some(kind) => train_with(kind, algorithm, env_cfg, cfg, seed),
        None => Ok(TrainOutcome { algorithm, policy: None, curve: baseline_random(env_cfg, cfg.episodes, seed)? }),
    }
}

fn train_with(
    kind: EncoderKind,
    algorithm: Algorithm,
    env_cfg: &EnvConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut seeds = episode_seeds(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Environment::new(env_cfg.clone(), seeds.next_u64())?;
    let mut policy = Policy::new(kind, &env.observation(), env.action_dim(), cfg, &mut rng);
    let mut adam = Adam::new(&policy.store, vec![cfg.actor_lr, cfg.critic_lr]);
    let mut curve = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let mut obs = env.reset(seeds.next_u64())?;
        let mut stats = EpisodeStats::default();
        let mut rollout: Vec<Transition> = Vec::with_capacity(env_cfg.slots);
        loop {
            let out = policy.forward(&obs, &mut rng)?;
            let step = env.step_raw(&out.sample)?;
            stats.push(&step);
            rollout.push(Transition {
                observation: obs,
                raw_action: out.sample,
                log_prob_old: out.log_prob,
                reward: step.reward.total,
                value: out.value,
                done: step.done,
            });
            obs = step.observation;
            if step.done {
                break;
            }
        }
        curve.push(stats.record(episode, env.energy_used()));
        update(&mut policy, &mut adam, rollout, cfg, episode)?;
    }
    Ok(TrainOutcome { algorithm, policy: Some(policy), curve })
}

fn update(policy: &mut Policy, adam: &mut Adam, rollout: Vec<Transition>, cfg: &TrainConfig, episode: usize) -> Result<()> {
    let n = rollout.len();
    let mut advantages = Vec::with_capacity(n);
    let mut returns = Vec::with_capacity(n);
    for (t, tr) in rollout.iter().enumerate() {
        let next_value = rollout.get(t + 1).map_or(0.0, |next| next.value);
        let (adv, target) = advantage_td(cfg.reward_scale * tr.reward, tr.value, next_value, tr.done, cfg.gamma);
        advantages.push(adv);
        returns.push(target);
    }
    if cfg.normalize_advantages && n > 1 {
        let mean = advantages.iter().sum::<f64>() / n as f64;
        let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt() + 1e-8;
        advantages.iter_mut().for_each(|a| *a = (*a - mean) / sd);
    }

    let dim = rollout[0].raw_action.len();
    let actions = Matrix::from_vec(n, dim, rollout.iter().flat_map(|t| t.raw_action.iter().copied()).collect())?;
    let old: Arc<[f64]> = rollout.iter().map(|t| t.log_prob_old).collect();
    let batch = UpdateBatch {
        observations: rollout.into_iter().map(|t| t.observation).collect(),
        actions: Arc::new(actions),
        old_log_probs: old,
        advantages: advantages.into(),
        returns,
    };

    let (parts, mut grads) = update_loss(&policy.arch, &policy.store, &batch, cfg)?;
    if !parts.total.is_finite() || !grads.is_finite() {
        return Err(Error::Diverged { episode, param: "loss".into() });
    }
    grads.clip_global_norm(cfg.grad_clip);
    adam.step(&mut policy.store, &grads);
    let log_std = policy.store.get_mut(policy.arch.log_std);
    log_std.data_mut().iter_mut().for_each(|v| *v = v.clamp(cfg.log_std_min, cfg.log_std_max));
    if let Some(name) = policy.store.first_non_finite() {
        return Err(Error::Diverged { episode, param: name.to_string() });
    }
    Ok(())
}

/// Aggregate metrics of an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    /// Mean episode return.
    pub avg_reward: f64,
    /// Mean per-slot sum rate (bps/Hz).
    pub avg_rate: f64,
    /// Mean over slots and targets of the sensing SNR in dB.
    pub avg_sensing_snr_db: f64,
    /// Mean over slots of the worst target's sensing SNR in dB.
    pub avg_min_sensing_snr_db: f64,
    /// `avg_sensing_snr_db` under the other amplitude mode.
    pub avg_alt_sensing_snr_db: f64,
    pub avg_energy: f64,
    /// Share of slots that satisfied every constraint.
    pub feasible_fraction: f64,
}

/// Runs `episodes` episodes with reset seeds drawn from `seed`. A policy acts
/// greedily (mean action); without one, actions are uniform random.
pub fn evaluate(policy: Option<&Policy>, env_cfg: &EnvConfig, episodes: usize, seed: u64) -> Result<EvalMetrics> {
    let mut seeds = episode_seeds(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Environment::new(env_cfg.clone(), seeds.next_u64())?;
    let dim = env.action_dim();
    let mut total = EpisodeStats::default();
    let mut energy = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset(seeds.next_u64())?;
        loop {
            let raw = match policy {
                Some(p) => p.greedy(&obs)?,
                None => uniform_action(dim, &mut rng),
            };
            let out = env.step_raw(&raw)?;
            total.push(&out);
            obs = out.observation;
            if out.done {
                break;
            }
        }
        energy += env.energy_used();
    }
    let steps = total.steps.max(1) as f64;
    let eps = episodes.max(1) as f64;
    Ok(EvalMetrics {
        episodes,
        avg_reward: total.reward / eps,
        avg_rate: total.rate / steps,
        avg_sensing_snr_db: total.snr_db / total.snr_samples.max(1) as f64,
        avg_alt_sensing_snr_db: total.alt_snr_db / total.snr_samples.max(1) as f64,
        avg_min_sensing_snr_db: total.min_snr_db / steps,
        avg_energy: energy / eps,
        feasible_fraction: total.feasible as f64 / steps,
    })
}
