//! Graph actor-critic training and its baselines.
//!
//! The policy is a diagonal Gaussian over the raw action vector; its mean
//! comes from an encoder (relation-typed graph layers, a homogeneous graph
//! or a plain dense network), mean pooling and an actor head, while a critic
//! head shares the encoder. Each rollout of one episode is followed by a
//! single update of the clipped surrogate plus value loss.

mod policy;
mod train;

#[cfg(test)]
mod tests;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use policy::{
    advantage_td, clipped_policy_loss, gaussian_entropy, gaussian_log_density, update_loss, value_loss, Architecture,
    EncoderKind, Heads, LossParts, Policy, PolicyOutput, UpdateBatch, ACTOR_GROUP, CRITIC_GROUP,
};
pub use train::{
    baseline_grl, baseline_mlp_a2c, baseline_random, evaluate, train, train_algorithm, EpisodeRecord, EvalMetrics,
    TrainOutcome, Transition,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Hgrl,
    Grl,
    MlpA2c,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Hgrl, Algorithm::Grl, Algorithm::MlpA2c, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hgrl => "hgrl",
            Algorithm::Grl => "grl",
            Algorithm::MlpA2c => "mlp_a2c",
            Algorithm::Random => "random",
        }
    }

    pub fn is_learned(self) -> bool {
        self != Algorithm::Random
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidScenario(format!("unknown algorithm `{s}` (hgrl, grl, mlp_a2c, random)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub clip_eps: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Global gradient-norm threshold.
    pub grad_clip: f64,
    pub hidden: usize,
    /// Graph (or dense) layers in the encoder.
    pub encoder_layers: usize,
    pub log_std_init: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    /// Rewards are multiplied by this before advantages and value targets.
    pub reward_scale: f64,
    /// Standardize advantages within each rollout.
    pub normalize_advantages: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            gamma: 0.99,
            clip_eps: 0.2,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            entropy_coef: 0.01,
            value_coef: 0.5,
            grad_clip: 1.0,
            hidden: 64,
            encoder_layers: 2,
            log_std_init: 0.5f64.ln(),
            log_std_min: -5.0,
            log_std_max: 1.0,
            reward_scale: 0.1,
            normalize_advantages: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_string()));
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip epsilon must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0 && self.grad_clip > 0.0) {
            return bad("learning rates and the gradient clip must be positive");
        }
        if self.hidden == 0 || self.encoder_layers == 0 {
            return bad("hidden size and encoder layers must be positive");
        }
        if !(self.log_std_min <= self.log_std_init && self.log_std_init <= self.log_std_max) {
            return bad("log_std_init must lie within [log_std_min, log_std_max]");
        }
        if !(self.reward_scale > 0.0 && self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return bad("reward scale must be positive and loss weights non-negative");
        }
        Ok(())
    }
}
