//! Strict TOML experiment configuration with unit-bearing values.
//!
//! The document has three sections, `[scenario]`, `[train]` and `[output]`.
//! Unknown keys are rejected. Quantities carry units (`"28 GHz"`,
//! `"-90 dBm"`, `"lambda/2"`); dimensionless values are plain numbers.
//! [`ExperimentConfig::to_toml`] writes the fully resolved configuration
//! back in SI units so that it reloads to identical values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use super::units::{format_quantity, parse_quantity, Dimension};
use crate::agent::{Algorithm, TrainConfig};
use crate::channel::SPEED_OF_LIGHT;
use crate::env::{EnvConfig, Placement, RewardWeights};
use crate::error::{Error, Result};
use crate::geometry::DeploymentKind;
use crate::metrics::AmplitudeMode;

/// How the `antennas` key is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaCount {
    /// `antennas` on every waveguide; 1D has one waveguide, 2D and 3D three.
    PerWaveguide,
    /// `antennas` in total, split as evenly as possible.
    Total,
}

impl AntennaCount {
    fn name(self) -> &'static str {
        match self {
            AntennaCount::PerWaveguide => "per_waveguide",
            AntennaCount::Total => "total",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawQuantity {
    Number(f64),
    Text(String),
}

type Q = Spanned<RawQuantity>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: RawScenario,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    deployment: Option<DeploymentKind>,
    deployments: Option<Vec<DeploymentKind>>,
    users: usize,
    targets: usize,
    antennas: usize,
    antenna_count: Option<AntennaCount>,
    area: Q,
    height: Q,
    carrier_frequency: Q,
    n_eff: f64,
    delta: Q,
    noise_power: Q,
    gamma_min: Q,
    total_power: Q,
    per_antenna_power: Q,
    per_antenna_powers: Option<Vec<Q>>,
    per_user_power: Option<Q>,
    energy_budget: Option<Q>,
    slots: usize,
    snr_amplitude: Option<AmplitudeMode>,
    ring_radius_min: Option<Q>,
    ring_radius_max: Option<Q>,
    target_jitter: Option<Q>,
    step_max: Option<Q>,
    position_scale: Option<Q>,
    context_features: Option<bool>,
    sensing_penalty: Option<f64>,
    spacing_penalty: Option<f64>,
    energy_penalty: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    algorithm: Option<Algorithm>,
    algorithms: Option<Vec<Algorithm>>,
    seeds: Option<Vec<u64>>,
    episodes: Option<usize>,
    gamma: Option<f64>,
    clip_eps: Option<f64>,
    actor_lr: Option<f64>,
    critic_lr: Option<f64>,
    entropy_coef: Option<f64>,
    value_coef: Option<f64>,
    grad_clip: Option<f64>,
    hidden: Option<usize>,
    encoder_layers: Option<usize>,
    log_std_init: Option<f64>,
    log_std_min: Option<f64>,
    log_std_max: Option<f64>,
    reward_scale: Option<f64>,
    normalize_advantages: Option<bool>,
    eval_episodes: Option<usize>,
    eval_seed: Option<u64>,
    final_window: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// Physical scenario shared by every deployment and power level, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub users: usize,
    pub targets: usize,
    pub antennas: usize,
    pub antenna_count: AntennaCount,
    pub area: f64,
    pub height: f64,
    pub carrier_freq: f64,
    pub n_eff: f64,
    pub delta: f64,
    pub noise_power: f64,
    /// Linear.
    pub gamma_min: f64,
    /// Total transmit power, used for the default energy budget (W).
    pub total_power: f64,
    /// Overrides `per_antenna_power * M` as the per-user cap when set (W).
    pub per_user_power: Option<f64>,
    /// Episode energy budget (W x slot).
    pub energy_budget: f64,
    pub slots: usize,
    pub snr_amplitude: AmplitudeMode,
    pub ring_radius_min: f64,
    pub ring_radius_max: f64,
    pub target_jitter: f64,
    pub step_max: f64,
    pub position_scale: f64,
    pub context_features: bool,
    pub weights: RewardWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub deployment: DeploymentKind,
    pub deployments: Vec<DeploymentKind>,
    pub per_antenna_power: f64,
    pub per_antenna_powers: Vec<f64>,
    pub algorithm: Algorithm,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    /// Episodes at the end of a learning curve averaged into the final reward.
    pub final_window: usize,
    pub output_dir: PathBuf,
}

struct Ctx<'a> {
    text: &'a str,
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, span: Option<std::ops::Range<usize>>, message: impl Into<String>) -> Error {
        let message = message.into();
        let message = match span {
            Some(s) => {
                let line = self.text[..s.start.min(self.text.len())].matches('\n').count() + 1;
                format!("line {line}: {message}")
            }
            None => message,
        };
        Error::Config { path: self.path.to_path_buf(), message }
    }

    fn quantity(&self, key: &str, q: &Q, dim: Dimension, wavelength: Option<f64>) -> Result<f64> {
        let parsed = match q.get_ref() {
            RawQuantity::Number(v) if dim == Dimension::Ratio => Ok(*v),
            RawQuantity::Number(v) => Err(format!("`{v}` needs a unit; expected {dim}")),
            RawQuantity::Text(t) => parse_quantity(t, dim, wavelength),
        };
        parsed.map_err(|m| self.err(Some(q.span()), format!("`{key}`: {m}")))
    }

    fn positive(&self, key: &str, q: &Q, dim: Dimension, wavelength: Option<f64>) -> Result<f64> {
        let v = self.quantity(key, q, dim, wavelength)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(Some(q.span()), format!("`{key}` must be positive")))
        }
    }
}

/// Parses a config document; `path` only labels errors.
pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let ctx = Ctx { text, path };
    let raw: RawConfig = toml::from_str(text).map_err(|e| ctx.err(None, e.to_string().trim_end().to_string()))?;
    let s = raw.scenario;

    let carrier_freq = ctx.positive("carrier_frequency", &s.carrier_frequency, Dimension::Frequency, None)?;
    let lambda = SPEED_OF_LIGHT / carrier_freq;
    let wavelength = Some(lambda);
    let len = |key: &str, q: &Q| ctx.positive(key, q, Dimension::Length, wavelength);
    let opt_len = |key: &str, q: &Option<Q>, default: f64| -> Result<f64> {
        q.as_ref().map_or(Ok(default), |q| ctx.quantity(key, q, Dimension::Length, wavelength))
    };
    let power = |key: &str, q: &Q| ctx.positive(key, q, Dimension::Power, None);

    let area = len("area", &s.area)?;
    let slots = s.slots;
    if slots == 0 || s.users == 0 || s.targets == 0 || s.antennas == 0 {
        return Err(ctx.err(None, "`users`, `targets`, `antennas` and `slots` must be at least 1"));
    }
    if !(s.n_eff.is_finite() && s.n_eff > 0.0) {
        return Err(ctx.err(None, "`n_eff` must be positive"));
    }
    let total_power = power("total_power", &s.total_power)?;
    let energy_budget = match &s.energy_budget {
        Some(q) => power("energy_budget", q)?,
        None => total_power * slots as f64,
    };
    let ring_radius_min = opt_len("ring_radius_min", &s.ring_radius_min, 10.0)?;
    let ring_radius_max = opt_len("ring_radius_max", &s.ring_radius_max, 20.0)?;
    if !(0.0 <= ring_radius_min && ring_radius_min <= ring_radius_max) {
        return Err(ctx.err(None, "`ring_radius_min` must lie in [0, ring_radius_max]"));
    }
    let weights = RewardWeights {
        sensing: s.sensing_penalty.unwrap_or(RewardWeights::default().sensing),
        spacing: s.spacing_penalty.unwrap_or(RewardWeights::default().spacing),
        energy: s.energy_penalty.unwrap_or(RewardWeights::default().energy),
    };
    if [weights.sensing, weights.spacing, weights.energy].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(ctx.err(None, "penalty weights must be non-negative"));
    }

    let scenario = ScenarioConfig {
        users: s.users,
        targets: s.targets,
        antennas: s.antennas,
        antenna_count: s.antenna_count.unwrap_or(AntennaCount::Total),
        area,
        height: len("height", &s.height)?,
        carrier_freq,
        n_eff: s.n_eff,
        delta: len("delta", &s.delta)?,
        noise_power: power("noise_power", &s.noise_power)?,
        gamma_min: ctx.positive("gamma_min", &s.gamma_min, Dimension::Ratio, None)?,
        total_power,
        per_user_power: s.per_user_power.as_ref().map(|q| power("per_user_power", q)).transpose()?,
        energy_budget,
        slots,
        snr_amplitude: s.snr_amplitude.unwrap_or_default(),
        ring_radius_min,
        ring_radius_max,
        target_jitter: opt_len("target_jitter", &s.target_jitter, 2.0)?,
        step_max: opt_len("step_max", &s.step_max, lambda)?,
        position_scale: match &s.position_scale {
            Some(q) => len("position_scale", q)?,
            None => area,
        },
        context_features: s.context_features.unwrap_or(false),
        weights,
    };

    let per_antenna_power = power("per_antenna_power", &s.per_antenna_power)?;
    let per_antenna_powers = match &s.per_antenna_powers {
        Some(list) => list.iter().map(|q| power("per_antenna_powers", q)).collect::<Result<Vec<_>>>()?,
        None => vec![per_antenna_power],
    };
    let deployment = s.deployment.unwrap_or(DeploymentKind::ThreeD);

    let t = raw.train;
    let d = TrainConfig::default();
    let train = TrainConfig {
        episodes: t.episodes.unwrap_or(d.episodes),
        gamma: t.gamma.unwrap_or(d.gamma),
        clip_eps: t.clip_eps.unwrap_or(d.clip_eps),
        actor_lr: t.actor_lr.unwrap_or(d.actor_lr),
        critic_lr: t.critic_lr.unwrap_or(d.critic_lr),
        entropy_coef: t.entropy_coef.unwrap_or(d.entropy_coef),
        value_coef: t.value_coef.unwrap_or(d.value_coef),
        grad_clip: t.grad_clip.unwrap_or(d.grad_clip),
        hidden: t.hidden.unwrap_or(d.hidden),
        encoder_layers: t.encoder_layers.unwrap_or(d.encoder_layers),
        log_std_init: t.log_std_init.unwrap_or(d.log_std_init),
        log_std_min: t.log_std_min.unwrap_or(d.log_std_min),
        log_std_max: t.log_std_max.unwrap_or(d.log_std_max),
        reward_scale: t.reward_scale.unwrap_or(d.reward_scale),
        normalize_advantages: t.normalize_advantages.unwrap_or(d.normalize_advantages),
    };
    train.validate().map_err(|e| ctx.err(None, e.to_string()))?;
    let seeds = t.seeds.unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        return Err(ctx.err(None, "`seeds` must list at least one seed"));
    }

    let cfg = ExperimentConfig {
        scenario,
        deployment,
        deployments: s.deployments.unwrap_or_else(|| DeploymentKind::ALL.to_vec()),
        per_antenna_power,
        per_antenna_powers,
        algorithm: t.algorithm.unwrap_or(Algorithm::Hgrl),
        algorithms: t.algorithms.unwrap_or_else(|| Algorithm::ALL.to_vec()),
        seeds,
        train,
        eval_episodes: t.eval_episodes.unwrap_or(100),
        eval_seed: t.eval_seed.unwrap_or(0x00c0_ffee),
        final_window: t.final_window.unwrap_or(100).max(1),
        output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("runs")),
    };
    // Catch infeasible geometry at load time rather than inside a run.
    for &kind in &cfg.deployments {
        crate::env::Environment::new(cfg.env_config(kind, cfg.per_antenna_power), 0)
            .map_err(|e| ctx.err(None, format!("{kind} deployment: {e}")))?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
    parse_config(&text, path)
}

impl ExperimentConfig {
    /// Total antenna count `M` for a deployment.
    pub fn total_antennas(&self, deployment: DeploymentKind) -> usize {
        match self.scenario.antenna_count {
            AntennaCount::Total => self.scenario.antennas,
            AntennaCount::PerWaveguide => self.scenario.antennas * deployment.waveguide_count(),
        }
    }

    /// Per-user power cap: explicit, or the per-antenna cap times `M`.
    pub fn p_max(&self, deployment: DeploymentKind, per_antenna_power: f64) -> f64 {
        self.scenario.per_user_power.unwrap_or(per_antenna_power * self.total_antennas(deployment) as f64)
    }

    pub fn env_config(&self, deployment: DeploymentKind, per_antenna_power: f64) -> EnvConfig {
        let s = &self.scenario;
        EnvConfig {
            deployment,
            antennas: self.total_antennas(deployment),
            area: s.area,
            height: s.height,
            carrier_freq: s.carrier_freq,
            n_eff: s.n_eff,
            delta: s.delta,
            p_max: self.p_max(deployment, per_antenna_power),
            energy_budget: s.energy_budget,
            noise_power: s.noise_power,
            gamma_min: s.gamma_min,
            slots: s.slots,
            snr_amplitude: s.snr_amplitude,
            placement: Placement::Ring {
                users: s.users,
                targets: s.targets,
                radius_min: s.ring_radius_min,
                radius_max: s.ring_radius_max,
                target_jitter: s.target_jitter,
            },
            weights: s.weights,
            step_max: s.step_max,
            position_scale: s.position_scale,
            context_features: s.context_features,
        }
    }

    /// Identifies runs that may be compared: the scenario, the power level,
    /// training hyperparameters and evaluation protocol, but not the
    /// deployment, algorithm or seed.
    pub fn scenario_hash(&self, per_antenna_power: f64) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            scenario: &'a ScenarioConfig,
            per_antenna_power: f64,
            train: &'a TrainConfig,
            eval_episodes: usize,
            eval_seed: u64,
            final_window: usize,
        }
        let key = Key {
            scenario: &self.scenario,
            per_antenna_power,
            train: &self.train,
            eval_episodes: self.eval_episodes,
            eval_seed: self.eval_seed,
            final_window: self.final_window,
        };
        let bytes = serde_json::to_vec(&key).expect("plain data serializes");
        Sha256::digest(&bytes).iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// The fully resolved configuration as a loadable document in SI units.
    pub fn to_toml(&self) -> String {
        use Dimension::*;
        let s = &self.scenario;
        let q = format_quantity;
        let list = |items: Vec<String>| format!("[{}]", items.join(", "));
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("[scenario]\ndeployment", format!("\"{}\"", kind_name(self.deployment)));
        line("deployments", list(self.deployments.iter().map(|d| format!("\"{}\"", kind_name(*d))).collect()));
        line("users", s.users.to_string());
        line("targets", s.targets.to_string());
        line("antennas", s.antennas.to_string());
        line("antenna_count", format!("\"{}\"", s.antenna_count.name()));
        line("area", format!("\"{}\"", q(s.area, Length)));
        line("height", format!("\"{}\"", q(s.height, Length)));
        line("carrier_frequency", format!("\"{}\"", q(s.carrier_freq, Frequency)));
        line("n_eff", format!("{:?}", s.n_eff));
        line("delta", format!("\"{}\"", q(s.delta, Length)));
        line("noise_power", format!("\"{}\"", q(s.noise_power, Power)));
        line("gamma_min", q(s.gamma_min, Ratio));
        line("total_power", format!("\"{}\"", q(s.total_power, Power)));
        line("per_antenna_power", format!("\"{}\"", q(self.per_antenna_power, Power)));
        line(
            "per_antenna_powers",
            list(self.per_antenna_powers.iter().map(|p| format!("\"{}\"", q(*p, Power))).collect()),
        );
        if let Some(p) = s.per_user_power {
            line("per_user_power", format!("\"{}\"", q(p, Power)));
        }
        line("energy_budget", format!("\"{}\"", q(s.energy_budget, Power)));
        line("slots", s.slots.to_string());
        line(
            "snr_amplitude",
            format!(
                "\"{}\"",
                match s.snr_amplitude {
                    AmplitudeMode::SqrtPower => "sqrt_power",
                    AmplitudeMode::AsWritten => "as_written",
                }
            ),
        );
        line("ring_radius_min", format!("\"{}\"", q(s.ring_radius_min, Length)));
        line("ring_radius_max", format!("\"{}\"", q(s.ring_radius_max, Length)));
        line("target_jitter", format!("\"{}\"", q(s.target_jitter, Length)));
        line("step_max", format!("\"{}\"", q(s.step_max, Length)));
        line("position_scale", format!("\"{}\"", q(s.position_scale, Length)));
        line("context_features", s.context_features.to_string());
        line("sensing_penalty", format!("{:?}", s.weights.sensing));
        line("spacing_penalty", format!("{:?}", s.weights.spacing));
        line("energy_penalty", format!("{:?}", s.weights.energy));

        let t = &self.train;
        line("\n[train]\nalgorithm", format!("\"{}\"", self.algorithm));
        line("algorithms", list(self.algorithms.iter().map(|a| format!("\"{a}\"")).collect()));
        line("seeds", list(self.seeds.iter().map(u64::to_string).collect()));
        line("episodes", t.episodes.to_string());
        line("gamma", format!("{:?}", t.gamma));
        line("clip_eps", format!("{:?}", t.clip_eps));
        line("actor_lr", format!("{:?}", t.actor_lr));
        line("critic_lr", format!("{:?}", t.critic_lr));
        line("entropy_coef", format!("{:?}", t.entropy_coef));
        line("value_coef", format!("{:?}", t.value_coef));
        line("grad_clip", format!("{:?}", t.grad_clip));
        line("hidden", t.hidden.to_string());
        line("encoder_layers", t.encoder_layers.to_string());
        line("log_std_init", format!("{:?}", t.log_std_init));
        line("log_std_min", format!("{:?}", t.log_std_min));
        line("log_std_max", format!("{:?}", t.log_std_max));
        line("reward_scale", format!("{:?}", t.reward_scale));
        line("normalize_advantages", t.normalize_advantages.to_string());
        line("eval_episodes", self.eval_episodes.to_string());
        line("eval_seed", self.eval_seed.to_string());
        line("final_window", self.final_window.to_string());

        line("\n[output]\ndir", toml_string(&self.output_dir.to_string_lossy()));
        out
    }
}

fn kind_name(kind: DeploymentKind) -> &'static str {
    match kind {
        DeploymentKind::OneD => "1d",
        DeploymentKind::TwoD => "2d",
        DeploymentKind::ThreeD => "3d",
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}
