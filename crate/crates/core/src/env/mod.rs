//! The episodic decision process: graph state, projected actions, penalized
//! sum-rate reward and reset/step semantics.
//!
//! One step is one TDMA slot. The antenna configuration chosen by the action
//! is held fixed for the whole slot, metrics are evaluated on it, and the
//! episode ends after `slots` steps or once the energy budget is exceeded.

mod action;
mod graph;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use action::{project_action, ActionLimits, ProjectedAction};
pub use graph::{build_graph, Edge, GraphNode, HeteroGraph, NodeContext, NodeType, Relation};

use crate::channel::RfConstants;
use crate::error::{Error, Result};
use crate::geometry::{make_deployment, project_spacing, AntennaLayout, DeploymentKind, Scenario, Vec3};
use crate::metrics::{evaluate_slot, Allocation, AmplitudeMode, SlotMetrics};

/// How users and targets are placed at reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// Targets near the centre of the area, users on a ring around the first target.
    Ring {
        users: usize,
        targets: usize,
        radius_min: f64,
        radius_max: f64,
        target_jitter: f64,
    },
    Fixed { users: Vec<Vec3>, targets: Vec<Vec3> },
}

impl Placement {
    pub fn num_users(&self) -> usize {
        match self {
            Placement::Ring { users, .. } => *users,
            Placement::Fixed { users, .. } => users.len(),
        }
    }

    pub fn num_targets(&self) -> usize {
        match self {
            Placement::Ring { targets, .. } => *targets,
            Placement::Fixed { targets, .. } => targets.len(),
        }
    }

    fn draw(&self, area: f64, rng: &mut ChaCha8Rng) -> (Vec<Vec3>, Vec<Vec3>) {
        match self {
            Placement::Fixed { users, targets } => (users.clone(), targets.clone()),
            Placement::Ring { users, targets, radius_min, radius_max, target_jitter } => {
                let c = area / 2.0;
                let jitter = |rng: &mut ChaCha8Rng| {
                    if *target_jitter > 0.0 {
                        rng.random_range(-target_jitter..*target_jitter)
                    } else {
                        0.0
                    }
                };
                let targets: Vec<Vec3> = (0..*targets)
                    .map(|_| Vec3::new(c + jitter(rng), c + jitter(rng), 0.0))
                    .collect();
                let centre = targets.first().copied().unwrap_or(Vec3::new(c, c, 0.0));
                let users = (0..*users)
                    .map(|_| {
                        let angle = rng.random_range(0.0..std::f64::consts::TAU);
                        let r = if radius_max > radius_min {
                            rng.random_range(*radius_min..*radius_max)
                        } else {
                            *radius_min
                        };
                        Vec3::new(
                            (centre.x + r * angle.cos()).clamp(0.0, area),
                            (centre.y + r * angle.sin()).clamp(0.0, area),
                            0.0,
                        )
                    })
                    .collect();
                (users, targets)
            }
        }
    }
}

/// Penalty weights of the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    /// Per unit of linear sensing-SNR shortfall.
    pub sensing: f64,
    /// Per metre of attempted spacing violation.
    pub spacing: f64,
    /// Per W·slot of energy overrun, charged on the terminal step.
    pub energy: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { sensing: 1.0, spacing: 1.0, energy: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub deployment: DeploymentKind,
    /// Total antenna count across all waveguides.
    pub antennas: usize,
    /// Side of the square service area and waveguide length (m).
    pub area: f64,
    /// Waveguide elevation (m).
    pub height: f64,
    pub carrier_freq: f64,
    pub n_eff: f64,
    pub delta: f64,
    pub p_max: f64,
    pub energy_budget: f64,
    pub noise_power: f64,
    pub gamma_min: f64,
    pub slots: usize,
    pub snr_amplitude: AmplitudeMode,
    pub placement: Placement,
    pub weights: RewardWeights,
    /// Largest antenna displacement per step (m).
    pub step_max: f64,
    /// Positions are divided by this before entering node features.
    pub position_scale: f64,
    /// Append per-node scalar context to node features.
    pub context_features: bool,
}

/// Reward of one step split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub sum_rate: f64,
    /// Sum over targets of `max(0, gamma_min - gamma)`.
    pub sensing_shortfall: f64,
    /// Spacing shortfall of the displaced layout before projection (m).
    pub phys_violation: f64,
    /// Energy above budget, non-zero only on a terminal overrun step.
    pub energy_overrun: f64,
    pub sensing_penalty: f64,
    pub phys_penalty: f64,
    pub energy_penalty: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn new(
        sum_rate: f64,
        sensing_shortfall: f64,
        phys_violation: f64,
        energy_overrun: f64,
        weights: &RewardWeights,
    ) -> Self {
        let mut r = Self {
            sum_rate,
            sensing_shortfall,
            phys_violation,
            energy_overrun,
            sensing_penalty: weights.sensing * sensing_shortfall,
            phys_penalty: weights.spacing * phys_violation,
            energy_penalty: weights.energy * energy_overrun,
            total: 0.0,
        };
        r.total = r.reconstructed_total();
        r
    }

    pub fn reconstructed_total(&self) -> f64 {
        self.sum_rate - self.sensing_penalty - self.phys_penalty - self.energy_penalty
    }
}

/// What the agent sees: the graph plus a flat vector for graph-free encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub graph: HeteroGraph,
    /// Node positions (scaled) followed by the last fractions and powers / p_max.
    pub flat: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub metrics: SlotMetrics,
    pub done: bool,
}

/// A single environment instance; owns its state and randomness.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    rf: RfConstants,
    scenario: Scenario,
    layout: AntennaLayout,
    t: usize,
    energy_used: f64,
    done: bool,
    last_allocation: Allocation,
    context: NodeContext,
}

impl Environment {
    /// Builds the environment and resets it with `seed`.
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self> {
        let rf = RfConstants::new(config.carrier_freq, config.n_eff)?;
        if !(config.step_max >= 0.0 && config.position_scale > 0.0) {
            return Err(Error::InvalidScenario("step_max and position_scale must be positive".into()));
        }
        let (waveguides, layout) =
            make_deployment(config.deployment, config.antennas, config.area, config.height, config.delta)?;
        let k = config.placement.num_users();
        let scenario = Scenario {
            users: Vec::new(),
            targets: Vec::new(),
            waveguides,
            carrier_freq: config.carrier_freq,
            n_eff: config.n_eff,
            delta: config.delta,
            p_max: config.p_max,
            energy_budget: config.energy_budget,
            noise_power: config.noise_power,
            gamma_min: config.gamma_min,
            slots: config.slots,
            snr_amplitude: config.snr_amplitude,
        };
        let mut env = Self {
            config,
            rf,
            scenario,
            layout,
            t: 0,
            energy_used: 0.0,
            done: false,
            last_allocation: Allocation::zeros(k),
            context: NodeContext::default(),
        };
        env.reset(seed)?;
        Ok(env)
    }

    /// Starts a new episode: fresh deployment layout, users and targets drawn
    /// from the placement rule with `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, layout) = make_deployment(
            self.config.deployment,
            self.config.antennas,
            self.config.area,
            self.config.height,
            self.config.delta,
        )?;
        let (users, targets) = self.config.placement.draw(self.config.area, &mut rng);
        self.scenario.users = users;
        self.scenario.targets = targets;
        self.scenario.validate()?;
        self.layout = layout;
        self.t = 0;
        self.energy_used = 0.0;
        self.done = false;
        self.last_allocation = Allocation::zeros(self.scenario.num_users());
        self.context = NodeContext {
            user_rates: vec![0.0; self.scenario.num_users()],
            target_snrs: vec![0.0; self.scenario.num_targets()],
        };
        Ok(self.observation())
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn rf(&self) -> &RfConstants {
        &self.rf
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn layout(&self) -> &AntennaLayout {
        &self.layout
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn energy_used(&self) -> f64 {
        self.energy_used
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn limits(&self) -> ActionLimits {
        ActionLimits {
            antennas: self.layout.len(),
            users: self.scenario.num_users(),
            step_max: self.config.step_max,
            p_max: self.scenario.p_max,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.limits().raw_dim()
    }

    pub fn graph(&self) -> HeteroGraph {
        let context = self.config.context_features.then_some(&self.context);
        build_graph(&self.scenario, &self.layout, self.config.position_scale, context)
    }

    pub fn observation(&self) -> Observation {
        let scale = self.config.position_scale;
        let mut flat = Vec::with_capacity(3 * (self.layout.len() + 8) + 2 * self.last_allocation.len());
        let points = self
            .layout
            .positions()
            .iter()
            .chain(&self.scenario.users)
            .chain(&self.scenario.targets);
        for p in points {
            flat.extend(p.to_array().map(|c| c / scale));
        }
        flat.extend(&self.last_allocation.q);
        flat.extend(self.last_allocation.p.iter().map(|p| p / self.scenario.p_max));
        Observation { graph: self.graph(), flat }
    }

    /// Projects `raw` and steps with the result.
    pub fn step_raw(&mut self, raw: &[f64]) -> Result<StepOutcome> {
        let action = project_action(raw, &self.limits())?;
        self.step(&action)
    }

    /// Applies one slot's action.
    ///
    /// Antennas move along their waveguides, are clamped to the segment and
    /// re-spaced per waveguide; the slot is then evaluated on the new layout.
    pub fn step(&mut self, action: &ProjectedAction) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let m = self.layout.len();
        if action.displacements.len() != m || action.allocation.len() != self.scenario.num_users() {
            return Err(Error::contract(format!(
                "action shaped for {} antennas / {} users, environment has {m} / {}",
                action.displacements.len(),
                action.allocation.len(),
                self.scenario.num_users()
            )));
        }

        let waveguides = &self.scenario.waveguides;
        let moved: Vec<f64> = self
            .layout
            .assignments()
            .iter()
            .zip(&action.displacements)
            .map(|(a, d)| (a.s + d).clamp(0.0, waveguides[a.waveguide].length()))
            .collect();
        let attempted = self.layout.with_scalars(waveguides, &moved)?;
        let phys_violation = attempted.spacing_shortfall(self.scenario.delta);

        let mut projected = moved.clone();
        for (wg, guide) in waveguides.iter().enumerate() {
            let idx = self.layout.antennas_on(wg);
            let scalars: Vec<f64> = idx.iter().map(|&i| moved[i]).collect();
            // Sorted output goes back to the antennas in index order, which
            // keeps index order and coordinate order aligned on every waveguide.
            let spaced = project_spacing(&scalars, self.scenario.delta, guide.length())?;
            for (&i, s) in idx.iter().zip(spaced) {
                projected[i] = s;
            }
        }
        self.layout = self.layout.with_scalars(waveguides, &projected)?;

        let metrics = evaluate_slot(&self.scenario, &self.layout, &self.rf, &action.allocation, self.energy_used)?;
        self.energy_used += metrics.energy;
        self.t += 1;
        let overrun = self.energy_used > self.scenario.energy_budget;
        self.done = self.t >= self.scenario.slots || overrun;

        let sensing_shortfall: f64 =
            metrics.sensing_snrs.iter().map(|g| (self.scenario.gamma_min - g).max(0.0)).sum();
        let energy_overrun = if overrun { self.energy_used - self.scenario.energy_budget } else { 0.0 };
        let reward = RewardBreakdown::new(
            metrics.sum_rate(),
            sensing_shortfall,
            phys_violation,
            energy_overrun,
            &self.config.weights,
        );

        self.last_allocation = action.allocation.clone();
        self.context.user_rates.clone_from(&metrics.rates);
        self.context.target_snrs.clone_from(&metrics.sensing_snrs);
        Ok(StepOutcome { observation: self.observation(), reward, metrics, done: self.done })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::channel::SPEED_OF_LIGHT;

    pub(crate) fn reference_config(deployment: DeploymentKind) -> EnvConfig {
        let wavelength = SPEED_OF_LIGHT / 28e9;
        EnvConfig {
            deployment,
            antennas: 6,
            area: 50.0,
            height: 10.0,
            carrier_freq: 28e9,
            n_eff: 1.4,
            delta: wavelength / 2.0,
            p_max: 0.6,
            energy_budget: 1000.0,
            noise_power: 1e-12,
            gamma_min: 10f64.powf(0.5),
            slots: 10,
            snr_amplitude: AmplitudeMode::SqrtPower,
            placement: Placement::Ring {
                users: 6,
                targets: 1,
                radius_min: 10.0,
                radius_max: 20.0,
                target_jitter: 2.0,
            },
            weights: RewardWeights::default(),
            step_max: wavelength,
            position_scale: 50.0,
            context_features: false,
        }
    }

    fn action(m: usize, q: Vec<f64>, p: Vec<f64>) -> ProjectedAction {
        ProjectedAction { displacements: vec![0.0; m], allocation: Allocation { q, p } }
    }

    #[test]
    fn graph_counts_and_features() {
        let env = Environment::new(reference_config(DeploymentKind::ThreeD), 1).unwrap();
        let g = env.graph();
        assert_eq!(g.num_nodes(), 13);
        assert_eq!(g.edge_count(Relation::Communicates), 2 * 36);
        assert_eq!(g.edge_count(Relation::Senses), 2 * 6);
        assert_eq!(g.edge_count(Relation::Interference), 2 * 6);
        assert_eq!(&g.nodes[0].features[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(&g.nodes[6].features[..3], &[0.0, 1.0, 0.0]);
        assert_eq!(&g.nodes[12].features[..3], &[0.0, 0.0, 1.0]);
        assert_eq!(g.feature_dim(), 6);
        assert!(g.edges.iter().all(|e| e.src != e.dst));
        let mut seen = std::collections::HashSet::new();
        assert!(g.edges.iter().all(|e| seen.insert(*e)));
    }

    #[test]
    fn context_features_extend_the_nodes() {
        let mut cfg = reference_config(DeploymentKind::ThreeD);
        cfg.context_features = true;
        let mut env = Environment::new(cfg, 1).unwrap();
        assert_eq!(env.graph().feature_dim(), 7);
        let out = env.step_raw(&vec![1.0; env.action_dim()]).unwrap();
        let g = out.observation.graph;
        assert_eq!(g.nodes[0].features[6], 0.0);
        assert_eq!(g.nodes[6].features[6], out.metrics.rates[0]);
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = reference_config(DeploymentKind::ThreeD);
        let a = Environment::new(cfg.clone(), 42).unwrap();
        let b = Environment::new(cfg, 42).unwrap();
        assert_eq!(a.observation(), b.observation());
        assert_eq!(a.time(), 0);
        assert_eq!(a.energy_used(), 0.0);
    }

    #[test]
    fn ring_placement_surrounds_the_centre() {
        let env = Environment::new(reference_config(DeploymentKind::OneD), 3).unwrap();
        let t = env.scenario().targets[0];
        assert!((t.x - 25.0).abs() <= 2.0 && (t.y - 25.0).abs() <= 2.0 && t.z == 0.0);
        for u in &env.scenario().users {
            let r = u.distance(t);
            assert!((10.0..=20.0).contains(&r), "user at radius {r}");
        }
    }

    #[test]
    fn feasible_step_pays_the_sum_rate() {
        let mut env = Environment::new(reference_config(DeploymentKind::ThreeD), 5).unwrap();
        let a = action(6, vec![1.0 / 6.0; 6], vec![0.6; 6]);
        let out = env.step(&a).unwrap();
        if out.metrics.feasibility.all_satisfied() {
            assert_eq!(out.reward.total, out.metrics.sum_rate());
        }
        assert_eq!(out.reward.total, out.reward.reconstructed_total());
    }

    #[test]
    fn sensing_shortfall_example() {
        let w = RewardWeights { sensing: 1.0, spacing: 1.0, energy: 10.0 };
        let r = RewardBreakdown::new(12.5, 10.0 - 8.0, 0.0, 0.0, &w);
        assert_eq!(r.total, 12.5 - 2.0);
    }

    #[test]
    fn zero_power_pays_the_full_threshold() {
        let cfg = reference_config(DeploymentKind::TwoD);
        let gamma_min = cfg.gamma_min;
        let mut env = Environment::new(cfg, 5).unwrap();
        let out = env.step(&action(6, vec![0.1; 6], vec![0.0; 6])).unwrap();
        assert_eq!(out.reward.sum_rate, 0.0);
        assert_eq!(out.reward.total, -gamma_min);
    }

    #[test]
    fn episode_ends_after_the_last_slot() {
        let mut env = Environment::new(reference_config(DeploymentKind::OneD), 9).unwrap();
        let raw = vec![0.0; env.action_dim()];
        for t in 0..10 {
            let out = env.step_raw(&raw).unwrap();
            assert_eq!(out.done, t == 9);
        }
        assert!(matches!(env.step_raw(&raw), Err(Error::EpisodeDone)));
        env.reset(10).unwrap();
        assert!(env.step_raw(&raw).is_ok());
    }

    #[test]
    fn energy_overrun_ends_and_penalizes() {
        let mut cfg = reference_config(DeploymentKind::ThreeD);
        cfg.energy_budget = 0.5;
        let mut env = Environment::new(cfg, 2).unwrap();
        let out = env.step(&action(6, vec![1.0 / 6.0; 6], vec![0.6; 6])).unwrap();
        assert!(out.done);
        assert!((out.reward.energy_overrun - 0.1).abs() < 1e-12);
        assert_eq!(out.reward.energy_penalty, 10.0 * out.reward.energy_overrun);
    }

    #[test]
    fn crowding_displacement_is_penalized_but_projected() {
        let mut cfg = reference_config(DeploymentKind::OneD);
        cfg.antennas = 2;
        cfg.step_max = 30.0;
        let delta = cfg.delta;
        let mut env = Environment::new(cfg, 0).unwrap();
        // Antennas start at 50/3 and 100/3; push them onto the same point.
        let gap = 50.0 / 3.0;
        let a = ProjectedAction {
            displacements: vec![gap / 2.0, -gap / 2.0],
            allocation: Allocation { q: vec![0.1; 6], p: vec![0.1; 6] },
        };
        let out = env.step(&a).unwrap();
        assert!((out.reward.phys_violation - delta).abs() < 1e-9);
        assert!(env.layout().satisfies_spacing(delta));
    }
}
