use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::env::tests::reference_config;
use crate::env::{Edge, EnvConfig, Environment, GraphNode, HeteroGraph, NodeType, Observation, Relation};
use crate::geometry::DeploymentKind;
use crate::neural::{check_gradients, Matrix, Tape};

fn small_cfg(episodes: usize) -> TrainConfig {
    TrainConfig { episodes, hidden: 8, gamma: 0.1, ..TrainConfig::default() }
}

fn short_env(kind: DeploymentKind) -> EnvConfig {
    EnvConfig { slots: 3, ..reference_config(kind) }
}

fn first_observation(env_cfg: &EnvConfig) -> (Observation, usize) {
    let env = Environment::new(env_cfg.clone(), 0).unwrap();
    (env.observation(), env.action_dim())
}

#[test]
fn td_advantage_examples() {
    let (adv, target) = advantage_td(1.0, 0.5, 1.0, false, 0.9);
    assert_relative_eq!(adv, 1.4, max_relative = 1e-15);
    assert_relative_eq!(target, 1.9, max_relative = 1e-15);
    assert_eq!(advantage_td(1.0, 0.5, 100.0, true, 0.9), (0.5, 1.0));
    // A value function that already equals the target leaves no advantage.
    assert_eq!(advantage_td(2.0, 2.9, 1.0, false, 0.9).0, 0.0);
}

#[test]
fn clip_loss_examples() {
    let ln = f64::ln;
    // Ratio 1: plain surrogate.
    assert_relative_eq!(clipped_policy_loss(&[0.0], &[0.0], &[2.0], 0.2), -2.0);
    // Ratio 1.5 with a positive advantage clips to 1.2.
    assert_relative_eq!(clipped_policy_loss(&[ln(1.5)], &[0.0], &[1.0], 0.2), -1.2, max_relative = 1e-12);
    // Ratio 0.5 with a negative advantage clips to 0.8 and keeps the worse term.
    assert_relative_eq!(clipped_policy_loss(&[ln(0.5)], &[0.0], &[-1.0], 0.2), 0.8, max_relative = 1e-12);
}

#[test]
fn value_loss_examples() {
    assert_eq!(value_loss(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    assert_eq!(value_loss(&[0.0], &[2.0]), 4.0);
    assert_eq!(value_loss(&[0.0, 0.0], &[2.0, 0.0]), 2.0);
}

#[test]
fn log_density_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(1..6);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ls: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..1.0)).collect();
        let density: f64 = (0..n)
            .map(|i| {
                let s = ls[i].exp();
                (-(x[i] - m[i]).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
            })
            .product();
        assert!((gaussian_log_density(&x, &m, &ls) - density.ln()).abs() < 1e-10);
    }
}

#[test]
fn entropy_grows_with_log_std() {
    let mut last = f64::NEG_INFINITY;
    for k in -20..=5 {
        let e = gaussian_entropy(&[k as f64 * 0.25; 3]);
        assert!(e > last);
        last = e;
    }
    assert_relative_eq!(gaussian_entropy(&[0.0]), 0.5 * (2.0 * PI * std::f64::consts::E).ln(), max_relative = 1e-15);
}

#[test]
fn vanishing_std_samples_the_mean() {
    let env_cfg = short_env(DeploymentKind::ThreeD);
    let (obs, dim) = first_observation(&env_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut policy = Policy::new(EncoderKind::Hetero, &obs, dim, &small_cfg(1), &mut rng);
    let id = policy.arch.log_std;
    policy.store.get_mut(id).data_mut().fill(f64::NEG_INFINITY);
    let out = policy.forward(&obs, &mut rng).unwrap();
    assert_eq!(out.sample, out.mean);
    assert_eq!(policy.greedy(&obs).unwrap(), out.mean);
}

#[test]
fn sampling_is_seeded() {
    let env_cfg = short_env(DeploymentKind::TwoD);
    let (obs, dim) = first_observation(&env_cfg);
    let make = || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Policy::new(EncoderKind::Homo, &obs, dim, &small_cfg(1), &mut rng);
        (p.forward(&obs, &mut rng).unwrap(), p.forward(&obs, &mut rng).unwrap())
    };
    let (a, b) = (make(), make());
    assert_eq!(a, b);
    assert_ne!(a.0.sample, a.1.sample);
}

#[test]
fn training_is_reproducible_and_curve_has_one_row_per_episode() {
    let env_cfg = short_env(DeploymentKind::ThreeD);
    for alg in Algorithm::ALL {
        let a = train_algorithm(alg, &env_cfg, &small_cfg(6), 4).unwrap();
        let b = train_algorithm(alg, &env_cfg, &small_cfg(6), 4).unwrap();
        assert_eq!(a.curve.len(), 6);
        assert_eq!(a.curve, b.curve, "{alg}");
        assert_eq!(a.policy, b.policy, "{alg}");
        assert_eq!(a.policy.is_some(), alg.is_learned());
        assert!(a.curve.iter().enumerate().all(|(i, r)| r.episode == i && r.reward.is_finite()));
    }
}

#[test]
fn zero_episodes_keep_initial_parameters() {
    let env_cfg = short_env(DeploymentKind::OneD);
    let out = train(&env_cfg, &small_cfg(0), 21).unwrap();
    assert!(out.curve.is_empty());
    let (obs, dim) = first_observation(&env_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let fresh = Policy::new(EncoderKind::Hetero, &obs, dim, &small_cfg(0), &mut rng);
    assert_eq!(out.policy.unwrap(), fresh);
}

#[test]
fn training_changes_parameters_and_keeps_log_std_in_range() {
    let env_cfg = short_env(DeploymentKind::ThreeD);
    let cfg = TrainConfig { log_std_min: -1.0, log_std_max: -0.5, log_std_init: -0.6, ..small_cfg(5) };
    let trained = train(&env_cfg, &cfg, 2).unwrap().policy.unwrap();
    let initial = train(&env_cfg, &TrainConfig { episodes: 0, ..cfg.clone() }, 2).unwrap().policy.unwrap();
    assert_ne!(trained.store, initial.store);
    let ls = trained.store.get(trained.arch.log_std);
    assert!(ls.data().iter().all(|v| (-1.0..=-0.5).contains(v)));
}

fn batch_for(policy: &Policy, obs: &[Observation], old_shift: f64, adv: &[f64], rng: &mut impl Rng) -> UpdateBatch {
    let outs: Vec<PolicyOutput> = obs.iter().map(|o| policy.forward(o, rng).unwrap()).collect();
    let dim = outs[0].sample.len();
    let actions = Matrix::from_vec(outs.len(), dim, outs.iter().flat_map(|o| o.sample.clone()).collect()).unwrap();
    UpdateBatch {
        observations: obs.to_vec(),
        actions: Arc::new(actions),
        old_log_probs: outs.iter().map(|o| o.log_prob - old_shift).collect(),
        advantages: adv.into(),
        returns: outs.iter().map(|o| o.value + 1.0).collect(),
    }
}

#[test]
fn clipped_region_carries_no_policy_gradient() {
    let env_cfg = short_env(DeploymentKind::ThreeD);
    let (obs, dim) = first_observation(&env_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let policy = Policy::new(EncoderKind::Hetero, &obs, dim, &small_cfg(1), &mut rng);
    let cfg = TrainConfig { value_coef: 0.0, entropy_coef: 0.0, ..small_cfg(1) };
    // New log-prob exceeds the old one by ln 2, so the ratio is 2 > 1 + eps.
    let batch = batch_for(&policy, &[obs.clone(), obs], 2f64.ln(), &[1.0, 0.5], &mut rng);
    let (parts, grads) = update_loss(&policy.arch, &policy.store, &batch, &cfg).unwrap();
    assert_relative_eq!(parts.policy, -1.2 * 0.75, max_relative = 1e-12);
    assert_eq!(grads.global_norm(), 0.0);
}

#[test]
fn unit_ratio_gradient_is_vanilla_policy_gradient() {
    let env_cfg = short_env(DeploymentKind::TwoD);
    let env = Environment::new(env_cfg.clone(), 9).unwrap();
    let obs = vec![env.observation(), Environment::new(env_cfg, 10).unwrap().observation()];
    let dim = env.action_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let policy = Policy::new(EncoderKind::Hetero, &obs[0], dim, &small_cfg(1), &mut rng);
    let cfg = TrainConfig { value_coef: 0.0, entropy_coef: 0.0, ..small_cfg(1) };
    let adv = [0.7, -1.3];
    let batch = batch_for(&policy, &obs, 0.0, &adv, &mut rng);
    let (_, clip_grads) = update_loss(&policy.arch, &policy.store, &batch, &cfg).unwrap();

    let mut tape = Tape::new();
    let refs: Vec<&Observation> = obs.iter().collect();
    let heads = policy.arch.forward(&mut tape, &policy.store, &refs).unwrap();
    let lp = tape.gaussian_log_prob(heads.mean, heads.log_std, batch.actions.clone()).unwrap();
    let a = tape.constant(Matrix::from_vec(2, 1, adv.to_vec()).unwrap());
    let weighted = tape.mul(lp, a).unwrap();
    let mean = tape.mean_all(weighted);
    let loss = tape.scale(mean, -1.0);
    let pg = tape.backward(loss, &policy.store).unwrap();

    assert!(clip_grads.global_norm() > 0.0);
    for (g, v) in clip_grads.iter().zip(pg.iter()) {
        for (x, y) in g.data().iter().zip(v.data()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }
}

fn toy_observation(seed: u64) -> Observation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = [NodeType::Antenna, NodeType::User, NodeType::Target];
    let nodes = kinds
        .iter()
        .map(|&kind| {
            let mut features = kind.one_hot().to_vec();
            features.extend((0..2).map(|_| rng.random_range(-1.0..1.0)));
            GraphNode { kind, features }
        })
        .collect();
    let mut edges = Vec::new();
    for (a, b, relation) in [(0, 1, Relation::Communicates), (0, 2, Relation::Senses), (1, 2, Relation::Interference)] {
        edges.push(Edge { src: a, dst: b, relation });
        edges.push(Edge { src: b, dst: a, relation });
    }
    let graph = HeteroGraph { nodes, edges };
    let flat = graph.nodes.iter().flat_map(|n| n.features.clone()).collect();
    Observation { graph, flat }
}

#[test]
fn full_update_gradient_matches_finite_differences() {
    let obs = vec![toy_observation(1), toy_observation(2), toy_observation(3)];
    for kind in [EncoderKind::Hetero, EncoderKind::Homo, EncoderKind::Mlp] {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cfg = TrainConfig { hidden: 5, ..TrainConfig::default() };
        let mut policy = Policy::new(kind, &obs[0], 4, &cfg, &mut rng);
        // A small shift keeps every ratio away from the clip kinks.
        let batch = batch_for(&policy, &obs, 0.01, &[0.9, -0.4, 1.6], &mut rng);
        let arch = policy.arch.clone();
        let check = check_gradients(&mut policy.store, 1e-6, |s| {
            let (parts, g) = update_loss(&arch, s, &batch, &cfg)?;
            Ok((parts.total, g))
        })
        .unwrap();
        assert!(check.max_relative_error < 1e-3, "{kind:?}: {check:?}");
        assert_eq!(check.checked, policy.parameter_count());
    }
}

#[test]
fn relation_typed_encoder_has_more_parameters_than_shared() {
    let env_cfg = short_env(DeploymentKind::ThreeD);
    let (obs, dim) = first_observation(&env_cfg);
    let count = |kind| Policy::new(kind, &obs, dim, &small_cfg(1), &mut ChaCha8Rng::seed_from_u64(0)).parameter_count();
    let (hetero, homo) = (count(EncoderKind::Hetero), count(EncoderKind::Homo));
    let h = small_cfg(1).hidden;
    let f = obs.graph.feature_dim();
    // Each extra relation adds one in x out matrix per layer.
    assert_eq!(hetero - homo, 2 * (f * h) + 2 * (h * h));
}

#[test]
fn evaluation_is_deterministic_and_bounded() {
    let env_cfg = short_env(DeploymentKind::ThreeD);
    let out = train(&env_cfg, &small_cfg(2), 1).unwrap();
    let a = evaluate(out.policy.as_ref(), &env_cfg, 4, 99).unwrap();
    assert_eq!(a, evaluate(out.policy.as_ref(), &env_cfg, 4, 99).unwrap());
    assert!((0.0..=1.0).contains(&a.feasible_fraction));
    assert_eq!(a.avg_min_sensing_snr_db, a.avg_sensing_snr_db, "one target: worst equals mean");
    let r = evaluate(None, &env_cfg, 4, 99).unwrap();
    assert_eq!(r, evaluate(None, &env_cfg, 4, 99).unwrap());
}
