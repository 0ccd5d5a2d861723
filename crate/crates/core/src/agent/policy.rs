use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Algorithm, TrainConfig};
use crate::env::{HeteroGraph, Observation, Relation};
use crate::error::{Error, Result};
use crate::neural::{Activation, Adjacency, Dense, Gradients, Matrix, ParamId, ParamStore, RelGnnLayer, Tape, Var};

/// Optimizer group of the encoder, actor head and `log_std`.
pub const ACTOR_GROUP: usize = 0;
/// Optimizer group of the critic head.
pub const CRITIC_GROUP: usize = 1;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// One weight matrix per relation type.
    Hetero,
    /// All relations share a single weight matrix.
    Homo,
    /// Dense network over the flat observation vector.
    Mlp,
}

impl EncoderKind {
    pub fn for_algorithm(algorithm: Algorithm) -> Option<Self> {
        match algorithm {
            Algorithm::Hgrl => Some(EncoderKind::Hetero),
            Algorithm::Grl => Some(EncoderKind::Homo),
            Algorithm::MlpA2c => Some(EncoderKind::Mlp),
            Algorithm::Random => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Encoder {
    Graph(Vec<RelGnnLayer>),
    Mlp(Vec<Dense>),
}

/// Layer layout of the actor-critic network; the values live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub kind: EncoderKind,
    pub input_dim: usize,
    pub action_dim: usize,
    pub hidden: usize,
    encoder: Encoder,
    actor: [Dense; 2],
    critic: [Dense; 2],
    pub log_std: ParamId,
}

/// Mean action, value and the shared `log_std` row for a batch of states.
#[derive(Debug, Clone, Copy)]
pub struct Heads {
    pub mean: Var,
    pub value: Var,
    pub log_std: Var,
}

/// Graphs stacked into one disconnected graph for a batched forward pass.
#[derive(Debug, Clone)]
struct GraphBatch {
    features: Matrix,
    adjacency: Vec<Adjacency>,
    segments: Arc<[usize]>,
    count: usize,
}

fn batch_graphs(graphs: &[&HeteroGraph], homogeneous: bool) -> Result<GraphBatch> {
    let n: usize = graphs.iter().map(|g| g.num_nodes()).sum();
    let dim = graphs.first().map_or(0, |g| g.feature_dim());
    let mut features = Matrix::zeros(n, dim);
    let relations = if homogeneous { 1 } else { Relation::ALL.len() };
    let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); relations];
    let mut segments = Vec::with_capacity(n);
    let mut offset = 0;
    for (b, g) in graphs.iter().enumerate() {
        if g.feature_dim() != dim || g.num_nodes() == 0 {
            return Err(Error::contract("graphs in a batch must share a non-empty feature layout"));
        }
        for (i, node) in g.nodes.iter().enumerate() {
            features.row_mut(offset + i).copy_from_slice(&node.features);
            segments.push(b);
        }
        for e in &g.edges {
            let r = if homogeneous { 0 } else { e.relation.index() };
            pairs[r].push((offset + e.src, offset + e.dst));
        }
        offset += g.num_nodes();
    }
    let adjacency = pairs.into_iter().map(|p| Adjacency { n_out: n, pairs: p.into() }).collect();
    Ok(GraphBatch { features, adjacency, segments: segments.into(), count: graphs.len() })
}

impl Architecture {
    /// Builds the network and initializes its parameters into `store`.
    ///
    /// `input_dim` is the node feature width for graph encoders and the flat
    /// observation length for the dense encoder.
    pub fn new(
        kind: EncoderKind,
        input_dim: usize,
        action_dim: usize,
        cfg: &TrainConfig,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Self {
        let h = cfg.hidden;
        let layers = cfg.encoder_layers.max(1);
        let encoder = match kind {
            EncoderKind::Hetero | EncoderKind::Homo => {
                let names: Vec<&str> = match kind {
                    EncoderKind::Hetero => Relation::ALL.iter().map(|r| r.name()).collect(),
                    _ => vec!["shared"],
                };
                Encoder::Graph(
                    (0..layers)
                        .map(|l| {
                            let input = if l == 0 { input_dim } else { h };
                            RelGnnLayer::new(
                                store,
                                &format!("gnn{l}"),
                                &names,
                                input,
                                h,
                                Activation::Tanh,
                                ACTOR_GROUP,
                                rng,
                            )
                        })
                        .collect(),
                )
            }
            EncoderKind::Mlp => Encoder::Mlp(
                (0..layers)
                    .map(|l| {
                        let input = if l == 0 { input_dim } else { h };
                        Dense::new(store, &format!("mlp{l}"), input, h, ACTOR_GROUP, rng)
                    })
                    .collect(),
            ),
        };
        let actor = [
            Dense::new(store, "actor0", h, h, ACTOR_GROUP, rng),
            Dense::new(store, "actor1", h, action_dim, ACTOR_GROUP, rng),
        ];
        let critic = [
            Dense::new(store, "critic0", h, h, CRITIC_GROUP, rng),
            Dense::new(store, "critic1", h, 1, CRITIC_GROUP, rng),
        ];
        let log_std = store.add("log_std", Matrix::filled(1, action_dim, cfg.log_std_init), ACTOR_GROUP);
        Self { kind, input_dim, action_dim, hidden: h, encoder, actor, critic, log_std }
    }

    /// Input width this encoder reads from an observation.
    pub fn input_dim_of(kind: EncoderKind, obs: &Observation) -> usize {
        match kind {
            EncoderKind::Mlp => obs.flat.len(),
            _ => obs.graph.feature_dim(),
        }
    }

    fn encode(&self, tape: &mut Tape, store: &ParamStore, batch: &[&Observation]) -> Result<Var> {
        match &self.encoder {
            Encoder::Graph(layers) => {
                let graphs: Vec<&HeteroGraph> = batch.iter().map(|o| &o.graph).collect();
                let gb = batch_graphs(&graphs, self.kind == EncoderKind::Homo)?;
                if gb.features.cols() != self.input_dim {
                    return Err(Error::contract(format!(
                        "node features have width {}, encoder expects {}",
                        gb.features.cols(),
                        self.input_dim
                    )));
                }
                let mut h = tape.constant(gb.features);
                for layer in layers {
                    h = layer.forward(tape, store, h, &gb.adjacency)?;
                }
                tape.segment_mean(h, gb.segments, gb.count)
            }
            Encoder::Mlp(layers) => {
                let rows: Vec<Vec<f64>> = batch.iter().map(|o| o.flat.clone()).collect();
                let x = Matrix::from_rows(&rows)?;
                if x.cols() != self.input_dim {
                    return Err(Error::contract(format!(
                        "flat state has width {}, encoder expects {}",
                        x.cols(),
                        self.input_dim
                    )));
                }
                let mut h = tape.constant(x);
                for layer in layers {
                    let z = layer.forward(tape, store, h)?;
                    h = tape.tanh(z);
                }
                Ok(h)
            }
        }
    }

    /// Encoder, pooling and both heads over a batch of states.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, batch: &[&Observation]) -> Result<Heads> {
        if batch.is_empty() {
            return Err(Error::contract("forward over an empty batch"));
        }
        let emb = self.encode(tape, store, batch)?;
        let a = self.actor[0].forward(tape, store, emb)?;
        let a = tape.tanh(a);
        let mean = self.actor[1].forward(tape, store, a)?;
        let c = self.critic[0].forward(tape, store, emb)?;
        let c = tape.tanh(c);
        let value = self.critic[1].forward(tape, store, c)?;
        let log_std = tape.param(store, self.log_std);
        Ok(Heads { mean, value, log_std })
    }
}

/// Diagonal Gaussian log-density.
pub fn gaussian_log_density(sample: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    sample
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), ls)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_TAU
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian with the given `log_std`.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + HALF_LN_TAU).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub sample: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

/// Network layout plus parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub arch: Architecture,
    pub store: ParamStore,
}

impl Policy {
    pub fn new(kind: EncoderKind, obs: &Observation, action_dim: usize, cfg: &TrainConfig, rng: &mut impl Rng) -> Self {
        let mut store = ParamStore::new();
        let input = Architecture::input_dim_of(kind, obs);
        let arch = Architecture::new(kind, input, action_dim, cfg, &mut store, rng);
        Self { arch, store }
    }

    /// Mean, value and `log_std` for a single state.
    pub fn evaluate(&self, obs: &Observation) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let heads = self.arch.forward(&mut tape, &self.store, &[obs])?;
        Ok((
            tape.value(heads.mean).data().to_vec(),
            tape.value(heads.value).data()[0],
            tape.value(heads.log_std).data().to_vec(),
        ))
    }

    /// Samples a raw action `mean + exp(log_std) * noise` with explicit randomness.
    pub fn forward(&self, obs: &Observation, rng: &mut impl Rng) -> Result<PolicyOutput> {
        let (mean, value, log_std) = self.evaluate(obs)?;
        let sample: Vec<f64> = mean
            .iter()
            .zip(&log_std)
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let log_prob = gaussian_log_density(&sample, &mean, &log_std);
        Ok(PolicyOutput { mean, log_std, sample, log_prob, value })
    }

    /// Deterministic action: the mean.
    pub fn greedy(&self, obs: &Observation) -> Result<Vec<f64>> {
        Ok(self.evaluate(obs)?.0)
    }

    pub fn parameter_count(&self) -> usize {
        self.store.scalar_count()
    }
}

/// One rollout prepared for an update. Advantages and returns are constants.
#[derive(Debug, Clone)]
pub struct UpdateBatch {
    pub observations: Vec<Observation>,
    pub actions: Arc<Matrix>,
    pub old_log_probs: Arc<[f64]>,
    pub advantages: Arc<[f64]>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Combined objective: clipped surrogate + value_coef * value loss
/// - entropy_coef * entropy, with its gradients.
pub fn update_loss(
    arch: &Architecture,
    store: &ParamStore,
    batch: &UpdateBatch,
    cfg: &TrainConfig,
) -> Result<(LossParts, Gradients)> {
    let mut tape = Tape::new();
    let obs: Vec<&Observation> = batch.observations.iter().collect();
    let heads = arch.forward(&mut tape, store, &obs)?;
    let lp = tape.gaussian_log_prob(heads.mean, heads.log_std, batch.actions.clone())?;
    let policy = tape.clipped_surrogate(lp, batch.old_log_probs.clone(), batch.advantages.clone(), cfg.clip_eps)?;

    let targets = tape.constant(Matrix::from_vec(batch.returns.len(), 1, batch.returns.clone())?);
    let err = tape.sub(heads.value, targets)?;
    let sq = tape.square(err);
    let value = tape.mean_all(sq);

    // Entropy is sum(log_std) plus a constant; only the former carries gradient.
    let ent = tape.sum_all(heads.log_std);
    let weighted_value = tape.scale(value, cfg.value_coef);
    let weighted_ent = tape.scale(ent, -cfg.entropy_coef);
    let total = tape.add(policy, weighted_value)?;
    let total = tape.add(total, weighted_ent)?;

    let grads = tape.backward(total, store)?;
    let parts = LossParts {
        policy: tape.value(policy).data()[0],
        value: tape.value(value).data()[0],
        entropy: gaussian_entropy(tape.value(heads.log_std).data()),
        total: tape.value(total).data()[0],
    };
    Ok((parts, grads))
}

/// Mean squared error between values and return targets.
pub fn value_loss(values: &[f64], returns: &[f64]) -> f64 {
    values.iter().zip(returns).map(|(v, r)| (v - r) * (v - r)).sum::<f64>() / values.len().max(1) as f64
}

/// Batch mean of the negated clipped surrogate.
pub fn clipped_policy_loss(log_prob_new: &[f64], log_prob_old: &[f64], advantages: &[f64], eps: f64) -> f64 {
    let n = log_prob_new.len().max(1) as f64;
    log_prob_new
        .iter()
        .zip(log_prob_old)
        .zip(advantages)
        .map(|((new, old), a)| {
            let r = (new - old).exp();
            -(r * a).min(r.clamp(1.0 - eps, 1.0 + eps) * a)
        })
        .sum::<f64>()
        / n
}

/// One-step TD advantage and its return target `(advantage, target)`.
pub fn advantage_td(reward: f64, value: f64, next_value: f64, done: bool, gamma: f64) -> (f64, f64) {
    let target = reward + if done { 0.0 } else { gamma * next_value };
    (target - value, target)
}
