use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Adjacency, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    #[default]
    Tanh,
    Relu,
    Logistic,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
            Activation::Logistic => tape.logistic(x),
        }
    }
}

/// Affine layer `x W + b` over row vectors, with `W` stored `in x out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        group: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w = store.add_uniform(format!("{name}.w"), input, output, input, group, rng);
        let b = store.add_uniform(format!("{name}.b"), 1, output, input, group, rng);
        Self { w, b, input, output }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let xw = tape.matmul(x, w)?;
        tape.add_bias(xw, b)
    }
}

/// Relation-typed message passing layer:
/// `h'_v = act( sum_r sum_{u in N_r(v)} h_u W_r + h_v W_0 )`.
///
/// Aggregation is an unnormalized sum and there is no bias. A layer built
/// with one relation is the homogeneous variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RelGnnLayer {
    pub relations: Vec<ParamId>,
    pub self_loop: ParamId,
    pub activation: Activation,
    pub input: usize,
    pub output: usize,
}

impl RelGnnLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        relation_names: &[&str],
        input: usize,
        output: usize,
        activation: Activation,
        group: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let relations = relation_names
            .iter()
            .map(|r| store.add_uniform(format!("{name}.w_{r}"), input, output, input, group, rng))
            .collect();
        let self_loop = store.add_uniform(format!("{name}.w_self"), input, output, input, group, rng);
        Self { relations, self_loop, activation, input, output }
    }

    /// `adjacency[r]` lists the messages of relation `r`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h: Var, adjacency: &[Adjacency]) -> Result<Var> {
        if adjacency.len() != self.relations.len() {
            return Err(Error::contract(format!(
                "graph has {} relation types, layer expects {}",
                adjacency.len(),
                self.relations.len()
            )));
        }
        let n = tape.value(h).rows();
        let w0 = tape.param(store, self.self_loop);
        let mut acc = tape.matmul(h, w0)?;
        for (w, adj) in self.relations.iter().zip(adjacency) {
            if adj.n_out != n {
                return Err(Error::contract(format!("adjacency sized for {} nodes, input has {n}", adj.n_out)));
            }
            if adj.pairs.is_empty() {
                continue;
            }
            let msgs = tape.aggregate(h, adj)?;
            let w = tape.param(store, *w);
            let m = tape.matmul(msgs, w)?;
            acc = tape.add(acc, m)?;
        }
        Ok(self.activation.apply(tape, acc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Matrix;
    use std::sync::Arc;

    fn identity_layer(relations: usize, dim: usize) -> (ParamStore, RelGnnLayer) {
        let mut store = ParamStore::new();
        let rel = (0..relations).map(|r| store.add(format!("w{r}"), Matrix::identity(dim), 0)).collect();
        let self_loop = store.add("w_self", Matrix::identity(dim), 0);
        let layer =
            RelGnnLayer { relations: rel, self_loop, activation: Activation::Identity, input: dim, output: dim };
        (store, layer)
    }

    fn run(store: &ParamStore, layer: &RelGnnLayer, h: Matrix, adj: &[Adjacency]) -> Matrix {
        let mut tape = Tape::new();
        let hv = tape.constant(h);
        let out = layer.forward(&mut tape, store, hv, adj).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn dense_identity() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::identity(3), 0);
        let b = store.add("b", Matrix::zeros(1, 3), 0);
        let d = Dense { w, b, input: 3, output: 3 };
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(&[1.0, -2.0, 0.5]));
        let y = d.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn isolated_node_keeps_its_embedding() {
        let (store, layer) = identity_layer(1, 2);
        let adj = [Adjacency { n_out: 1, pairs: Arc::new([]) }];
        let h = Matrix::row_vector(&[0.7, -0.2]);
        assert_eq!(run(&store, &layer, h.clone(), &adj), h);
    }

    #[test]
    fn single_neighbor_adds() {
        let (store, layer) = identity_layer(1, 2);
        let adj = [Adjacency { n_out: 2, pairs: Arc::new([(1, 0)]) }];
        let h = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(run(&store, &layer, h, &adj).row(0), &[1.0, 1.0]);
    }

    #[test]
    fn two_equal_neighbors_double_the_message() {
        let (store, layer) = identity_layer(1, 2);
        let h = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.3, 0.4], vec![0.3, 0.4]]).unwrap();
        let one = run(&store, &layer, h.clone(), &[Adjacency { n_out: 3, pairs: Arc::new([(1, 0)]) }]);
        let two = run(&store, &layer, h, &[Adjacency { n_out: 3, pairs: Arc::new([(1, 0), (2, 0)]) }]);
        assert_eq!(two.row(0), &[2.0 * one.get(0, 0), 2.0 * one.get(0, 1)]);
    }

    #[test]
    fn relation_count_mismatch_is_a_contract_error() {
        let (store, layer) = identity_layer(3, 2);
        let mut tape = Tape::new();
        let h = tape.constant(Matrix::zeros(1, 2));
        let adj = [Adjacency { n_out: 1, pairs: Arc::new([]) }];
        assert!(matches!(layer.forward(&mut tape, &store, h, &adj), Err(Error::Contract(_))));
    }
}
