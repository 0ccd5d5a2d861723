use rand::Rng;

use super::Matrix;
use crate::error::{Error, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    /// Optimizer group; groups may use different learning rates.
    pub group: usize,
}

/// Named learnable matrices, in creation order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter initialized uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        group: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        let value = Matrix::from_vec(rows, cols, data).expect("sized by construction");
        self.add(name, value, group)
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix, group: usize) -> ParamId {
        let name = name.into();
        debug_assert!(self.params.iter().all(|p| p.name != name), "duplicate parameter {name}");
        self.params.push(Param { name, value, group });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar weights.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Name of the first parameter holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.params.iter().find(|p| !p.value.is_finite()).map(|p| p.name.as_str())
    }

    /// Overwrites values from `(name, matrix)` pairs that must match this
    /// store's names and shapes exactly, in order.
    pub fn load(&mut self, values: Vec<(String, Matrix)>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::contract(format!(
                "checkpoint has {} parameters, model has {}",
                values.len(),
                self.params.len()
            )));
        }
        for (p, (name, value)) in self.params.iter().zip(&values) {
            if p.name != *name || p.value.shape() != value.shape() {
                return Err(Error::contract(format!(
                    "checkpoint parameter `{name}` {:?} does not match `{}` {:?}",
                    value.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
        }
        for (p, (_, value)) in self.params.iter_mut().zip(values) {
            p.value = value;
        }
        Ok(())
    }
}

/// Gradients aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store.params().iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &Matrix) {
        self.grads[id.0].add_assign(g);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.grads.iter()
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().map(Matrix::sum_sq).sum::<f64>().sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for g in &mut self.grads {
                g.data_mut().iter_mut().for_each(|v| *v *= s);
            }
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(Matrix::is_finite)
    }
}
