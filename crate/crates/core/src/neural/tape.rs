use std::sync::Arc;

use super::{Gradients, Matrix, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Directed message list `(src, dst)`: row `src` of the input is added into
/// row `dst` of an output with `n_out` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    pub n_out: usize,
    pub pairs: Arc<[(usize, usize)]>,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Relu(Var),
    Logistic(Var),
    Exp(Var),
    Square(Var),
    Softmax(Var),
    Aggregate(Var, Adjacency),
    SegmentMean(Var, Arc<[usize]>, Vec<f64>),
    SumAll(Var),
    MeanAll(Var),
    GaussianLogProb { mean: Var, log_std: Var, sample: Arc<Matrix> },
    ClippedSurrogate { log_prob: Var, old: Arc<[f64]>, adv: Arc<[f64]>, eps: f64 },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Append-only record of a forward computation. Inputs always precede the
/// nodes that consume them, so a single reverse sweep computes gradients.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::contract(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; gradients are not propagated into it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(Op::Param(id), store.get(id).clone())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    /// Adds a `1 x c` bias row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(shape_err("add_bias", x.shape(), b.shape()));
        }
        let mut v = x.clone();
        for r in 0..v.rows() {
            v.row_mut(r).iter_mut().zip(b.data()).for_each(|(o, b)| *o += b);
        }
        Ok(self.push(Op::AddBias(a, bias), v))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: fn(f64, f64) -> f64) -> Result<Matrix> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(name, x.shape(), y.shape()));
        }
        Ok(x.zip_map(y, f))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn logistic(&mut self, a: Var) -> Var {
        let v = self.value(a).map(logistic);
        self.push(Op::Logistic(a), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), v)
    }

    /// Row-wise softmax with the row maximum subtracted first.
    pub fn softmax(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for r in 0..v.rows() {
            let row = v.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|x| *x = (*x - max).exp());
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= z);
        }
        self.push(Op::Softmax(a), v)
    }

    /// Sums input rows along the adjacency's messages.
    pub fn aggregate(&mut self, a: Var, adjacency: &Adjacency) -> Result<Var> {
        let x = self.value(a);
        let mut v = Matrix::zeros(adjacency.n_out, x.cols());
        for &(src, dst) in adjacency.pairs.iter() {
            if src >= x.rows() || dst >= adjacency.n_out {
                return Err(Error::contract(format!("edge ({src}, {dst}) outside a graph of {} nodes", x.rows())));
            }
            v.row_mut(dst).iter_mut().zip(x.row(src)).for_each(|(o, h)| *o += h);
        }
        Ok(self.push(Op::Aggregate(a, adjacency.clone()), v))
    }

    /// Mean of the rows belonging to each segment; `segments[i]` is the
    /// segment of row `i`. Every segment must be non-empty.
    pub fn segment_mean(&mut self, a: Var, segments: Arc<[usize]>, count: usize) -> Result<Var> {
        let x = self.value(a);
        if segments.len() != x.rows() {
            return Err(shape_err("segment_mean", x.shape(), (segments.len(), 1)));
        }
        let mut sizes = vec![0.0; count];
        let mut v = Matrix::zeros(count, x.cols());
        for (r, &s) in segments.iter().enumerate() {
            if s >= count {
                return Err(Error::contract(format!("segment {s} out of range {count}")));
            }
            sizes[s] += 1.0;
            v.row_mut(s).iter_mut().zip(x.row(r)).for_each(|(o, h)| *o += h);
        }
        if sizes.contains(&0.0) {
            return Err(Error::contract("mean over an empty segment"));
        }
        for (s, n) in sizes.iter().enumerate() {
            v.row_mut(s).iter_mut().for_each(|o| *o /= n);
        }
        Ok(self.push(Op::SegmentMean(a, segments, sizes), v))
    }

    /// Mean over all rows, as a `1 x cols` row.
    pub fn mean_pool(&mut self, a: Var) -> Result<Var> {
        let rows = self.value(a).rows();
        if rows == 0 {
            return Err(Error::contract("mean pool over an empty graph"));
        }
        self.segment_mean(a, vec![0; rows].into(), 1)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Op::SumAll(a), Matrix::filled(1, 1, s))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s = x.data().iter().sum::<f64>() / x.data().len() as f64;
        self.push(Op::MeanAll(a), Matrix::filled(1, 1, s))
    }

    /// Per-row diagonal Gaussian log-density of `sample` under `mean` (B x A)
    /// and a shared `log_std` row (1 x A). Output is B x 1.
    pub fn gaussian_log_prob(&mut self, mean: Var, log_std: Var, sample: Arc<Matrix>) -> Result<Var> {
        let (mu, ls) = (self.value(mean), self.value(log_std));
        if ls.rows() != 1 || ls.cols() != mu.cols() || sample.shape() != mu.shape() {
            return Err(shape_err("gaussian_log_prob", mu.shape(), ls.shape()));
        }
        let mut v = Matrix::zeros(mu.rows(), 1);
        for b in 0..mu.rows() {
            let mut lp = 0.0;
            for a in 0..mu.cols() {
                let z = (sample.get(b, a) - mu.get(b, a)) * (-ls.get(0, a)).exp();
                lp += -0.5 * z * z - ls.get(0, a) - HALF_LN_TAU;
            }
            v.set(b, 0, lp);
        }
        Ok(self.push(Op::GaussianLogProb { mean, log_std, sample }, v))
    }

    /// Batch mean of `-min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv)` with
    /// `ratio = exp(log_prob - old)`. `old` and `adv` are constants.
    pub fn clipped_surrogate(&mut self, log_prob: Var, old: Arc<[f64]>, adv: Arc<[f64]>, eps: f64) -> Result<Var> {
        let lp = self.value(log_prob);
        if lp.cols() != 1 || lp.rows() != old.len() || old.len() != adv.len() || lp.rows() == 0 {
            return Err(shape_err("clipped_surrogate", lp.shape(), (old.len(), adv.len())));
        }
        let n = lp.rows() as f64;
        let loss = (0..lp.rows())
            .map(|i| {
                let r = (lp.get(i, 0) - old[i]).exp();
                -(r * adv[i]).min(r.clamp(1.0 - eps, 1.0 + eps) * adv[i])
            })
            .sum::<f64>()
            / n;
        Ok(self.push(Op::ClippedSurrogate { log_prob, old, adv, eps }, Matrix::filled(1, 1, loss)))
    }

    /// Reverse sweep from a scalar `root`, returning parameter gradients.
    pub fn backward(&self, root: Var, store: &ParamStore) -> Result<Gradients> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::contract(format!("backward from a non-scalar {:?}", self.value(root).shape())));
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Matrix::filled(1, 1, 1.0));
        let mut grads = Gradients::zeros_like(store);

        fn acc(adj: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut adj[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => grads.accumulate(*id, &g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::AddBias(a, bias) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        gb.data_mut().iter_mut().zip(g.row(r)).for_each(|(o, v)| *o += v);
                    }
                    acc(&mut adj, *bias, gb);
                    acc(&mut adj, *a, g);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *b, g.clone());
                    acc(&mut adj, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *b, g.map(|v| -v));
                    acc(&mut adj, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |g, y| g * y);
                    let gb = g.zip_map(self.value(*a), |g, x| g * x);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Scale(a, s) => acc(&mut adj, *a, g.map(|v| v * s)),
                Op::Tanh(a) => acc(&mut adj, *a, g.zip_map(y, |g, y| g * (1.0 - y * y))),
                Op::Relu(a) => {
                    acc(&mut adj, *a, g.zip_map(self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 }))
                }
                Op::Logistic(a) => acc(&mut adj, *a, g.zip_map(y, |g, y| g * y * (1.0 - y))),
                Op::Exp(a) => acc(&mut adj, *a, g.zip_map(y, |g, y| g * y)),
                Op::Square(a) => acc(&mut adj, *a, g.zip_map(self.value(*a), |g, x| 2.0 * g * x)),
                Op::Softmax(a) => {
                    let mut ga = g.clone();
                    for r in 0..ga.rows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(g, y)| g * y).sum();
                        ga.row_mut(r).iter_mut().zip(y.row(r)).for_each(|(o, y)| *o = y * (*o - dot));
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::Aggregate(a, adjacency) => {
                    let x = self.value(*a);
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    for &(src, dst) in adjacency.pairs.iter() {
                        ga.row_mut(src).iter_mut().zip(g.row(dst)).for_each(|(o, v)| *o += v);
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::SegmentMean(a, segments, sizes) => {
                    let mut ga = Matrix::zeros(segments.len(), g.cols());
                    for (r, &s) in segments.iter().enumerate() {
                        let n = sizes[s];
                        ga.row_mut(r).iter_mut().zip(g.row(s)).for_each(|(o, v)| *o = v / n);
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::SumAll(a) => {
                    let (r, c) = self.value(*a).shape();
                    acc(&mut adj, *a, Matrix::filled(r, c, g.data()[0]));
                }
                Op::MeanAll(a) => {
                    let (r, c) = self.value(*a).shape();
                    acc(&mut adj, *a, Matrix::filled(r, c, g.data()[0] / (r * c) as f64));
                }
                Op::GaussianLogProb { mean, log_std, sample } => {
                    let (mu, ls) = (self.value(*mean), self.value(*log_std));
                    let mut gm = Matrix::zeros(mu.rows(), mu.cols());
                    let mut gl = Matrix::zeros(1, mu.cols());
                    for b in 0..mu.rows() {
                        let gb = g.get(b, 0);
                        for a in 0..mu.cols() {
                            let inv_var = (-2.0 * ls.get(0, a)).exp();
                            let d = sample.get(b, a) - mu.get(b, a);
                            gm.set(b, a, gb * d * inv_var);
                            gl.data_mut()[a] += gb * (d * d * inv_var - 1.0);
                        }
                    }
                    acc(&mut adj, *mean, gm);
                    acc(&mut adj, *log_std, gl);
                }
                Op::ClippedSurrogate { log_prob, old, adv, eps } => {
                    let lp = self.value(*log_prob);
                    let n = lp.rows() as f64;
                    let scale = g.data()[0];
                    let mut gl = Matrix::zeros(lp.rows(), 1);
                    for i in 0..lp.rows() {
                        let r = (lp.get(i, 0) - old[i]).exp();
                        let unclipped = r * adv[i];
                        let clipped = r.clamp(1.0 - eps, 1.0 + eps) * adv[i];
                        // Only the unclipped branch depends on the parameters.
                        if unclipped <= clipped {
                            gl.set(i, 0, -scale * unclipped / n);
                        }
                    }
                    acc(&mut adj, *log_prob, gl);
                }
            }
        }
        Ok(grads)
    }
}
