use super::{Gradients, Matrix, ParamStore};

/// Adam with one learning rate per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub group_lr: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(store: &ParamStore, group_lr: Vec<f64>) -> Self {
        let zeros: Vec<Matrix> =
            store.params().iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
        Self { group_lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in store.iter_mut().zip(grads.iter()).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let lr = self.group_lr[p.group];
            let it = p.value.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut()));
            for ((w, &g), (m, v)) in it {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Tape;

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let x = store.add("x", Matrix::row_vector(&[3.0, -2.0]), 0);
        let mut adam = Adam::new(&store, vec![0.05]);
        for _ in 0..2000 {
            let mut tape = Tape::new();
            let xv = tape.param(&store, x);
            let sq = tape.square(xv);
            let loss = tape.sum_all(sq);
            let g = tape.backward(loss, &store).unwrap();
            adam.step(&mut store, &g);
        }
        assert!(store.get(x).data().iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn global_norm_clipping() {
        let mut store = ParamStore::new();
        let x = store.add("x", Matrix::row_vector(&[3.0, 4.0]), 0);
        let mut tape = Tape::new();
        let xv = tape.param(&store, x);
        let sq = tape.square(xv);
        let loss = tape.sum_all(sq);
        let mut g = tape.backward(loss, &store).unwrap();
        assert_eq!(g.clip_global_norm(1.0), 10.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-15);
        assert!((g.get(x).data()[0] - 0.6).abs() < 1e-15);
    }
}
