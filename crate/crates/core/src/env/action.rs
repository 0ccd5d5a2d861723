use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Allocation;

/// Bounds used to map an unconstrained policy output onto a feasible action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionLimits {
    pub antennas: usize,
    pub users: usize,
    /// Largest per-step antenna displacement (m).
    pub step_max: f64,
    /// Per-user power cap (W).
    pub p_max: f64,
}

impl ActionLimits {
    /// Length of the raw action: one displacement per antenna, then one
    /// fraction logit and one power logit per user.
    pub fn raw_dim(&self) -> usize {
        self.antennas + 2 * self.users
    }
}

/// A feasible action: displacements plus the slot allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedAction {
    pub displacements: Vec<f64>,
    pub allocation: Allocation,
}

impl ProjectedAction {
    /// The fraction left unassigned to any user.
    pub fn idle_fraction(&self) -> f64 {
        1.0 - self.allocation.total_fraction()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps a raw action onto the feasible set.
///
/// Displacements are `step_max * tanh(raw)`. The fractions are a softmax over
/// the user logits plus a fixed zero "idle" logit whose share is dropped, so
/// they always sum to at most one. Powers are `p_max * logistic(raw)`.
pub fn project_action(raw: &[f64], limits: &ActionLimits) -> Result<ProjectedAction> {
    if raw.len() != limits.raw_dim() {
        return Err(Error::ActionLength { expected: limits.raw_dim(), got: raw.len() });
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteAction(i));
    }
    let (disp_raw, rest) = raw.split_at(limits.antennas);
    let (q_raw, p_raw) = rest.split_at(limits.users);

    let displacements = disp_raw.iter().map(|v| limits.step_max * v.tanh()).collect();

    let max_logit = q_raw.iter().copied().fold(0.0_f64, f64::max);
    let weights: Vec<f64> = q_raw.iter().map(|v| (v - max_logit).exp()).collect();
    let z: f64 = weights.iter().sum::<f64>() + (-max_logit).exp();
    let mut q: Vec<f64> = weights.iter().map(|w| w / z).collect();
    // Rounding can push the sum a few ulps past one when the idle share vanishes.
    while q.iter().sum::<f64>() > 1.0 {
        q.iter_mut().for_each(|v| *v *= 1.0 - f64::EPSILON);
    }

    let p = p_raw.iter().map(|v| limits.p_max * logistic(*v)).collect();
    Ok(ProjectedAction { displacements, allocation: Allocation { q, p } })
}
