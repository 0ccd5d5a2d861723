//! Per-slot communication rate, sensing SNR, energy and constraint checks.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::{effective_gain, effective_gains, ComplexGain, RfConstants};
use crate::error::{Error, Result};
use crate::geometry::{AntennaLayout, Scenario, Waveguide};

/// How the per-antenna signal amplitude of user `k`'s slice enters the
/// sensing SNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMode {
    /// Amplitude `sqrt(p_k / M)`, the same one that drives the rate.
    #[default]
    SqrtPower,
    /// Amplitude `p_k / M` inside the magnitude.
    AsWritten,
}

impl AmplitudeMode {
    pub fn other(self) -> Self {
        match self {
            AmplitudeMode::SqrtPower => AmplitudeMode::AsWritten,
            AmplitudeMode::AsWritten => AmplitudeMode::SqrtPower,
        }
    }

    /// Squared per-antenna amplitude for transmit power `p` over `m` antennas.
    pub fn power_factor(self, p: f64, m: usize) -> f64 {
        let a = p / m as f64;
        match self {
            AmplitudeMode::SqrtPower => a,
            AmplitudeMode::AsWritten => a * a,
        }
    }
}

/// TDMA fractions and transmit powers for one slot, one entry per user.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Allocation {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl Allocation {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::InvalidAllocation(format!(
                "{} slot fractions but {} powers",
                q.len(),
                p.len()
            )));
        }
        if q.iter().chain(&p).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidAllocation(
                "fractions and powers must be finite and non-negative".into(),
            ));
        }
        Ok(Self { q, p })
    }

    pub fn zeros(users: usize) -> Self {
        Self { q: vec![0.0; users], p: vec![0.0; users] }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn total_fraction(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// SNR argument of the rate's logarithm, `p |g|^2 / (M q sigma^2)`.
pub fn rate_snr(q: f64, p: f64, gain_sq: f64, m: usize, noise_power: f64) -> f64 {
    if q == 0.0 || p == 0.0 {
        return 0.0;
    }
    (p * gain_sq) / (m as f64 * q * noise_power)
}

/// Achievable rate of one user (bps/Hz) given its slot fraction and power.
///
/// A zero fraction or zero power yields zero, the `q -> 0+` limit.
pub fn comm_rate(q: f64, p: f64, gain: ComplexGain, m: usize, noise_power: f64) -> f64 {
    debug_assert!(q >= 0.0 && p >= 0.0 && noise_power > 0.0 && m >= 1);
    let snr = rate_snr(q, p, gain.norm_sqr(), m, noise_power);
    if snr == 0.0 {
        return 0.0;
    }
    q * snr.ln_1p() / LN_2
}

/// Sensing SNR of one target from precomputed effective gains.
///
/// `sum_k S(target, k) / (S(user k, k) + sigma^2)` where `S(x, k)` is the
/// received power at `x` during user `k`'s slice.
pub fn sensing_snr_from_gains(
    target_gain: ComplexGain,
    user_gains: &[ComplexGain],
    powers: &[f64],
    m: usize,
    noise_power: f64,
    mode: AmplitudeMode,
) -> f64 {
    let target_sq = target_gain.norm_sqr();
    user_gains
        .iter()
        .zip(powers)
        .map(|(g, &p)| {
            let amp = mode.power_factor(p, m);
            target_sq * amp / (g.norm_sqr() * amp + noise_power)
        })
        .sum()
}

/// Sensing SNR (linear) of target `target` under `allocation`.
pub fn sensing_snr(
    target: usize,
    layout: &AntennaLayout,
    waveguides: &[Waveguide],
    rf: &RfConstants,
    allocation: &Allocation,
    scenario: &Scenario,
) -> Result<f64> {
    let point = *scenario
        .targets
        .get(target)
        .ok_or_else(|| Error::contract(format!("no target with index {target}")))?;
    if allocation.len() != scenario.num_users() {
        return Err(Error::InvalidAllocation(format!(
            "allocation covers {} users, scenario has {}",
            allocation.len(),
            scenario.num_users()
        )));
    }
    let target_gain = effective_gain(point, layout, waveguides, rf)?;
    let user_gains = effective_gains(&scenario.users, layout, waveguides, rf)?;
    Ok(sensing_snr_from_gains(
        target_gain,
        &user_gains,
        &allocation.p,
        layout.len(),
        scenario.noise_power,
        scenario.snr_amplitude,
    ))
}

/// Energy spent in one slot, `sum_k p_k q_k`.
pub fn slot_energy(allocation: &Allocation) -> f64 {
    allocation.q.iter().zip(&allocation.p).map(|(q, p)| q * p).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintStatus {
    pub satisfied: bool,
    /// Shortfall in the constraint's own unit; zero when satisfied.
    pub violation: f64,
}

impl ConstraintStatus {
    fn from_violation(violation: f64) -> Self {
        Self { satisfied: violation <= 0.0, violation: violation.max(0.0) }
    }
}

/// Status of every constraint of the sum-rate problem for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Every target's SNR reaches the threshold (linear SNR units).
    pub sensing: ConstraintStatus,
    /// Slot fractions sum to at most one.
    pub tdma: ConstraintStatus,
    /// Cumulative energy within the episode budget (W·slot).
    pub energy: ConstraintStatus,
    /// Every power within `[0, p_max]` (W).
    pub power: ConstraintStatus,
    /// Same-waveguide antenna spacing at least `delta` (m).
    pub spacing: ConstraintStatus,
}

impl FeasibilityReport {
    pub fn all_satisfied(&self) -> bool {
        self.statuses().iter().all(|s| s.satisfied)
    }

    pub fn statuses(&self) -> [ConstraintStatus; 5] {
        [self.sensing, self.tdma, self.energy, self.power, self.spacing]
    }
}

/// Checks every constraint. `cumulative_energy` includes the current slot.
pub fn feasibility_report(
    scenario: &Scenario,
    layout: &AntennaLayout,
    allocation: &Allocation,
    sensing_snrs: &[f64],
    cumulative_energy: f64,
) -> FeasibilityReport {
    let sensing = sensing_snrs.iter().map(|g| (scenario.gamma_min - g).max(0.0)).sum();
    let power = allocation
        .p
        .iter()
        .map(|&p| (p - scenario.p_max).max(0.0) + (-p).max(0.0))
        .sum();
    FeasibilityReport {
        sensing: ConstraintStatus::from_violation(sensing),
        tdma: ConstraintStatus::from_violation(allocation.total_fraction() - 1.0),
        energy: ConstraintStatus::from_violation(cumulative_energy - scenario.energy_budget),
        power: ConstraintStatus::from_violation(power),
        spacing: ConstraintStatus::from_violation(layout.spacing_shortfall(scenario.delta)),
    }
}

/// Everything measured in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub rates: Vec<f64>,
    pub sensing_snrs: Vec<f64>,
    /// The same SNRs under the other [`AmplitudeMode`]; reported, never constrained.
    pub alt_sensing_snrs: Vec<f64>,
    pub energy: f64,
    pub feasibility: FeasibilityReport,
}

impl SlotMetrics {
    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn min_sensing_snr(&self) -> f64 {
        self.sensing_snrs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates rates, sensing SNRs, energy and feasibility for one slot.
/// `energy_before` is the episode energy spent before this slot.
pub fn evaluate_slot(
    scenario: &Scenario,
    layout: &AntennaLayout,
    rf: &RfConstants,
    allocation: &Allocation,
    energy_before: f64,
) -> Result<SlotMetrics> {
    if allocation.len() != scenario.num_users() {
        return Err(Error::InvalidAllocation(format!(
            "allocation covers {} users, scenario has {}",
            allocation.len(),
            scenario.num_users()
        )));
    }
    let m = layout.len();
    let user_gains = effective_gains(&scenario.users, layout, &scenario.waveguides, rf)?;
    let target_gains = effective_gains(&scenario.targets, layout, &scenario.waveguides, rf)?;
    let rates = user_gains
        .iter()
        .enumerate()
        .map(|(k, g)| comm_rate(allocation.q[k], allocation.p[k], *g, m, scenario.noise_power))
        .collect();
    let snrs = |mode: AmplitudeMode| -> Vec<f64> {
        target_gains
            .iter()
            .map(|t| sensing_snr_from_gains(*t, &user_gains, &allocation.p, m, scenario.noise_power, mode))
            .collect()
    };
    let sensing_snrs = snrs(scenario.snr_amplitude);
    let alt_sensing_snrs = snrs(scenario.snr_amplitude.other());
    let energy = slot_energy(allocation);
    let feasibility =
        feasibility_report(scenario, layout, allocation, &sensing_snrs, energy_before + energy);
    Ok(SlotMetrics { rates, sensing_snrs, alt_sensing_snrs, energy, feasibility })
}
