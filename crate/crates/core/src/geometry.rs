//! Waveguides, antenna placement along them and the scenario description.
//!
//! Every antenna lives at a scalar coordinate `s` along a straight
//! waveguide segment; its 3D position is `origin + s * direction`. The
//! three deployments of the experiments (1D, 2D, 3D) are all built from
//! such segments, which is also the space the agent's displacement actions
//! act in.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AmplitudeMode;

/// Absolute slack used when comparing spacings and range bounds (m).
pub const SPACING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A straight dielectric waveguide segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveguide {
    origin: Vec3,
    direction: Vec3,
    length: f64,
    feed_point: Vec3,
}

impl Waveguide {
    /// Builds a segment starting at `origin`. `direction` is normalized here;
    /// the feed point must lie on the segment.
    pub fn new(origin: Vec3, direction: Vec3, length: f64, feed_point: Vec3) -> Result<Self> {
        let norm = direction.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InfeasibleGeometry("waveguide direction must be non-zero".into()));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InfeasibleGeometry(format!(
                "waveguide length must be positive, got {length}"
            )));
        }
        if !origin.is_finite() || !feed_point.is_finite() {
            return Err(Error::InfeasibleGeometry("non-finite waveguide coordinates".into()));
        }
        let direction = direction * (1.0 / norm);
        let along = (feed_point - origin).dot(direction);
        let off_line = (feed_point - (origin + direction * along)).norm();
        if off_line >= 1e-9 || along < -1e-9 || along > length + 1e-9 {
            return Err(Error::InfeasibleGeometry(
                "feed point does not lie on the waveguide segment".into(),
            ));
        }
        Ok(Self { origin, direction, length, feed_point })
    }

    /// Segment whose feed sits at its origin.
    pub fn fed_at_origin(origin: Vec3, direction: Vec3, length: f64) -> Result<Self> {
        Self::new(origin, direction, length, origin)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn feed_point(&self) -> Vec3 {
        self.feed_point
    }

    pub fn point_at(&self, s: f64) -> Vec3 {
        self.origin + self.direction * s
    }

    /// Returns a copy moved by `offset` (feed point included).
    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            origin: self.origin + offset,
            direction: self.direction,
            length: self.length,
            feed_point: self.feed_point + offset,
        }
    }
}

/// Which waveguide an antenna sits on and where along it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub waveguide: usize,
    pub s: f64,
}

/// Antenna coordinates along their waveguides plus the derived 3D positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaLayout {
    assignments: Vec<Assignment>,
    positions: Vec<Vec3>,
}

impl AntennaLayout {
    pub fn new(waveguides: &[Waveguide], assignments: Vec<Assignment>) -> Result<Self> {
        let mut positions = Vec::with_capacity(assignments.len());
        for (i, a) in assignments.iter().enumerate() {
            let wg = waveguides.get(a.waveguide).ok_or_else(|| {
                Error::InfeasibleGeometry(format!(
                    "antenna {i} references missing waveguide {}",
                    a.waveguide
                ))
            })?;
            if !a.s.is_finite() || a.s < -SPACING_TOL || a.s > wg.length() + SPACING_TOL {
                return Err(Error::InfeasibleGeometry(format!(
                    "antenna {i} coordinate {} outside [0, {}]",
                    a.s,
                    wg.length()
                )));
            }
            positions.push(wg.point_at(a.s));
        }
        Ok(Self { assignments, positions })
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Indices of the antennas on waveguide `wg`, in layout order.
    pub fn antennas_on(&self, wg: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i].waveguide == wg).collect()
    }

    /// Replaces every scalar coordinate and recomputes positions.
    pub fn with_scalars(&self, waveguides: &[Waveguide], scalars: &[f64]) -> Result<Self> {
        if scalars.len() != self.len() {
            return Err(Error::contract(format!(
                "expected {} scalars, got {}",
                self.len(),
                scalars.len()
            )));
        }
        let assignments = self
            .assignments
            .iter()
            .zip(scalars)
            .map(|(a, &s)| Assignment { waveguide: a.waveguide, s })
            .collect();
        Self::new(waveguides, assignments)
    }

    /// Sum over same-waveguide adjacent pairs of `max(0, delta - gap)`.
    pub fn spacing_shortfall(&self, delta: f64) -> f64 {
        let n_wg = self.assignments.iter().map(|a| a.waveguide + 1).max().unwrap_or(0);
        (0..n_wg)
            .map(|wg| {
                let scalars: Vec<f64> =
                    self.antennas_on(wg).iter().map(|&i| self.assignments[i].s).collect();
                spacing_shortfall(&scalars, delta)
            })
            .sum()
    }

    /// True when every same-waveguide pair is at least `delta - SPACING_TOL` apart.
    pub fn satisfies_spacing(&self, delta: f64) -> bool {
        self.spacing_shortfall(delta - SPACING_TOL) == 0.0
    }
}

/// Sorted-adjacent shortfall `sum max(0, delta - gap)` of a set of coordinates.
pub fn spacing_shortfall(scalars: &[f64], delta: f64) -> f64 {
    let mut sorted = scalars.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|w| (delta - (w[1] - w[0])).max(0.0)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeploymentKind {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl DeploymentKind {
    pub const ALL: [DeploymentKind; 3] = [Self::OneD, Self::TwoD, Self::ThreeD];

    pub fn waveguide_count(self) -> usize {
        match self {
            Self::OneD => 1,
            Self::TwoD | Self::ThreeD => 3,
        }
    }
}

impl fmt::Display for DeploymentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OneD => "1D",
            Self::TwoD => "2D",
            Self::ThreeD => "3D",
        })
    }
}

impl FromStr for DeploymentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "1d" => Ok(Self::OneD),
            "2d" => Ok(Self::TwoD),
            "3d" => Ok(Self::ThreeD),
            other => Err(format!("unknown deployment `{other}` (expected 1d, 2d or 3d)")),
        }
    }
}

/// Splits `n` items over `bins` as evenly as possible, earlier bins first.
pub fn split_evenly(n: usize, bins: usize) -> Vec<usize> {
    (0..bins).map(|i| n / bins + usize::from(i < n % bins)).collect()
}

/// Builds the waveguides of a deployment and the initial antenna layout.
///
/// All segments are `area` long and fed at their origin. 1D is one vertical
/// line at `x = area/2`, 2D three vertical lines at `x = 0, area/2, area`,
/// 3D three segments leaving `(0, 0, height)` along `+x`, `+y`, `+z`.
/// Antennas on a waveguide carrying `n` of them start at
/// `s_i = (i + 1) * area / (n + 1)`.
pub fn make_deployment(
    kind: DeploymentKind,
    n_antennas: usize,
    area: f64,
    height: f64,
    delta: f64,
) -> Result<(Vec<Waveguide>, AntennaLayout)> {
    if n_antennas == 0 {
        return Err(Error::InfeasibleGeometry("deployment needs at least one antenna".into()));
    }
    if !(area > 0.0 && height.is_finite() && delta > 0.0) {
        return Err(Error::InfeasibleGeometry(format!(
            "bad deployment extent: area {area}, height {height}, delta {delta}"
        )));
    }
    let up = Vec3::new(0.0, 0.0, 1.0);
    let waveguides = match kind {
        DeploymentKind::OneD => vec![Waveguide::fed_at_origin(
            Vec3::new(area / 2.0, 0.0, height),
            up,
            area,
        )?],
        DeploymentKind::TwoD => [0.0, area / 2.0, area]
            .into_iter()
            .map(|x| Waveguide::fed_at_origin(Vec3::new(x, 0.0, height), up, area))
            .collect::<Result<_>>()?,
        DeploymentKind::ThreeD => {
            let corner = Vec3::new(0.0, 0.0, height);
            [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), up]
                .into_iter()
                .map(|dir| Waveguide::fed_at_origin(corner, dir, area))
                .collect::<Result<_>>()?
        }
    };

    let mut assignments = Vec::with_capacity(n_antennas);
    for (wg, &count) in split_evenly(n_antennas, waveguides.len()).iter().enumerate() {
        let length = waveguides[wg].length();
        let gap = length / (count + 1) as f64;
        if count > 0 && gap < delta {
            return Err(Error::InfeasibleGeometry(format!(
                "{count} antennas cannot keep spacing {delta} m on a {length} m waveguide"
            )));
        }
        assignments.extend((0..count).map(|i| Assignment { waveguide: wg, s: (i + 1) as f64 * gap }));
    }
    let layout = AntennaLayout::new(&waveguides, assignments)?;
    Ok((waveguides, layout))
}

/// Order-preserving projection of coordinates onto `{gap >= delta} ∩ [0, length]^n`.
///
/// Sorts, pushes each coordinate right of its predecessor by at least
/// `delta`, then pulls the right edge back inside the segment. Pairs already
/// within [`SPACING_TOL`] of feasibility are left untouched, which makes the
/// projection exactly idempotent.
pub fn project_spacing(scalars: &[f64], delta: f64, length: f64) -> Result<Vec<f64>> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InfeasibleGeometry(format!("spacing must be positive, got {delta}")));
    }
    if let Some(bad) = scalars.iter().position(|s| !s.is_finite()) {
        return Err(Error::InfeasibleGeometry(format!("coordinate {bad} is not finite")));
    }
    if scalars.len() > 1 && (scalars.len() - 1) as f64 * delta > length + SPACING_TOL {
        return Err(Error::InfeasibleGeometry(format!(
            "{} antennas at spacing {delta} m do not fit in {length} m",
            scalars.len()
        )));
    }

    let mut s: Vec<f64> = scalars.iter().map(|v| v.clamp(0.0, length)).collect();
    s.sort_by(f64::total_cmp);
    for i in 1..s.len() {
        if s[i] < s[i - 1] + delta - SPACING_TOL {
            s[i] = s[i - 1] + delta;
        }
    }
    if let Some(last) = s.last_mut() {
        *last = last.min(length);
    }
    for i in (0..s.len().saturating_sub(1)).rev() {
        if s[i] > s[i + 1] - delta + SPACING_TOL {
            s[i] = s[i + 1] - delta;
        }
    }
    if let Some(first) = s.first_mut() {
        *first = first.max(0.0);
    }
    Ok(s)
}

/// Smallest Euclidean distance over all antenna pairs, across waveguides too.
pub fn min_pairwise_distance(layout: &AntennaLayout) -> Result<f64> {
    let p = layout.positions();
    if p.len() < 2 {
        return Err(Error::UndefinedDistance(p.len()));
    }
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            best = best.min(p[i].distance(p[j]));
        }
    }
    Ok(best)
}

/// Immutable world description for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<Vec3>,
    pub targets: Vec<Vec3>,
    pub waveguides: Vec<Waveguide>,
    /// Carrier frequency (Hz).
    pub carrier_freq: f64,
    pub n_eff: f64,
    /// Minimum same-waveguide antenna spacing (m).
    pub delta: f64,
    /// Per-user transmit power cap (W).
    pub p_max: f64,
    /// Episode budget on the sum over slots of `sum_k p_k q_k` (W·slot).
    pub energy_budget: f64,
    /// Noise power (W).
    pub noise_power: f64,
    /// Sensing SNR threshold (linear).
    pub gamma_min: f64,
    pub slots: usize,
    pub snr_amplitude: AmplitudeMode,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.users.is_empty() {
            return bad("at least one user is required".into());
        }
        for (kind, pts) in [("user", &self.users), ("target", &self.targets)] {
            for (i, p) in pts.iter().enumerate() {
                if !p.is_finite() || p.z != 0.0 {
                    return bad(format!("{kind} {i} must be a finite point in the z = 0 plane"));
                }
            }
        }
        if self.waveguides.is_empty() {
            return bad("no waveguides".into());
        }
        let positive = [
            ("carrier frequency", self.carrier_freq),
            ("n_eff", self.n_eff),
            ("delta", self.delta),
            ("p_max", self.p_max),
            ("energy budget", self.energy_budget),
            ("noise power", self.noise_power),
            ("gamma_min", self.gamma_min),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be strictly positive, got {v}"));
            }
        }
        if self.slots == 0 {
            return bad("slots must be at least 1".into());
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }
}
