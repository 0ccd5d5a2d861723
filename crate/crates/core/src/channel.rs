//! Near-field line-of-sight channel between pinching antennas and ground terminals.
//!
//! Amplitude decays as `alpha / d` and the phase is the exact path length in
//! free-space wavelengths; no far-field approximation is made anywhere. Each
//! antenna additionally carries the in-waveguide phase accumulated between
//! its waveguide's feed point and itself.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AntennaLayout, Vec3, Waveguide};

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Complex channel amplitude. The `1/m` carried by `alpha / d` is folded into
/// the gain by convention.
pub type ComplexGain = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfConstants {
    /// Free-space wavelength (m).
    pub wavelength: f64,
    /// In-waveguide wavelength `wavelength / n_eff` (m).
    pub guided_wavelength: f64,
    /// Free-space amplitude constant `c / (4 pi f_c)` (m).
    pub alpha: f64,
    pub speed_of_light: f64,
}

impl RfConstants {
    pub fn new(carrier_freq: f64, n_eff: f64) -> Result<Self> {
        if !(carrier_freq.is_finite() && carrier_freq > 0.0 && n_eff.is_finite() && n_eff > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "carrier frequency ({carrier_freq}) and n_eff ({n_eff}) must be positive"
            )));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_freq;
        Ok(Self {
            wavelength,
            guided_wavelength: wavelength / n_eff,
            alpha: SPEED_OF_LIGHT / (4.0 * PI * carrier_freq),
            speed_of_light: SPEED_OF_LIGHT,
        })
    }
}

/// `2 pi * frac(d / wavelength)`, in `[0, 2 pi)`.
fn wrapped_phase(distance: f64, wavelength: f64) -> f64 {
    let turns = (distance / wavelength).rem_euclid(1.0);
    let phase = TAU * turns;
    if phase >= TAU {
        0.0
    } else {
        phase
    }
}

/// Phase accumulated inside the waveguide between `feed` and `antenna`.
pub fn phase_shift(feed: Vec3, antenna: Vec3, guided_wavelength: f64) -> f64 {
    debug_assert!(guided_wavelength > 0.0);
    wrapped_phase(feed.distance(antenna), guided_wavelength)
}

/// Spherical-wave coefficient `alpha * exp(-j 2 pi d / lambda) / d`.
pub fn channel_coeff(terminal: Vec3, antenna: Vec3, rf: &RfConstants) -> Result<ComplexGain> {
    let d = terminal.distance(antenna);
    if d == 0.0 {
        return Err(Error::SingularChannel { antenna: 0 });
    }
    Ok(Complex64::from_polar(rf.alpha / d, -wrapped_phase(d, rf.wavelength)))
}

/// Coherent sum over every antenna of its channel coefficient times its feed phase.
pub fn effective_gain(
    terminal: Vec3,
    layout: &AntennaLayout,
    waveguides: &[Waveguide],
    rf: &RfConstants,
) -> Result<ComplexGain> {
    let mut total = Complex64::new(0.0, 0.0);
    for (n, (pos, a)) in layout.positions().iter().zip(layout.assignments()).enumerate() {
        let d = terminal.distance(*pos);
        if d == 0.0 {
            return Err(Error::SingularChannel { antenna: n });
        }
        let feed = waveguides[a.waveguide].feed_point();
        let theta = phase_shift(feed, *pos, rf.guided_wavelength);
        // Both phases are already reduced, so their sum stays within (-4 pi, 0].
        total += Complex64::from_polar(rf.alpha / d, -(wrapped_phase(d, rf.wavelength) + theta));
    }
    Ok(total)
}

/// Effective gains for a batch of terminals, in order.
pub fn effective_gains(
    terminals: &[Vec3],
    layout: &AntennaLayout,
    waveguides: &[Waveguide],
    rf: &RfConstants,
) -> Result<Vec<ComplexGain>> {
    terminals.iter().map(|&t| effective_gain(t, layout, waveguides, rf)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_deployment, Assignment, DeploymentKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rf28() -> RfConstants {
        RfConstants::new(28e9, 1.4).unwrap()
    }

    #[test]
    fn constants_are_consistent() {
        let rf = rf28();
        assert!(rf.guided_wavelength < rf.wavelength);
        assert_relative_eq!(rf.alpha, rf.wavelength / (4.0 * PI), max_relative = 1e-15);
        assert!(RfConstants::new(0.0, 1.4).is_err());
    }

    #[test]
    fn phase_shift_examples() {
        let l0 = rf28().guided_wavelength;
        let feed = Vec3::new(0.0, 0.0, 10.0);
        assert_eq!(phase_shift(feed, feed + Vec3::new(l0, 0.0, 0.0), l0), 0.0);
        assert_relative_eq!(
            phase_shift(feed, feed + Vec3::new(0.0, l0 / 2.0, 0.0), l0),
            PI,
            max_relative = 1e-15
        );
        assert_eq!(phase_shift(feed, feed, l0), 0.0);
    }

    #[test]
    fn channel_coeff_examples() {
        let rf = rf28();
        let ant = Vec3::new(0.0, 0.0, 0.0);

        let g = channel_coeff(Vec3::new(rf.wavelength, 0.0, 0.0), ant, &rf).unwrap();
        assert_relative_eq!(g.norm(), rf.alpha / rf.wavelength, max_relative = 1e-14);
        assert!(g.arg().abs() < 1e-12);

        let g = channel_coeff(Vec3::new(rf.wavelength / 2.0, 0.0, 0.0), ant, &rf).unwrap();
        assert_relative_eq!(g.norm(), 2.0 * rf.alpha / rf.wavelength, max_relative = 1e-14);
        assert_relative_eq!(g.arg().abs(), PI, max_relative = 1e-12);

        // alpha = c / (4 pi 28e9), d = sqrt(725) m; values from an independent evaluation.
        let g = channel_coeff(Vec3::new(25.0, 25.0, 0.0), Vec3::new(25.0, 0.0, 10.0), &rf).unwrap();
        assert_relative_eq!(rf.alpha, 8.520_259_212_923_112e-4, max_relative = 1e-12);
        assert_relative_eq!(g.norm(), 3.164_344_831_799_798e-5, max_relative = 1e-12);

        assert!(matches!(channel_coeff(ant, ant, &rf), Err(Error::SingularChannel { .. })));
    }

    #[test]
    fn single_antenna_gain_magnitude_ignores_feed_phase() {
        let rf = rf28();
        let (wgs, layout) = make_deployment(DeploymentKind::OneD, 1, 50.0, 10.0, 0.005).unwrap();
        let user = Vec3::new(10.0, 20.0, 0.0);
        let g = effective_gain(user, &layout, &wgs, &rf).unwrap();
        let d = user.distance(layout.positions()[0]);
        assert_relative_eq!(g.norm(), rf.alpha / d, max_relative = 1e-13);
    }

    #[test]
    fn matched_pair_adds_coherently() {
        // Two antennas mirrored about x = 0 on separate waveguides fed at
        // mirrored points: equal distance to the terminal and equal feed path.
        let rf = rf28();
        let h = 10.0;
        let wg_a = Waveguide::fed_at_origin(Vec3::new(0.0, 0.0, h), Vec3::new(1.0, 0.0, 0.0), 5.0).unwrap();
        let wg_b = Waveguide::fed_at_origin(Vec3::new(0.0, 0.0, h), Vec3::new(-1.0, 0.0, 0.0), 5.0).unwrap();
        let wgs = [wg_a, wg_b];
        let layout = AntennaLayout::new(
            &wgs,
            vec![Assignment { waveguide: 0, s: 1.234 }, Assignment { waveguide: 1, s: 1.234 }],
        )
        .unwrap();
        let user = Vec3::new(0.0, 7.0, 0.0);
        let d = user.distance(layout.positions()[0]);
        let g = effective_gain(user, &layout, &wgs, &rf).unwrap();
        assert_relative_eq!(g.norm(), 2.0 * rf.alpha / d, max_relative = 1e-12);
    }

    #[test]
    fn coefficient_magnitude_decreases_with_distance() {
        let rf = rf28();
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let g = channel_coeff(Vec3::new(0.1 * i as f64, 0.0, 0.0), Vec3::ZERO, &rf).unwrap();
            assert!(g.norm() < last);
            last = g.norm();
        }
    }

    proptest! {
        #[test]
        fn gain_obeys_triangle_bound_and_translation(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rf = rf28();
            let kind = DeploymentKind::ALL[rng.random_range(0..3)];
            let n = rng.random_range(1..10);
            let (wgs, layout) = make_deployment(kind, n, 50.0, 10.0, rf.wavelength / 2.0).unwrap();
            // Dyadic coordinates keep every sum below exactly representable.
            let dyadic = |v: f64| (v * 1024.0).round() / 1024.0;
            let scalars: Vec<f64> = layout.assignments().iter().map(|a| dyadic(a.s + rng.random_range(-1.0..1.0))).collect();
            let layout = layout.with_scalars(&wgs, &scalars).unwrap();
            let user = Vec3::new(dyadic(rng.random_range(0.0..50.0)), dyadic(rng.random_range(0.0..50.0)), 0.0);

            let g = effective_gain(user, &layout, &wgs, &rf).unwrap();
            let bound: f64 = layout.positions().iter().map(|p| rf.alpha / user.distance(*p)).sum();
            prop_assert!(g.norm() <= bound * (1.0 + 1e-12));

            let offset = Vec3::new(rng.random_range(-64..64) as f64 * 0.25, rng.random_range(-64..64) as f64 * 0.25, 0.0);
            let moved: Vec<Waveguide> = wgs.iter().map(|w| w.translated(offset)).collect();
            let moved_layout = layout.with_scalars(&moved, &scalars).unwrap();
            let g2 = effective_gain(user + offset, &moved_layout, &moved, &rf).unwrap();
            prop_assert!((g - g2).norm() <= 1e-12 * g.norm().max(1e-300));
        }

        #[test]
        fn phase_shift_range(d in 0.0f64..1e3) {
            let th = phase_shift(Vec3::ZERO, Vec3::new(d, 0.0, 0.0), rf28().guided_wavelength);
            prop_assert!((0.0..TAU).contains(&th));
        }
    }
}
