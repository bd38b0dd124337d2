//! Reference trajectories: pirouetting circle, Lissajous figure-8 and hover.
//!
//! Both moving trajectories ramp their *phase* with the quintic smootherstep,
//! so position, velocity and the feed-forward accelerations are exact
//! derivatives of one another at every instant.

use crate::geometry::{Quaternion, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Pirouette,
    Lissajous,
    Hover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub kind: TrajectoryKind,
    /// Pirouette radius (m).
    pub radius: f64,
    /// Steady tangential speed of the pirouette (m/s).
    pub speed: f64,
    /// North and East frequencies of the figure-8 (Hz).
    pub f_n: f64,
    pub f_e: f64,
    /// North and East amplitudes of the figure-8 (m).
    pub amplitude_n: f64,
    pub amplitude_e: f64,
    /// Vertical oscillation amplitude, at `f_n` (m).
    pub amplitude_d: f64,
    /// Smootherstep ramp duration (s).
    pub ramp: f64,
    /// Circle center / figure-8 center, NED (m).
    pub center: [f64; 3],
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self::pirouette()
    }
}

impl TrajectoryConfig {
    pub fn pirouette() -> Self {
        Self {
            kind: TrajectoryKind::Pirouette,
            radius: 2.5,
            speed: 0.5,
            f_n: 0.04,
            f_e: 0.02,
            amplitude_n: 4.0,
            amplitude_e: 4.0,
            amplitude_d: 0.5,
            ramp: 10.0,
            center: [0.0, 0.0, -3.0],
        }
    }

    pub fn lissajous() -> Self {
        Self {
            kind: TrajectoryKind::Lissajous,
            ramp: 15.0,
            ..Self::pirouette()
        }
    }

    pub fn hover() -> Self {
        Self {
            kind: TrajectoryKind::Hover,
            ..Self::pirouette()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.radius,
            self.speed,
            self.f_n,
            self.f_e,
            self.amplitude_n,
            self.amplitude_e,
            self.amplitude_d,
            self.ramp,
        ]
        .iter()
        .chain(self.center.iter())
        .all(|v| v.is_finite());
        if !finite {
            return Err("trajectory parameters must be finite".into());
        }
        if self.ramp <= 0.0 {
            return Err(format!("trajectory.ramp must be > 0, got {}", self.ramp));
        }
        match self.kind {
            TrajectoryKind::Pirouette if self.radius <= 0.0 => {
                Err(format!("trajectory.radius must be > 0, got {}", self.radius))
            }
            TrajectoryKind::Lissajous if self.f_n <= 0.0 || self.f_e <= 0.0 => {
                Err("trajectory.f_n and trajectory.f_e must be > 0".into())
            }
            _ => Ok(()),
        }
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    /// Reference at time `t` for whichever kind this config describes.
    pub fn sample(&self, t: f64) -> ReferenceState {
        match self.kind {
            TrajectoryKind::Pirouette => pirouette_reference(t, self),
            TrajectoryKind::Lissajous => lissajous_reference(t, self),
            TrajectoryKind::Hover => ReferenceState::at_rest(self.center(), Quaternion::identity()),
        }
    }
}

/// Commanded payload motion, including the feed-forward accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceState {
    pub position: Vec3,
    pub attitude: Quaternion,
    pub velocity: Vec3,
    /// Body angular rates P, Q, R (rad/s).
    pub rates: Vec3,
    pub linear_accel: Vec3,
    pub angular_accel: Vec3,
}

impl ReferenceState {
    pub fn at_rest(position: Vec3, attitude: Quaternion) -> Self {
        Self {
            position,
            attitude,
            velocity: Vec3::zeros(),
            rates: Vec3::zeros(),
            linear_accel: Vec3::zeros(),
            angular_accel: Vec3::zeros(),
        }
    }
}

/// Quintic smootherstep `6u⁵ − 15u⁴ + 10u³` with `u = clamp(t/T, 0, 1)`.
pub fn smootherstep(t: f64, duration: f64) -> f64 {
    let u = (t / duration).clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

/// Ramped phase `s(t) = ∫₀ᵗ smootherstep(τ, T) dτ` and its first three
/// time derivatives. After the ramp `s(t) = t − T/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampedPhase {
    pub value: f64,
    pub rate: f64,
    pub accel: f64,
    pub jerk: f64,
}

pub fn ramped_phase(t: f64, duration: f64) -> RampedPhase {
    if t <= 0.0 {
        return RampedPhase {
            value: 0.0,
            rate: 0.0,
            accel: 0.0,
            jerk: 0.0,
        };
    }
    if t >= duration {
        return RampedPhase {
            value: t - 0.5 * duration,
            rate: 1.0,
            accel: 0.0,
            jerk: 0.0,
        };
    }
    let u = t / duration;
    let u2 = u * u;
    let u3 = u2 * u;
    RampedPhase {
        value: duration * u2 * u2 * (u2 - 3.0 * u + 2.5),
        rate: u3 * (u * (6.0 * u - 15.0) + 10.0),
        accel: 30.0 * u2 * (u - 1.0) * (u - 1.0) / duration,
        jerk: 60.0 * u * (u - 1.0) * (2.0 * u - 1.0) / (duration * duration),
    }
}

/// Pirouetting circle in the North-East plane.
///
/// The payload's heading follows the tangent, so its right-hand wall faces
/// the circle center. Angular progress increases with positive yaw rate.
pub fn pirouette_reference(t: f64, cfg: &TrajectoryConfig) -> ReferenceState {
    let s = ramped_phase(t, cfg.ramp);
    let omega = cfg.speed / cfg.radius;
    let r = cfg.radius;
    let phi = omega * s.value;
    let phi_dot = omega * s.rate;
    let phi_ddot = omega * s.accel;
    let (sin, cos) = phi.sin_cos();
    let radial = Vec3::new(cos, sin, 0.0);
    let tangent = Vec3::new(-sin, cos, 0.0);
    ReferenceState {
        position: cfg.center() + r * radial,
        attitude: Quaternion::from_yaw(phi + FRAC_PI_2),
        velocity: r * phi_dot * tangent,
        rates: Vec3::new(0.0, 0.0, phi_dot),
        linear_accel: r * phi_ddot * tangent - r * phi_dot * phi_dot * radial,
        angular_accel: Vec3::new(0.0, 0.0, phi_ddot),
    }
}

/// Figure-8 with `N = A_n sin(2π f_n s)`, `E = A_e sin(2π f_e s)` and a
/// vertical oscillation at `f_n`, where `s` is the ramped phase.
///
/// Heading is the path tangent `atan2(dE/ds, dN/ds)`, which stays defined
/// at rest. It is reported in `[0, 2π)`: with `f_n = 2 f_e` the tangent
/// never points due North, so this branch is continuous along the path.
pub fn lissajous_reference(t: f64, cfg: &TrajectoryConfig) -> ReferenceState {
    let s = ramped_phase(t, cfg.ramp);
    let wn = TAU * cfg.f_n;
    let we = TAU * cfg.f_e;
    let (an, ae, ad) = (cfg.amplitude_n, cfg.amplitude_e, cfg.amplitude_d);

    // path derivatives with respect to phase, orders 0..=3
    let (sn, cn) = (wn * s.value).sin_cos();
    let (se, ce) = (we * s.value).sin_cos();
    let p = [
        Vec3::new(an * sn, ae * se, ad * sn),
        Vec3::new(an * wn * cn, ae * we * ce, ad * wn * cn),
        Vec3::new(-an * wn * wn * sn, -ae * we * we * se, -ad * wn * wn * sn),
        Vec3::new(
            -an * wn.powi(3) * cn,
            -ae * we.powi(3) * ce,
            -ad * wn.powi(3) * cn,
        ),
    ];

    let velocity = p[1] * s.rate;
    let linear_accel = p[2] * s.rate * s.rate + p[1] * s.accel;

    // heading κ(s) = atan2(b, a) of the horizontal tangent (a, b)
    let (a, b) = (p[1].x, p[1].y);
    let (a1, b1) = (p[2].x, p[2].y);
    let (a2, b2) = (p[3].x, p[3].y);
    let rho = a * a + b * b;
    let cross = a * b1 - b * a1;
    let kappa = cross / rho;
    let kappa_s = ((a * b2 - b * a2) * rho - cross * 2.0 * (a * a1 + b * b1)) / (rho * rho);
    let heading = b.atan2(a).rem_euclid(TAU);
    let yaw_rate = kappa * s.rate;
    let yaw_accel = kappa_s * s.rate * s.rate + kappa * s.accel;

    ReferenceState {
        position: cfg.center() + p[0],
        attitude: Quaternion::from_yaw(heading),
        velocity,
        rates: Vec3::new(0.0, 0.0, yaw_rate),
        linear_accel,
        angular_accel: Vec3::new(0.0, 0.0, yaw_accel),
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}
