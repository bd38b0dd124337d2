//! Synthetic fiducial-marker camera.
//!
//! The true tag pose is expressed in each quadrotor's camera frame, gated by
//! a field-of-view/range check, then pushed back through the camera →
//! body → inertial chain to produce an inertial payload pose fix:
//!
//! ```text
//! tag_N = R_ND (R_DC d_C + c_D) + r_N
//! z_q   = q_ND ⊗ q_DC ⊗ q_CT
//! z_p   = tag_N − R(z_q) s_p
//! ```
//!
//! Measurement noise is injected on the inertial fix: additive Gaussian on
//! position and a body-frame small-angle Euler perturbation on attitude.

use crate::dynamics::PayloadState;
use crate::geometry::{rotation_camera_to_body, EulerAngles, Quaternion, Vec3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensorError {
    #[error("tag is not visible from agent {agent}")]
    NotVisible { agent: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Fixed tilt α (rad); 0 looks straight down the body z axis.
    pub tilt: f64,
    /// Camera displacement from the quadrotor center of gravity, body frame (m).
    pub mount_offset: [f64; 3],
    /// Full field of view (rad), applied as a cone about the optical axis.
    pub fov: f64,
    /// Maximum detection range (m).
    pub max_range: f64,
    /// Tag position relative to the payload center of gravity, payload frame (m).
    pub tag_offset: [f64; 3],
}

impl Default for CameraConfig {
    fn default() -> Self {
        let mut cam = Self {
            tilt: 0.0,
            mount_offset: [0.0, 0.0, 0.05],
            fov: 1.5,
            max_range: 8.0,
            tag_offset: [0.0, 0.0, -0.125],
        };
        cam.tilt = FormationConfig::default().centered_tilt(&cam);
        cam
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fov > 0.0 && self.fov < PI) {
            return Err(format!("camera.fov must be in (0, pi), got {}", self.fov));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(format!("camera.max_range must be > 0, got {}", self.max_range));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&self.tilt) {
            return Err(format!("camera.tilt must be in [0, pi/2], got {}", self.tilt));
        }
        let finite = self
            .mount_offset
            .iter()
            .chain(self.tag_offset.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err("camera offsets must be finite".into());
        }
        Ok(())
    }

    pub fn mount_offset(&self) -> Vec3 {
        Vec3::from(self.mount_offset)
    }

    pub fn tag_offset(&self) -> Vec3 {
        Vec3::from(self.tag_offset)
    }
}

/// Kinematic multilift formation: one quadrotor above each top corner of the
/// payload on a splayed cable, level, yawed to face the payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormationConfig {
    pub cable_length: f64,
    /// Cable angle from vertical, splayed outward (rad).
    pub cable_inclination: f64,
    /// Edge length of the cubic payload (m).
    pub payload_size: f64,
    /// Per-axis standard deviation of quadrotor position jitter (m); 0 disables.
    pub jitter_sigma: f64,
}

impl Default for FormationConfig {
    fn default() -> Self {
        Self {
            cable_length: 2.0,
            cable_inclination: PI / 6.0,
            payload_size: 0.25,
            jitter_sigma: 0.0,
        }
    }
}

impl FormationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.cable_length > 0.0 && self.payload_size > 0.0) {
            return Err("formation.cable_length and formation.payload_size must be > 0".into());
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.cable_inclination) {
            return Err("formation.cable_inclination must be in [0, pi/2)".into());
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err("formation.jitter_sigma must be >= 0".into());
        }
        Ok(())
    }

    /// Nominal pose of agent `agent` of `count`, for a payload in `payload`.
    pub fn quad_pose(&self, payload: &PayloadState, agent: u32, count: u32) -> QuadPose {
        let bearing = FRAC_PI_4 + TAU * f64::from(agent) / f64::from(count.max(1));
        let half_diag = self.payload_size / std::f64::consts::SQRT_2;
        let (sb, cb) = bearing.sin_cos();
        let (si, ci) = self.cable_inclination.sin_cos();
        let corner = Vec3::new(half_diag * cb, half_diag * sb, -0.5 * self.payload_size);
        let cable = self.cable_length * Vec3::new(si * cb, si * sb, -ci);
        let yaw = payload.attitude.to_euler().yaw;
        let heading = Quaternion::from_yaw(yaw);
        QuadPose {
            position: payload.position + heading.rotate(&(corner + cable)),
            attitude: Quaternion::from_yaw(yaw + bearing + PI),
        }
    }

    /// Tilt that puts the tag on the optical axis at nominal geometry.
    pub fn centered_tilt(&self, cam: &CameraConfig) -> f64 {
        let payload = PayloadState::default();
        let quad = self.quad_pose(&payload, 0, 4);
        let tag = payload.position + payload.attitude.rotate(&cam.tag_offset());
        let body = quad.attitude.conjugate().rotate(&(tag - quad.position)) - cam.mount_offset();
        body.x.atan2(body.z)
    }
}

/// Quadrotor pose in the inertial frame (attitude rotates body to inertial).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadPose {
    pub position: Vec3,
    pub attitude: Quaternion,
}

/// Tag pose relative to the camera: position `d_C` and tag-to-camera attitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagObservation {
    pub d_c: Vec3,
    pub attitude: Quaternion,
}

/// Inertial payload pose fix `z = [z_p, z_q]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseFix {
    pub position: Vec3,
    pub attitude: Quaternion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub agent: u32,
    pub time: f64,
    /// `None` when the tag was not detected this tick.
    pub fix: Option<PoseFix>,
}

impl Measurement {
    pub fn is_valid(&self) -> bool {
        self.fix.is_some()
    }
}

/// Measurement noise injected by the synthetic camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoise {
    /// Per-axis inertial position variance (m²).
    pub position_var: [f64; 3],
    /// Roll, pitch, yaw perturbation variance (rad²).
    pub euler_var: [f64; 3],
    /// Probability that a visible tag is missed anyway.
    pub dropout_prob: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            position_var: [0.12; 3],
            euler_var: [0.0027; 3],
            dropout_prob: 0.0,
        }
    }
}

impl SensorNoise {
    pub fn noiseless() -> Self {
        Self {
            position_var: [0.0; 3],
            euler_var: [0.0; 3],
            dropout_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = self
            .position_var
            .iter()
            .chain(self.euler_var.iter())
            .all(|v| *v >= 0.0 && v.is_finite());
        if !ok {
            return Err("sensor variances must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err("sensor.dropout_prob must be in [0, 1]".into());
        }
        Ok(())
    }
}

fn camera_to_body(cam: &CameraConfig) -> Quaternion {
    Quaternion::from_dcm(&rotation_camera_to_body(cam.tilt))
}

/// True tag pose in the camera frame (inverse of the measurement chain).
pub fn true_tag_in_camera(quad: &QuadPose, payload: &PayloadState, cam: &CameraConfig) -> TagObservation {
    let r_dc = rotation_camera_to_body(cam.tilt);
    let r_nd = quad.attitude.to_dcm();
    let tag = payload.position + payload.attitude.rotate(&cam.tag_offset());
    let d_c = r_dc.transpose().rotate(&(r_nd.transpose().rotate(&(tag - quad.position)) - cam.mount_offset()));
    let q_dc = camera_to_body(cam);
    let attitude = q_dc
        .conjugate()
        .multiply(&quad.attitude.conjugate())
        .multiply(&payload.attitude);
    TagObservation { d_c, attitude }
}

/// Tag in front of the lens, strictly inside the half field of view, and in range.
pub fn visible(d_c: &Vec3, cam: &CameraConfig) -> bool {
    if d_c.z.is_nan() || d_c.z <= 0.0 {
        return false;
    }
    let off_axis = d_c.xy().norm().atan2(d_c.z);
    off_axis < 0.5 * cam.fov && d_c.norm() < cam.max_range
}

/// Noise realization for one measurement: six standard normals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDraw {
    pub position: Vec3,
    pub euler: Vec3,
}

impl NoiseDraw {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut n = || rng.sample::<f64, _>(StandardNormal);
        let position = Vec3::new(n(), n(), n());
        let euler = Vec3::new(n(), n(), n());
        Self { position, euler }
    }
}

/// Noiseless inertial payload pose implied by a camera-frame tag observation.
pub fn compose_fix(obs: &TagObservation, quad: &QuadPose, cam: &CameraConfig) -> PoseFix {
    let r_dc = rotation_camera_to_body(cam.tilt);
    let r_nd = quad.attitude.to_dcm();
    let tag = r_nd.rotate(&(r_dc.rotate(&obs.d_c) + cam.mount_offset())) + quad.position;
    let attitude = quad
        .attitude
        .multiply(&camera_to_body(cam))
        .multiply(&obs.attitude);
    let position = tag - attitude.rotate(&cam.tag_offset());
    PoseFix { position, attitude }
}

fn apply_noise(fix: PoseFix, draw: &NoiseDraw, noise: &SensorNoise) -> PoseFix {
    let sd = |v: [f64; 3]| Vec3::new(v[0].sqrt(), v[1].sqrt(), v[2].sqrt());
    let dp = draw.position.component_mul(&sd(noise.position_var));
    let de = draw.euler.component_mul(&sd(noise.euler_var));
    let perturb = Quaternion::from_euler(EulerAngles::new(de.x, de.y, de.z));
    PoseFix {
        position: fix.position + dp,
        attitude: fix.attitude.multiply(&perturb),
    }
}

/// Composes a noisy inertial fix from a visible tag observation.
pub fn compose_measurement<R: Rng + ?Sized>(
    obs: &TagObservation,
    quad: &QuadPose,
    cam: &CameraConfig,
    noise: &SensorNoise,
    rng: &mut R,
    agent: u32,
    time: f64,
) -> Result<Measurement, SensorError> {
    if !visible(&obs.d_c, cam) {
        return Err(SensorError::NotVisible { agent });
    }
    let draw = NoiseDraw::sample(rng);
    let fix = apply_noise(compose_fix(obs, quad, cam), &draw, noise);
    Ok(Measurement {
        agent,
        time,
        fix: Some(fix),
    })
}

/// Full per-tick sensing for one agent. Consumes the same number of random
/// draws whether or not the tag is detected.
pub fn sense<R: Rng + ?Sized>(
    quad: &QuadPose,
    payload: &PayloadState,
    cam: &CameraConfig,
    noise: &SensorNoise,
    rng: &mut R,
    agent: u32,
    time: f64,
) -> Measurement {
    let draw = NoiseDraw::sample(rng);
    let dropped = rng.random::<f64>() < noise.dropout_prob;
    let obs = true_tag_in_camera(quad, payload, cam);
    let fix = (!dropped && visible(&obs.d_c, cam))
        .then(|| apply_noise(compose_fix(&obs, quad, cam), &draw, noise));
    Measurement { agent, time, fix }
}
