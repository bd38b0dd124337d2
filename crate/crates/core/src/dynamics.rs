//! Payload rigid-body model and the ground-truth integrator.

use crate::geometry::{omega_matrix, Quaternion, Vec3};
use nalgebra::{SVector, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const STATE_DIM: usize = 13;
pub const INPUT_DIM: usize = 6;

pub type StateVector = SVector<f64, STATE_DIM>;

/// Index offsets into the 13-element state `[n e d | qw qx qy qz | vn ve vd | P Q R]`.
pub mod idx {
    pub const POS: usize = 0;
    pub const QUAT: usize = 3;
    pub const VEL: usize = 7;
    pub const RATES: usize = 10;
}

/// Payload position, attitude, velocity and body rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadState {
    pub position: Vec3,
    pub attitude: Quaternion,
    pub velocity: Vec3,
    pub rates: Vec3,
}

impl Default for PayloadState {
    fn default() -> Self {
        Self {
            position: Vec3::zeros(),
            attitude: Quaternion::identity(),
            velocity: Vec3::zeros(),
            rates: Vec3::zeros(),
        }
    }
}

impl PayloadState {
    pub fn to_vector(&self) -> StateVector {
        let mut v = StateVector::zeros();
        v.fixed_rows_mut::<3>(idx::POS).copy_from(&self.position);
        v.fixed_rows_mut::<4>(idx::QUAT).copy_from(&self.attitude.to_vector());
        v.fixed_rows_mut::<3>(idx::VEL).copy_from(&self.velocity);
        v.fixed_rows_mut::<3>(idx::RATES).copy_from(&self.rates);
        v
    }

    /// Unpacks a state vector as-is; the quaternion is not renormalized.
    pub fn from_vector(v: &StateVector) -> Self {
        Self {
            position: v.fixed_rows::<3>(idx::POS).into_owned(),
            attitude: Quaternion::from_vector(&v.fixed_rows::<4>(idx::QUAT).into_owned()),
            velocity: v.fixed_rows::<3>(idx::VEL).into_owned(),
            rates: v.fixed_rows::<3>(idx::RATES).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// Commanded payload accelerations `[v̇n v̇e v̇d | Ṗ Q̇ Ṙ]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl ControlInput {
    pub fn new(linear: Vec3, angular: Vec3) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|x| x.is_finite())
    }
}

/// Random planar force applied at the payload center of gravity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceModel {
    /// Standard deviation of the signed force magnitude (N).
    pub sigma_force: f64,
    /// Payload mass (kg).
    pub payload_mass: f64,
    /// How long each sampled force is held (s).
    pub hold_interval: f64,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        Self {
            sigma_force: 0.227,
            payload_mass: 1.2,
            hold_interval: 0.05,
        }
    }
}

impl DisturbanceModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.sigma_force >= 0.0 && self.sigma_force.is_finite()) {
            return Err(format!("disturbance.sigma_force must be >= 0, got {}", self.sigma_force));
        }
        if !(self.payload_mass > 0.0 && self.payload_mass.is_finite()) {
            return Err(format!("disturbance.payload_mass must be > 0, got {}", self.payload_mass));
        }
        if !(self.hold_interval > 0.0 && self.hold_interval.is_finite()) {
            return Err(format!(
                "disturbance.hold_interval must be > 0, got {}",
                self.hold_interval
            ));
        }
        Ok(())
    }
}

/// Continuous-time payload model. The disturbance force enters the
/// translational acceleration only.
pub fn payload_derivative(
    x: &PayloadState,
    u: &ControlInput,
    f_dist: &Vec3,
    mass: f64,
) -> StateVector {
    let mut d = StateVector::zeros();
    d.fixed_rows_mut::<3>(idx::POS).copy_from(&x.velocity);
    let qdot: Vector4<f64> = 0.5 * omega_matrix(&x.rates) * x.attitude.to_vector();
    d.fixed_rows_mut::<4>(idx::QUAT).copy_from(&qdot);
    d.fixed_rows_mut::<3>(idx::VEL)
        .copy_from(&(u.linear + f_dist / mass));
    d.fixed_rows_mut::<3>(idx::RATES).copy_from(&u.angular);
    d
}

/// One classic RK4 step followed by quaternion renormalization.
pub fn step_truth(
    x: &PayloadState,
    u: &ControlInput,
    f_dist: &Vec3,
    mass: f64,
    dt: f64,
) -> PayloadState {
    let x0 = x.to_vector();
    let f = |v: &StateVector| payload_derivative(&PayloadState::from_vector(v), u, f_dist, mass);
    let k1 = f(&x0);
    let k2 = f(&(x0 + 0.5 * dt * k1));
    let k3 = f(&(x0 + 0.5 * dt * k2));
    let k4 = f(&(x0 + dt * k3));
    let next = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    let mut state = PayloadState::from_vector(&next);
    // a unit quaternion integrated over one small step stays far from zero
    state.attitude = state
        .attitude
        .normalize()
        .unwrap_or(x.attitude);
    state
}

/// Draws a signed Gaussian magnitude along a uniformly random North-East direction.
pub fn sample_disturbance<R: Rng + ?Sized>(rng: &mut R, model: &DisturbanceModel) -> Vec3 {
    let heading: f64 = rng.random::<f64>() * TAU;
    let magnitude = if model.sigma_force > 0.0 {
        Normal::new(0.0, model.sigma_force)
            .expect("validated sigma")
            .sample(rng)
    } else {
        // keep the stream position independent of sigma
        let _: f64 = rng.random();
        0.0
    };
    Vec3::new(magnitude * heading.cos(), magnitude * heading.sin(), 0.0)
}
