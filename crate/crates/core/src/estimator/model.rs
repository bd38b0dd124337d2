//! Discrete process and measurement models shared by the information filter
//! and the covariance-form oracle.

use super::{EstimatorError, Matrix13};
use crate::dynamics::{idx, ControlInput, PayloadState, StateVector, INPUT_DIM, STATE_DIM};
use crate::geometry::{euler_cov_to_quat_cov, omega_matrix, Quaternion};
use crate::sensor::PoseFix;
use nalgebra::{Matrix3, Matrix4, SMatrix, SVector};
use serde::{Deserialize, Serialize};

pub const MEAS_DIM: usize = 7;

pub type Matrix7 = SMatrix<f64, MEAS_DIM, MEAS_DIM>;
pub type Vector7 = SVector<f64, MEAS_DIM>;
pub type MeasurementMatrix = SMatrix<f64, MEAS_DIM, STATE_DIM>;
pub type NoiseInputMatrix = SMatrix<f64, STATE_DIM, INPUT_DIM>;

/// Filter noise model and initialization variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Process noise on the commanded linear acceleration, per axis ((m/s²)²).
    pub accel_var: [f64; 3],
    /// Process noise on the commanded angular acceleration, per axis ((rad/s²)²).
    pub angular_accel_var: [f64; 3],
    /// Position measurement variance, per axis (m²).
    pub position_var: [f64; 3],
    /// Roll, pitch, yaw measurement variance (rad²), mapped into quaternion space.
    pub euler_var: [f64; 3],
    /// Initial velocity variance ((m/s)²).
    pub init_velocity_var: f64,
    /// Initial body-rate variance ((rad/s)²).
    pub init_rate_var: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            accel_var: [0.0625; 3],
            angular_accel_var: [7.84; 3],
            position_var: [0.12; 3],
            euler_var: [0.0027; 3],
            init_velocity_var: 0.5,
            init_rate_var: 0.5,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), String> {
        let nonneg = self
            .accel_var
            .iter()
            .chain(&self.angular_accel_var)
            .chain(&self.euler_var)
            .all(|v| *v >= 0.0 && v.is_finite());
        if !nonneg {
            return Err("filter process and attitude variances must be finite and >= 0".into());
        }
        let positive = self
            .position_var
            .iter()
            .chain([&self.init_velocity_var, &self.init_rate_var])
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive {
            return Err("filter position and initial variances must be finite and > 0".into());
        }
        if self.euler_var.iter().all(|v| *v == 0.0) {
            return Err("filter.euler_var must not be all zero".into());
        }
        Ok(())
    }

    pub fn process_covariance(&self) -> SMatrix<f64, INPUT_DIM, INPUT_DIM> {
        let mut q = SMatrix::<f64, INPUT_DIM, INPUT_DIM>::zeros();
        for k in 0..3 {
            q[(k, k)] = self.accel_var[k];
            q[(k + 3, k + 3)] = self.angular_accel_var[k];
        }
        q
    }
}

/// One filter step: constant-acceleration translation, first-order
/// quaternion update, then renormalization.
pub fn transition(x: &PayloadState, u: &ControlInput, dt: f64) -> Result<PayloadState, EstimatorError> {
    let raw = PayloadState::from_vector(&transition_raw(x, u, dt));
    let attitude = raw
        .attitude
        .normalize()
        .map_err(|_| EstimatorError::Divergence("quaternion collapsed in transition".into()))?;
    Ok(PayloadState { attitude, ..raw })
}

/// Transition before quaternion renormalization.
pub fn transition_raw(x: &PayloadState, u: &ControlInput, dt: f64) -> StateVector {
    let q = x.attitude.to_vector();
    let next = PayloadState {
        position: x.position + dt * x.velocity + 0.5 * dt * dt * u.linear,
        attitude: Quaternion::from_vector(&(q + 0.5 * dt * omega_matrix(&x.rates) * q)),
        velocity: x.velocity + dt * u.linear,
        rates: x.rates + dt * u.angular,
    };
    next.to_vector()
}

/// `∂f/∂x` of [`transition_raw`].
pub fn process_jacobian(x: &PayloadState, _u: &ControlInput, dt: f64) -> Matrix13 {
    let mut f = Matrix13::identity();
    f.fixed_view_mut::<3, 3>(idx::POS, idx::VEL)
        .copy_from(&(Matrix3::identity() * dt));
    f.fixed_view_mut::<4, 4>(idx::QUAT, idx::QUAT)
        .copy_from(&(Matrix4::identity() + 0.5 * dt * omega_matrix(&x.rates)));
    f.fixed_view_mut::<4, 3>(idx::QUAT, idx::RATES)
        .copy_from(&(0.5 * dt * x.attitude.rate_matrix()));
    f
}

/// `∂f/∂u` over one step, used to shape the acceleration noise.
pub fn noise_input_matrix(x: &PayloadState, dt: f64) -> NoiseInputMatrix {
    let mut g = NoiseInputMatrix::zeros();
    let i3 = Matrix3::identity();
    g.fixed_view_mut::<3, 3>(idx::POS, 0).copy_from(&(0.5 * dt * dt * i3));
    g.fixed_view_mut::<3, 3>(idx::VEL, 0).copy_from(&(dt * i3));
    g.fixed_view_mut::<4, 3>(idx::QUAT, 3)
        .copy_from(&(0.25 * dt * dt * x.attitude.rate_matrix()));
    g.fixed_view_mut::<3, 3>(idx::RATES, 3).copy_from(&(dt * i3));
    g
}

/// `G Q Gᵀ`, the 13×13 discrete process noise.
pub fn lifted_process_noise(x: &PayloadState, noise: &NoiseConfig, dt: f64) -> Matrix13 {
    let g = noise_input_matrix(x, dt);
    let q = g * noise.process_covariance() * g.transpose();
    0.5 * (q + q.transpose())
}

/// `∇h`: selects position and quaternion.
pub fn measurement_matrix() -> MeasurementMatrix {
    let mut h = MeasurementMatrix::zeros();
    for k in 0..MEAS_DIM {
        h[(k, k)] = 1.0;
    }
    h
}

/// Effective measurement covariance at the linearization attitude `q_ref`.
///
/// The mapped Euler covariance is rank 3 in quaternion space. The missing
/// direction (along `q_ref`, i.e. the norm) is filled with the mean of the
/// mapped variances so `R` is well conditioned.
pub fn measurement_covariance(q_ref: &Quaternion, noise: &NoiseConfig) -> Result<Matrix7, EstimatorError> {
    let sigma = Matrix3::from_diagonal(&noise.euler_var.into());
    let mapped = euler_cov_to_quat_cov(q_ref, &sigma)?;
    let q = q_ref.to_vector();
    let fill = (mapped.trace() - 4.0 * crate::geometry::QUAT_COV_REGULARIZATION) / 3.0;
    let rq = mapped + fill * q * q.transpose();
    let mut r = Matrix7::zeros();
    for k in 0..3 {
        r[(k, k)] = noise.position_var[k];
    }
    r.fixed_view_mut::<4, 4>(3, 3).copy_from(&(0.5 * (rq + rq.transpose())));
    Ok(r)
}

/// `[z_p; z_q]` with `z_q` flipped into the hemisphere of `q_ref`.
pub fn measurement_vector(fix: &PoseFix, q_ref: &Quaternion) -> Vector7 {
    let q = fix.attitude.align_sign(q_ref);
    Vector7::from_column_slice(&[fix.position.x, fix.position.y, fix.position.z, q.w, q.x, q.y, q.z])
}

/// `h(x) = [position; quaternion]`.
pub fn predicted_measurement(x: &PayloadState) -> Vector7 {
    measurement_matrix() * x.to_vector()
}

/// Initial covariance: measurement covariance on pose, configured variances on
/// velocity and rates.
pub fn initial_covariance(q_ref: &Quaternion, noise: &NoiseConfig) -> Result<Matrix13, EstimatorError> {
    let r = measurement_covariance(q_ref, noise)?;
    let mut p = Matrix13::zeros();
    p.fixed_view_mut::<7, 7>(0, 0).copy_from(&r);
    for k in 0..3 {
        p[(idx::VEL + k, idx::VEL + k)] = noise.init_velocity_var;
        p[(idx::RATES + k, idx::RATES + k)] = noise.init_rate_var;
    }
    Ok(p)
}
