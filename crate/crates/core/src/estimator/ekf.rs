//! Covariance-form extended Kalman filter with the same models as the
//! information filter. Used as a reference implementation in tests.

use super::model::{
    lifted_process_noise, measurement_covariance, measurement_matrix, measurement_vector,
    predicted_measurement, process_jacobian, transition, NoiseConfig, MEAS_DIM,
};
use super::{EstimatorError, Matrix13};
use crate::dynamics::{ControlInput, PayloadState, STATE_DIM};
use crate::sensor::PoseFix;
use nalgebra::{DMatrix, DVector};

pub fn ekf_predict(
    x: &PayloadState,
    p: &Matrix13,
    u: &ControlInput,
    noise: &NoiseConfig,
    dt: f64,
) -> Result<(PayloadState, Matrix13), EstimatorError> {
    let f = process_jacobian(x, u, dt);
    let next = transition(x, u, dt)?;
    let cov = f * p * f.transpose() + lifted_process_noise(x, noise, dt);
    Ok((next, 0.5 * (cov + cov.transpose())))
}

/// Stacked update with every fix in `fixes`, all linearized at `x`.
pub fn ekf_update(
    x: &PayloadState,
    p: &Matrix13,
    fixes: &[PoseFix],
    noise: &NoiseConfig,
) -> Result<(PayloadState, Matrix13), EstimatorError> {
    if fixes.is_empty() {
        return Ok((*x, *p));
    }
    let m = MEAS_DIM * fixes.len();
    let h1 = measurement_matrix();
    let r1 = measurement_covariance(&x.attitude, noise)?;
    let hx = predicted_measurement(x);
    let mut h = DMatrix::<f64>::zeros(m, STATE_DIM);
    let mut r = DMatrix::<f64>::zeros(m, m);
    let mut nu = DVector::<f64>::zeros(m);
    for (k, fix) in fixes.iter().enumerate() {
        let o = k * MEAS_DIM;
        h.view_mut((o, 0), (MEAS_DIM, STATE_DIM)).copy_from(&h1);
        r.view_mut((o, o), (MEAS_DIM, MEAS_DIM)).copy_from(&r1);
        nu.rows_mut(o, MEAS_DIM)
            .copy_from(&(measurement_vector(fix, &x.attitude) - hx));
    }
    let pd = DMatrix::from_column_slice(STATE_DIM, STATE_DIM, p.as_slice());
    let s = &h * &pd * h.transpose() + &r;
    let s_chol = s
        .cholesky()
        .ok_or_else(|| EstimatorError::Divergence("innovation covariance is singular".into()))?;
    // K = P Hᵀ S⁻¹
    let k = s_chol.solve(&(&h * &pd)).transpose();
    let dx = &k * nu;
    let ikh = DMatrix::<f64>::identity(STATE_DIM, STATE_DIM) - &k * &h;
    let joseph = &ikh * &pd * ikh.transpose() + &k * &r * k.transpose();
    let mut cov = Matrix13::from_column_slice(joseph.as_slice());
    cov = 0.5 * (cov + cov.transpose());
    let raw = PayloadState::from_vector(&(x.to_vector() + crate::dynamics::StateVector::from_column_slice(dx.as_slice())));
    let attitude = raw
        .attitude
        .normalize()
        .map_err(|_| EstimatorError::Divergence("updated quaternion has zero norm".into()))?;
    Ok((PayloadState { attitude, ..raw }, cov))
}

/// Predict then update.
pub fn ekf_oracle_step(
    x: &PayloadState,
    p: &Matrix13,
    u: &ControlInput,
    fixes: &[PoseFix],
    noise: &NoiseConfig,
    dt: f64,
) -> Result<(PayloadState, Matrix13), EstimatorError> {
    let (xp, pp) = ekf_predict(x, p, u, noise, dt)?;
    ekf_update(&xp, &pp, fixes, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Quaternion, Vec3};

    // scalar Kalman update: gain p/(p+r)
    fn scalar_update(x: f64, p: f64, z: f64, r: f64) -> (f64, f64) {
        let k = p / (p + r);
        (x + k * (z - x), (1.0 - k) * p)
    }

    #[test]
    fn position_channel_matches_scalar_kalman() {
        // with a diagonal prior the north position channel decouples
        let x = PayloadState {
            position: Vec3::new(1.0, 0.0, 0.0),
            ..Default::default()
        };
        let mut p = Matrix13::identity() * 0.3;
        p[(0, 0)] = 0.5;
        let fix = PoseFix {
            position: Vec3::new(2.0, 0.0, 0.0),
            attitude: Quaternion::identity(),
        };
        let noise = NoiseConfig::default();
        let (post, cov) = ekf_update(&x, &p, &[fix], &noise).unwrap();
        let (xs, ps) = scalar_update(1.0, 0.5, 2.0, 0.12);
        assert!((post.position.x - xs).abs() < 1e-12);
        assert!((cov[(0, 0)] - ps).abs() < 1e-12);
    }

    #[test]
    fn no_measurements_equals_prediction() {
        let x = PayloadState {
            velocity: Vec3::new(1.0, 0.0, 0.0),
            ..Default::default()
        };
        let p = Matrix13::identity() * 0.1;
        let u = ControlInput::zero();
        let noise = NoiseConfig::default();
        let a = ekf_oracle_step(&x, &p, &u, &[], &noise, 0.05).unwrap();
        let b = ekf_predict(&x, &p, &u, &noise, 0.05).unwrap();
        assert_eq!(a, b);
    }
}
