//! Load-leading surrogate: PD tracking on payload position and attitude with
//! reference feed-forward, output as commanded payload accelerations.

use crate::dynamics::{ControlInput, PayloadState};
use crate::geometry::Vec3;
use crate::trajectory::ReferenceState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    pub kp_pos: f64,
    pub kd_pos: f64,
    pub kp_att: f64,
    pub kd_att: f64,
    /// Per-axis linear acceleration limit (m/s²).
    pub max_linear_accel: f64,
    /// Per-axis angular acceleration limit (rad/s²).
    pub max_angular_accel: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            kp_pos: 2.0,
            kd_pos: 2.8,
            kp_att: 4.0,
            kd_att: 4.0,
            max_linear_accel: 5.0,
            max_angular_accel: 5.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), String> {
        let gains = [self.kp_pos, self.kd_pos, self.kp_att, self.kd_att];
        if gains.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err("controller gains must be finite and >= 0".into());
        }
        if !(self.max_linear_accel > 0.0 && self.max_angular_accel > 0.0) {
            return Err("controller acceleration limits must be > 0".into());
        }
        Ok(())
    }
}

fn saturate(v: Vec3, limit: f64) -> Vec3 {
    v.map(|c| c.clamp(-limit, limit))
}

/// Body-frame attitude error `2·vec(q_est⁻¹ ⊗ q_ref)`, shortest way round.
pub fn attitude_error(x: &PayloadState, reference: &ReferenceState) -> Vec3 {
    2.0 * x
        .attitude
        .conjugate()
        .multiply(&reference.attitude)
        .canonical()
        .vector_part()
}

pub fn compute_input(x: &PayloadState, reference: &ReferenceState, gains: &ControllerGains) -> ControlInput {
    let linear = reference.linear_accel
        + gains.kp_pos * (reference.position - x.position)
        + gains.kd_pos * (reference.velocity - x.velocity);
    let angular = reference.angular_accel
        + gains.kp_att * attitude_error(x, reference)
        + gains.kd_att * (reference.rates - x.rates);
    ControlInput {
        linear: saturate(linear, gains.max_linear_accel),
        angular: saturate(angular, gains.max_angular_accel),
    }
}
