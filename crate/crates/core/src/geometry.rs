//! Rotations, quaternion algebra and the Euler-to-quaternion covariance map.
//!
//! Conventions held throughout the crate:
//! - Frames are NED inertial (`N`), forward-right-down body (`D`) and
//!   right-down-out-of-lens camera (`C`).
//! - Quaternions are Hamilton, scalar-first `[w, x, y, z]`, and rotate
//!   body-frame vectors into the inertial frame.
//! - Euler angles are the aerospace 3-2-1 (yaw, pitch, roll) sequence.

use nalgebra::{Matrix3, Matrix4, Matrix4x3, SymmetricEigen, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use std::ops::Mul;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Diagonal lift added to the mapped quaternion covariance so it stays invertible.
pub const QUAT_COV_REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("cannot normalize a zero-norm quaternion")]
    DegenerateQuaternion,
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
}

/// Proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking it. Callers own the invariant.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

/// Roll, pitch, yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }
}

/// Body-to-inertial rotation for a 3-2-1 attitude.
///
/// The familiar printed 3-2-1 direction cosine matrix maps inertial vectors
/// into the body frame; this returns its transpose so that
/// `r_N = R · r_D` holds.
pub fn dcm_body_to_inertial(e: EulerAngles) -> RotationMatrix {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    // inertial -> body
    let c_bn = Matrix3::new(
        cp * cy,
        cp * sy,
        -sp,
        sr * sp * cy - cr * sy,
        sr * sp * sy + cr * cy,
        sr * cp,
        cr * sp * cy + sr * sy,
        cr * sp * sy - sr * cy,
        cr * cp,
    );
    RotationMatrix(c_bn.transpose())
}

/// Camera-to-body rotation for a camera tilted by `alpha`.
///
/// With `alpha = 0` the optical axis points along body down; with
/// `alpha = π/2` it points along body forward.
pub fn rotation_camera_to_body(alpha: f64) -> RotationMatrix {
    let (s, c) = alpha.sin_cos();
    RotationMatrix(Matrix3::new(0.0, -c, s, 1.0, 0.0, 0.0, 0.0, s, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn vector_part(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Rotation by `angle` about the body yaw (down) axis.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (0.5 * yaw).sin_cos();
        Self::new(c, 0.0, 0.0, s)
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::new(c, s * a.x, s * a.y, s * a.z)
    }

    /// 3-2-1 Euler angles to quaternion (`q = q_yaw ⊗ q_pitch ⊗ q_roll`).
    pub fn from_euler(e: EulerAngles) -> Self {
        let (s1, c1) = (0.5 * e.roll).sin_cos();
        let (s2, c2) = (0.5 * e.pitch).sin_cos();
        let (s3, c3) = (0.5 * e.yaw).sin_cos();
        Self::new(
            c1 * c2 * c3 + s1 * s2 * s3,
            s1 * c2 * c3 - c1 * s2 * s3,
            c1 * s2 * c3 + s1 * c2 * s3,
            c1 * c2 * s3 - s1 * s2 * c3,
        )
    }

    /// Inverse of [`Quaternion::from_euler`]; assumes a unit quaternion.
    pub fn to_euler(&self) -> EulerAngles {
        let Self { w, x, y, z } = *self;
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        EulerAngles { roll, pitch, yaw }
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn multiply(&self, rhs: &Quaternion) -> Quaternion {
        let (a, b) = (self, rhs);
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn conjugate(&self) -> Quaternion {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalize(&self) -> Result<Quaternion, GeometryError> {
        let n = self.norm();
        if !n.is_finite() || n <= f64::MIN_POSITIVE {
            return Err(GeometryError::DegenerateQuaternion);
        }
        Ok(Quaternion::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    pub fn negate(&self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }

    /// Flips `self` into the hemisphere of `reference` when their dot product is negative.
    pub fn align_sign(&self, reference: &Quaternion) -> Quaternion {
        if self.dot(reference) < 0.0 {
            self.negate()
        } else {
            *self
        }
    }

    /// Sign-canonical form with `w ≥ 0`.
    pub fn canonical(&self) -> Quaternion {
        if self.w < 0.0 {
            self.negate()
        } else {
            *self
        }
    }

    /// Body-to-inertial rotation matrix of a unit quaternion.
    pub fn to_dcm(&self) -> RotationMatrix {
        let Self { w, x, y, z } = *self;
        RotationMatrix(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ))
    }

    /// Shepperd's method; the result has `w ≥ 0`.
    pub fn from_dcm(r: &RotationMatrix) -> Quaternion {
        let m = r.matrix();
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > m[(0, 0)].max(m[(1, 1)]).max(m[(2, 2)]) {
            let s = 2.0 * (1.0 + trace).sqrt();
            Quaternion::new(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] >= m[(1, 1)] && m[(0, 0)] >= m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
            Quaternion::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] >= m[(2, 2)] {
            let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
            Quaternion::new(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
            Quaternion::new(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        };
        q.canonical()
    }

    /// Rotates a body-frame vector into the inertial frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.to_dcm().rotate(v)
    }

    /// Sign-invariant distance `min(‖a − b‖, ‖a + b‖)`.
    pub fn distance(&self, other: &Quaternion) -> f64 {
        let d = (self.to_vector() - other.to_vector()).norm();
        let s = (self.to_vector() + other.to_vector()).norm();
        d.min(s)
    }

    /// Rotation angle (rad) between two attitudes, from the vector part of
    /// `self ⊗ other⁻¹` after sign alignment.
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        let e = self.multiply(&other.conjugate()).canonical();
        2.0 * e.vector_part().norm()
    }

    /// `Ξ(q)`, the 4×3 matrix with `q̇ = ½ Ξ(q) ω` for body rates `ω`.
    pub fn rate_matrix(&self) -> Matrix4x3<f64> {
        let Self { w, x, y, z } = *self;
        Matrix4x3::new(-x, -y, -z, w, -z, y, z, w, -x, -y, x, w)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.multiply(&rhs)
    }
}

/// `Ω(P, Q, R)` such that `q̇ = ½ Ω q` for body rates `(P, Q, R)`.
pub fn omega_matrix(rates: &Vec3) -> Matrix4<f64> {
    let (p, q, r) = (rates.x, rates.y, rates.z);
    Matrix4::new(
        0.0, -p, -q, -r, //
        p, 0.0, r, -q, //
        q, -r, 0.0, p, //
        r, q, -p, 0.0,
    )
}

/// Analytic `∂q/∂(roll, pitch, yaw)` for the 3-2-1 parameterization.
pub fn euler_jacobian(e: EulerAngles) -> Matrix4x3<f64> {
    let (s1, c1) = (0.5 * e.roll).sin_cos();
    let (s2, c2) = (0.5 * e.pitch).sin_cos();
    let (s3, c3) = (0.5 * e.yaw).sin_cos();
    0.5 * Matrix4x3::new(
        -s1 * c2 * c3 + c1 * s2 * s3,
        -c1 * s2 * c3 + s1 * c2 * s3,
        -c1 * c2 * s3 + s1 * s2 * c3,
        c1 * c2 * c3 + s1 * s2 * s3,
        -s1 * s2 * c3 - c1 * c2 * s3,
        -s1 * c2 * s3 - c1 * s2 * c3,
        -s1 * s2 * c3 + c1 * c2 * s3,
        c1 * c2 * c3 - s1 * s2 * s3,
        -c1 * s2 * s3 + s1 * c2 * c3,
        -s1 * c2 * s3 - c1 * s2 * c3,
        -c1 * s2 * s3 - s1 * c2 * c3,
        c1 * c2 * c3 + s1 * s2 * s3,
    )
}

/// Maps a 3×3 Euler-angle covariance into a 4×4 quaternion covariance at
/// `q_ref`: `G Σ Gᵀ + ε I₄` with `G = ∂q/∂(φ, θ, ψ)`.
pub fn euler_cov_to_quat_cov(
    q_ref: &Quaternion,
    sigma_euler: &Matrix3<f64>,
) -> Result<Matrix4<f64>, GeometryError> {
    validate_covariance(sigma_euler)?;
    let g = euler_jacobian(q_ref.to_euler());
    let mapped = g * sigma_euler * g.transpose();
    let sym = 0.5 * (mapped + mapped.transpose());
    Ok(sym + Matrix4::identity() * QUAT_COV_REGULARIZATION)
}

fn validate_covariance(m: &Matrix3<f64>) -> Result<(), GeometryError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::InvalidCovariance("non-finite entry".into()));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(GeometryError::InvalidCovariance(format!(
            "not symmetric (max asymmetry {asym:e})"
        )));
    }
    let min_eig = SymmetricEigen::new(*m).eigenvalues.min();
    if min_eig < -1e-12 * scale {
        return Err(GeometryError::InvalidCovariance(format!(
            "not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}
