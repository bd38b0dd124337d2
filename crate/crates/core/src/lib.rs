//! Cooperative payload pose estimation for a team of camera-equipped
//! quadrotors carrying a slung load.

pub mod controller;
pub mod dynamics;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod network;
pub mod rng;
pub mod sensor;
pub mod trajectory;
pub mod validation;

pub use dynamics::{ControlInput, PayloadState, StateVector};
pub use geometry::{EulerAngles, Quaternion, RotationMatrix, Vec3};
