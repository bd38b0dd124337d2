//! Decentralized extended information filter and its covariance-form twin.

pub mod ekf;
pub mod eif;
pub mod model;
pub mod wire;

use crate::geometry::GeometryError;
use nalgebra::SMatrix;
use thiserror::Error;

pub use ekf::{ekf_oracle_step, ekf_predict, ekf_update};
pub use eif::{
    from_information, fuse, local_contribution, predict, predict_from_state, to_information, Agent,
    Contribution, FuseOutcome, FuseReport, InformationPair, Prediction,
};
pub use model::NoiseConfig;

pub type Matrix13 = SMatrix<f64, 13, 13>;

/// Largest information-matrix condition number accepted before the filter
/// is declared diverged.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("filter divergence: {0}")]
    Divergence(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
