//! Extended information filter: information-form prediction, local
//! measurement contributions and fusion by summation.

use super::model::{
    initial_covariance, lifted_process_noise, measurement_covariance, measurement_matrix,
    measurement_vector, predicted_measurement, process_jacobian, transition, NoiseConfig, MEAS_DIM,
};
use super::{EstimatorError, Matrix13, CONDITION_LIMIT};
use crate::dynamics::{idx, ControlInput, PayloadState, StateVector};
use crate::geometry::Vec3;
use crate::sensor::Measurement;
use nalgebra::{Cholesky, SMatrix, SVector};
use std::cmp::Ordering;

/// Information vector `y = P⁻¹x` and matrix `Y = P⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationPair {
    pub y: StateVector,
    pub matrix: Matrix13,
}

impl InformationPair {
    pub fn asymmetry(&self) -> f64 {
        (self.matrix - self.matrix.transpose()).amax()
    }
}

/// One agent's measurement information for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub agent: u32,
    pub step: u64,
    pub i: StateVector,
    pub matrix: Matrix13,
}

impl Contribution {
    pub fn is_finite(&self) -> bool {
        self.i.iter().chain(self.matrix.iter()).all(|v| v.is_finite())
    }
}

/// Prediction output: the information pair plus the predicted state it was
/// built from, which is the linearization point for this step.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub pair: InformationPair,
    pub state: PayloadState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseOutcome {
    pub pair: InformationPair,
    pub fused: usize,
    pub rejected: usize,
}

fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    0.5 * (m + m.transpose())
}

fn cholesky13(m: &Matrix13, what: &str) -> Result<Cholesky<f64, nalgebra::Const<13>>, EstimatorError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::Divergence(format!("{what} has non-finite entries")));
    }
    Cholesky::new(*m).ok_or_else(|| EstimatorError::Divergence(format!("{what} is not positive definite")))
}

/// Condition number estimate `(max Lᵢᵢ / min Lᵢᵢ)²` from a Cholesky factor.
/// It never exceeds the true 2-norm condition number.
pub fn condition_estimate<const N: usize>(chol: &Cholesky<f64, nalgebra::Const<N>>) -> f64 {
    let d = chol.l_dirty().diagonal();
    let ratio = d.max() / d.min();
    ratio * ratio
}

pub fn to_information(x: &PayloadState, covariance: &Matrix13) -> Result<InformationPair, EstimatorError> {
    let chol = cholesky13(covariance, "covariance")?;
    let matrix = symmetrize(&chol.inverse());
    Ok(InformationPair {
        y: matrix * x.to_vector(),
        matrix,
    })
}

/// Recovers `(x, P)`, renormalizing the quaternion of `x`.
pub fn from_information(p: &InformationPair) -> Result<(PayloadState, Matrix13), EstimatorError> {
    let chol = cholesky13(&p.matrix, "information matrix")?;
    let cond = condition_estimate(&chol);
    if cond > CONDITION_LIMIT {
        return Err(EstimatorError::Divergence(format!(
            "information matrix condition number {cond:.3e} exceeds limit"
        )));
    }
    let raw = PayloadState::from_vector(&chol.solve(&p.y));
    let attitude = raw
        .attitude
        .normalize()
        .map_err(|_| EstimatorError::Divergence("estimated quaternion has zero norm".into()))?;
    Ok((PayloadState { attitude, ..raw }, symmetrize(&chol.inverse())))
}

/// Prediction from an already-extracted posterior.
pub fn predict_from_state(
    x: &PayloadState,
    covariance: &Matrix13,
    u: &ControlInput,
    noise: &NoiseConfig,
    dt: f64,
) -> Result<Prediction, EstimatorError> {
    let state = transition(x, u, dt)?;
    let f = process_jacobian(x, u, dt);
    let m = symmetrize(&(f * covariance * f.transpose() + lifted_process_noise(x, noise, dt)));
    let matrix = symmetrize(&cholesky13(&m, "predicted covariance")?.inverse());
    Ok(Prediction {
        pair: InformationPair {
            y: matrix * state.to_vector(),
            matrix,
        },
        state,
    })
}

pub fn predict(
    p: &InformationPair,
    u: &ControlInput,
    noise: &NoiseConfig,
    dt: f64,
) -> Result<Prediction, EstimatorError> {
    let (x, covariance) = from_information(p)?;
    predict_from_state(&x, &covariance, u, noise, dt)
}

/// Builds `i = Hᵀ R⁻¹ (ν + H x_pred)` and `I = Hᵀ R⁻¹ H` at the linearization
/// point `x_pred`. Returns `None` when the measurement carries no fix.
pub fn local_contribution(
    x_pred: &PayloadState,
    z: &Measurement,
    noise: &NoiseConfig,
    step: u64,
) -> Result<Option<Contribution>, EstimatorError> {
    let Some(fix) = z.fix else {
        return Ok(None);
    };
    let r = measurement_covariance(&x_pred.attitude, noise)?;
    let r_inv = Cholesky::new(r)
        .ok_or_else(|| EstimatorError::Divergence("measurement covariance not positive definite".into()))?
        .inverse();
    let r_inv = symmetrize(&r_inv);
    let h = measurement_matrix();
    let hx = predicted_measurement(x_pred);
    let innovation = measurement_vector(&fix, &x_pred.attitude) - hx;
    Ok(Some(Contribution {
        agent: z.agent,
        step,
        i: h.transpose() * (r_inv * (innovation + hx)),
        matrix: h.transpose() * r_inv * h,
    }))
}

fn canonical_order(a: &Contribution, b: &Contribution) -> Ordering {
    a.agent
        .cmp(&b.agent)
        .then(a.step.cmp(&b.step))
        .then_with(|| {
            let bits = |c: &Contribution| c.i.iter().chain(c.matrix.iter()).map(|v| v.to_bits()).collect::<Vec<_>>();
            bits(a).cmp(&bits(b))
        })
}

/// `y' = y⁻ + Σ i`, `Y' = Y⁻ + Σ I`.
///
/// Contributions are summed in a canonical order so the result does not
/// depend on arrival order, bit for bit. Non-finite contributions are
/// skipped and counted.
pub fn fuse(p_pred: &InformationPair, contributions: &[Contribution]) -> FuseOutcome {
    let mut accepted: Vec<&Contribution> = contributions.iter().filter(|c| c.is_finite()).collect();
    let rejected = contributions.len() - accepted.len();
    if accepted.is_empty() {
        return FuseOutcome {
            pair: p_pred.clone(),
            fused: 0,
            rejected,
        };
    }
    accepted.sort_by(|a, b| canonical_order(a, b));
    let mut sum_i = StateVector::zeros();
    let mut sum_m = Matrix13::zeros();
    for c in &accepted {
        sum_i += c.i;
        sum_m += c.matrix;
    }
    FuseOutcome {
        pair: InformationPair {
            y: p_pred.y + sum_i,
            matrix: symmetrize(&(p_pred.matrix + sum_m)),
        },
        fused: accepted.len(),
        rejected,
    }
}

/// Pose implied by a set of contributions alone: the weighted least-squares
/// combination of their position/quaternion blocks.
pub fn fused_pose(contributions: &[Contribution]) -> Result<(Vec3, crate::geometry::Quaternion), EstimatorError> {
    let mut a = SMatrix::<f64, MEAS_DIM, MEAS_DIM>::zeros();
    let mut b = SVector::<f64, MEAS_DIM>::zeros();
    let mut sorted: Vec<&Contribution> = contributions.iter().filter(|c| c.is_finite()).collect();
    sorted.sort_by(|a, b| canonical_order(a, b));
    for c in sorted {
        a += c.matrix.fixed_view::<MEAS_DIM, MEAS_DIM>(0, 0);
        b += c.i.fixed_rows::<MEAS_DIM>(0);
    }
    let z = Cholesky::new(a)
        .ok_or_else(|| EstimatorError::Divergence("no usable measurement information".into()))?
        .solve(&b);
    let q = crate::geometry::Quaternion::new(z[3], z[4], z[5], z[6])
        .normalize()
        .map_err(|_| EstimatorError::Divergence("fused quaternion has zero norm".into()))?;
    Ok((Vec3::new(z[0], z[1], z[2]), q))
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
enum FilterState {
    Uninitialized,
    Running {
        posterior: PayloadState,
        covariance: Matrix13,
        pair: InformationPair,
        predicted: Option<Prediction>,
    },
}

/// Per-agent report for one fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FuseReport {
    pub fused: usize,
    pub rejected: usize,
    pub initialized_now: bool,
}

/// One agent's filter: predict, contribute, fuse, once per tick.
#[derive(Debug, Clone)]
pub struct Agent {
    id: u32,
    noise: NoiseConfig,
    state: FilterState,
}

impl Agent {
    /// An agent that initializes from its first fused measurement.
    pub fn new(id: u32, noise: NoiseConfig) -> Self {
        Self {
            id,
            noise,
            state: FilterState::Uninitialized,
        }
    }

    pub fn with_initial(
        id: u32,
        noise: NoiseConfig,
        x0: &PayloadState,
        p0: &Matrix13,
    ) -> Result<Self, EstimatorError> {
        let pair = to_information(x0, p0)?;
        let (posterior, covariance) = from_information(&pair)?;
        Ok(Self {
            id,
            noise,
            state: FilterState::Running {
                posterior,
                covariance,
                pair,
                predicted: None,
            },
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn is_initialized(&self) -> bool {
        matches!(self.state, FilterState::Running { .. })
    }

    pub fn information(&self) -> Option<&InformationPair> {
        match &self.state {
            FilterState::Running { pair, .. } => Some(pair),
            FilterState::Uninitialized => None,
        }
    }

    /// Latest posterior state and covariance.
    pub fn estimate(&self) -> Option<(&PayloadState, &Matrix13)> {
        match &self.state {
            FilterState::Running {
                posterior, covariance, ..
            } => Some((posterior, covariance)),
            FilterState::Uninitialized => None,
        }
    }

    /// Time update. A no-op before initialization.
    pub fn predict(&mut self, u: &ControlInput, dt: f64) -> Result<(), EstimatorError> {
        if let FilterState::Running {
            posterior,
            covariance,
            predicted,
            ..
        } = &mut self.state
        {
            *predicted = Some(predict_from_state(posterior, covariance, u, &self.noise, dt)?);
        }
        Ok(())
    }

    /// This agent's contribution for `step`, linearized at its predicted
    /// state, or at its own measurement before initialization.
    pub fn contribute(&self, z: &Measurement, step: u64) -> Result<Option<Contribution>, EstimatorError> {
        let lin = match &self.state {
            FilterState::Running {
                predicted: Some(p), ..
            } => p.state,
            FilterState::Running { posterior, .. } => *posterior,
            FilterState::Uninitialized => match z.fix {
                Some(fix) => PayloadState {
                    position: fix.position,
                    attitude: fix.attitude,
                    ..Default::default()
                },
                None => return Ok(None),
            },
        };
        let mut z = *z;
        z.agent = self.id;
        local_contribution(&lin, &z, &self.noise, step)
    }

    /// Measurement update with the agent's own contribution and whatever
    /// peers delivered.
    pub fn fuse(&mut self, contributions: &[Contribution]) -> Result<FuseReport, EstimatorError> {
        match &mut self.state {
            FilterState::Uninitialized => {
                let usable: Vec<Contribution> = contributions.iter().filter(|c| c.is_finite()).cloned().collect();
                let rejected = contributions.len() - usable.len();
                if usable.is_empty() {
                    return Ok(FuseReport {
                        rejected,
                        ..Default::default()
                    });
                }
                let (position, attitude) = fused_pose(&usable)?;
                let x0 = PayloadState {
                    position,
                    attitude,
                    ..Default::default()
                };
                let p0 = initial_covariance(&attitude, &self.noise)?;
                *self = Self::with_initial(self.id, self.noise.clone(), &x0, &p0)?;
                Ok(FuseReport {
                    fused: usable.len(),
                    rejected,
                    initialized_now: true,
                })
            }
            FilterState::Running {
                posterior,
                covariance,
                pair,
                predicted,
            } => {
                let prior = match predicted.take() {
                    Some(p) => p.pair,
                    None => pair.clone(),
                };
                let outcome = fuse(&prior, contributions);
                let (x, p) = from_information(&outcome.pair)?;
                *pair = outcome.pair;
                *posterior = x;
                *covariance = p;
                Ok(FuseReport {
                    fused: outcome.fused,
                    rejected: outcome.rejected,
                    initialized_now: false,
                })
            }
        }
    }
}

/// Position block of a covariance.
pub fn position_block(p: &Matrix13) -> nalgebra::Matrix3<f64> {
    p.fixed_view::<3, 3>(idx::POS, idx::POS).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EulerAngles, Quaternion};
    use crate::sensor::PoseFix;

    fn state() -> PayloadState {
        PayloadState {
            position: Vec3::new(1.0, 2.0, -3.0),
            attitude: Quaternion::from_euler(EulerAngles::new(0.05, -0.02, 0.8)),
            velocity: Vec3::new(0.3, -0.1, 0.0),
            rates: Vec3::new(0.0, 0.0, 0.2),
        }
    }

    #[test]
    fn identity_covariance_gives_identity_information() {
        let x = state();
        let p = to_information(&x, &Matrix13::identity()).unwrap();
        assert_eq!(p.matrix, Matrix13::identity());
        assert!((p.y - x.to_vector()).amax() < 1e-15);
    }

    #[test]
    fn scaled_covariance() {
        let x = state();
        let p = to_information(&x, &(Matrix13::identity() * 4.0)).unwrap();
        assert!((p.matrix - Matrix13::identity() * 0.25).amax() < 1e-15);
        assert!((p.y - 0.25 * x.to_vector()).amax() < 1e-15);
        let (back, cov) = from_information(&p).unwrap();
        assert!((back.to_vector() - x.to_vector()).amax() < 1e-12);
        assert!((cov - Matrix13::identity() * 4.0).amax() < 1e-12);
    }

    #[test]
    fn singular_covariance_is_divergence() {
        let mut p = Matrix13::identity();
        p[(5, 5)] = 0.0;
        assert!(matches!(to_information(&state(), &p), Err(EstimatorError::Divergence(_))));
    }

    #[test]
    fn ill_conditioned_information_is_divergence() {
        let mut y = Matrix13::identity();
        y[(0, 0)] = 1e13;
        let p = InformationPair {
            y: StateVector::zeros(),
            matrix: y,
        };
        assert!(matches!(from_information(&p), Err(EstimatorError::Divergence(_))));
    }

    #[test]
    fn static_noiseless_prediction_keeps_information() {
        let x = PayloadState {
            velocity: Vec3::zeros(),
            rates: Vec3::zeros(),
            ..state()
        };
        let p = to_information(&x, &(Matrix13::identity() * 0.3)).unwrap();
        let noise = NoiseConfig {
            accel_var: [0.0; 3],
            angular_accel_var: [0.0; 3],
            ..Default::default()
        };
        let pred = predict(&p, &ControlInput::zero(), &noise, 0.05).unwrap();
        assert!((pred.state.to_vector() - x.to_vector()).amax() < 1e-12);
        // only the position/velocity coupling changes Y with zero rates and zero velocity
        let f = process_jacobian(&x, &ControlInput::zero(), 0.05);
        let expected = (f * Matrix13::identity() * 0.3 * f.transpose()).try_inverse().unwrap();
        assert!((pred.pair.matrix - expected).amax() < 1e-9);
    }

    #[test]
    fn empty_fusion_is_identity() {
        let p = to_information(&state(), &(Matrix13::identity() * 0.2)).unwrap();
        let out = fuse(&p, &[]);
        assert_eq!(out.pair, p);
        assert_eq!(out.fused, 0);
    }

    #[test]
    fn duplicate_contributions_add() {
        let x = state();
        let p = to_information(&x, &(Matrix13::identity() * 0.2)).unwrap();
        let z = Measurement {
            agent: 0,
            time: 0.0,
            fix: Some(PoseFix {
                position: x.position + Vec3::new(0.1, 0.0, 0.0),
                attitude: x.attitude,
            }),
        };
        let c = local_contribution(&x, &z, &NoiseConfig::default(), 0).unwrap().unwrap();
        let out = fuse(&p, &[c.clone(), c.clone()]);
        assert!((out.pair.matrix - (p.matrix + 2.0 * c.matrix)).amax() < 1e-9);
        assert_eq!(out.fused, 2);
    }

    #[test]
    fn non_finite_contributions_are_rejected() {
        let x = state();
        let p = to_information(&x, &(Matrix13::identity() * 0.2)).unwrap();
        let mut bad = Contribution {
            agent: 1,
            step: 0,
            i: StateVector::zeros(),
            matrix: Matrix13::zeros(),
        };
        bad.i[2] = f64::NAN;
        let out = fuse(&p, &[bad]);
        assert_eq!(out.rejected, 1);
        assert_eq!(out.pair, p);
    }

    #[test]
    fn zero_innovation_is_fixed_point() {
        let x = state();
        let p = to_information(&x, &(Matrix13::identity() * 0.2)).unwrap();
        let z = Measurement {
            agent: 0,
            time: 0.0,
            fix: Some(PoseFix {
                position: x.position,
                attitude: x.attitude.negate(),
            }),
        };
        let c = local_contribution(&x, &z, &NoiseConfig::default(), 0).unwrap().unwrap();
        let (after, _) = from_information(&fuse(&p, &[c]).pair).unwrap();
        assert!((after.to_vector() - x.to_vector()).amax() < 1e-9);
    }

    #[test]
    fn missing_fix_gives_no_contribution() {
        let z = Measurement {
            agent: 0,
            time: 0.0,
            fix: None,
        };
        assert!(local_contribution(&state(), &z, &NoiseConfig::default(), 0).unwrap().is_none());
    }

    #[test]
    fn agent_initializes_from_first_fix() {
        let x = state();
        let mut agent = Agent::new(2, NoiseConfig::default());
        agent.predict(&ControlInput::zero(), 0.05).unwrap();
        let z = Measurement {
            agent: 2,
            time: 0.0,
            fix: Some(PoseFix {
                position: x.position,
                attitude: x.attitude,
            }),
        };
        let c = agent.contribute(&z, 0).unwrap().unwrap();
        let report = agent.fuse(&[c]).unwrap();
        assert!(report.initialized_now);
        let (est, cov) = agent.estimate().unwrap();
        assert!((est.position - x.position).norm() < 1e-12);
        assert!(est.attitude.distance(&x.attitude) < 1e-12);
        assert_eq!(est.velocity, Vec3::zeros());
        assert!((cov[(0, 0)] - 0.12).abs() < 1e-12);
        assert!((cov[(idx::VEL, idx::VEL)] - 0.5).abs() < 1e-12);
    }
}
