//! Little-endian byte encoding of a [`Contribution`].
//!
//! Layout: `u32` agent id, `u64` step, 13 `f64` for `i`, then the 91 `f64`
//! of the upper triangle of `I` in row-major order. 844 bytes in total.

use super::eif::Contribution;
use super::Matrix13;
use crate::dynamics::{StateVector, STATE_DIM};
use thiserror::Error;

pub const UPPER_TRIANGLE_LEN: usize = STATE_DIM * (STATE_DIM + 1) / 2;
pub const WIRE_LEN: usize = 4 + 8 + 8 * (STATE_DIM + UPPER_TRIANGLE_LEN);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("expected {WIRE_LEN} bytes, got {0}")]
    Length(usize),
    #[error("non-finite value in encoded contribution")]
    NonFinite,
}

pub fn encode(c: &Contribution) -> Vec<u8> {
    let mut out = Vec::with_capacity(WIRE_LEN);
    out.extend_from_slice(&c.agent.to_le_bytes());
    out.extend_from_slice(&c.step.to_le_bytes());
    for v in c.i.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for r in 0..STATE_DIM {
        for col in r..STATE_DIM {
            out.extend_from_slice(&c.matrix[(r, col)].to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Contribution, WireError> {
    if bytes.len() != WIRE_LEN {
        return Err(WireError::Length(bytes.len()));
    }
    let agent = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let step = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let mut doubles = bytes[12..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
    let mut i = StateVector::zeros();
    for v in i.iter_mut() {
        *v = doubles.next().expect("length checked");
    }
    let mut matrix = Matrix13::zeros();
    for r in 0..STATE_DIM {
        for col in r..STATE_DIM {
            let v = doubles.next().expect("length checked");
            matrix[(r, col)] = v;
            matrix[(col, r)] = v;
        }
    }
    let c = Contribution {
        agent,
        step,
        i,
        matrix,
    };
    if !c.is_finite() {
        return Err(WireError::NonFinite);
    }
    Ok(c)
}
