//! Error, covariance and consistency statistics over episode logs.

use super::episode::{EpisodeLog, TickRecord};
use crate::dynamics::{idx, PayloadState};
use crate::estimator::Matrix13;
use serde::{Deserialize, Serialize};

pub const GROUPS: [&str; 4] = ["position", "orientation", "velocity", "rates"];

/// Two-sided 95% bounds of a chi-square variable with 3 degrees of freedom.
pub const CHI2_3DOF_95: (f64, f64) = (0.215_795_3, 9.348_404);

/// 2-norm error per state group. Orientation uses the rotation angle of the
/// sign-aligned error quaternion.
pub fn group_errors(est: &PayloadState, truth: &PayloadState) -> [f64; 4] {
    [
        (est.position - truth.position).norm(),
        est.attitude.angle_to(&truth.attitude),
        (est.velocity - truth.velocity).norm(),
        (est.rates - truth.rates).norm(),
    ]
}

/// Trace of each group's diagonal covariance block.
pub fn group_traces(p: &Matrix13) -> [f64; 4] {
    let tr = |start: usize, len: usize| (start..start + len).map(|k| p[(k, k)]).sum::<f64>();
    [tr(idx::POS, 3), tr(idx::QUAT, 4), tr(idx::VEL, 3), tr(idx::RATES, 3)]
}

/// `eᵀ P⁻¹ e` over the position block.
pub fn position_nees(est: &PayloadState, p: &Matrix13, truth: &PayloadState) -> Option<f64> {
    let e = est.position - truth.position;
    let block = p.fixed_view::<3, 3>(idx::POS, idx::POS).into_owned();
    let chol = block.cholesky()?;
    Some(e.dot(&chol.solve(&e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub rms_trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub time: f64,
    pub groups: [GroupStats; 4],
    pub position_nees_mean: f64,
    /// Runs that had an estimate at this tick.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub agent: u32,
    pub rows: Vec<SummaryRow>,
    pub runs_included: usize,
    /// Seeds of runs excluded because a filter diverged.
    pub diverged_seeds: Vec<u64>,
}

impl McSummary {
    /// Aggregates agent `agent` over every non-diverged log.
    pub fn from_logs(logs: &[EpisodeLog], agent: u32) -> Self {
        let included: Vec<&EpisodeLog> = logs.iter().filter(|l| !l.diverged()).collect();
        let diverged_seeds = logs.iter().filter(|l| l.diverged()).map(|l| l.seed).collect();
        let ticks = included.iter().map(|l| l.ticks.len()).max().unwrap_or(0);
        let rows = (0..ticks)
            .map(|k| {
                let recs: Vec<&TickRecord> = included.iter().filter_map(|l| l.ticks.get(k)).collect();
                summarize_tick(&recs, agent as usize)
            })
            .collect();
        Self {
            agent,
            rows,
            runs_included: included.len(),
            diverged_seeds,
        }
    }
}

fn summarize_tick(recs: &[&TickRecord], agent: usize) -> SummaryRow {
    let time = recs.first().map_or(f64::NAN, |r| r.time);
    let mut min = [f64::INFINITY; 4];
    let mut max = [f64::NEG_INFINITY; 4];
    let mut sum = [0.0; 4];
    let mut sum_sq_trace = [0.0; 4];
    let mut nees_sum = 0.0;
    let mut samples = 0usize;
    for rec in recs {
        let a = &rec.agents[agent];
        let (Some(est), Some(p)) = (a.estimate.as_ref(), a.covariance.as_ref()) else {
            continue;
        };
        let errors = group_errors(est, &rec.truth);
        let traces = group_traces(p);
        for g in 0..4 {
            min[g] = min[g].min(errors[g]);
            max[g] = max[g].max(errors[g]);
            sum[g] += errors[g];
            sum_sq_trace[g] += traces[g] * traces[g];
        }
        nees_sum += position_nees(est, p, &rec.truth).unwrap_or(f64::NAN);
        samples += 1;
    }
    let n = samples as f64;
    let groups = std::array::from_fn(|g| {
        if samples == 0 {
            GroupStats {
                min: f64::NAN,
                mean: f64::NAN,
                max: f64::NAN,
                rms_trace: f64::NAN,
            }
        } else {
            GroupStats {
                min: min[g],
                mean: sum[g] / n,
                max: max[g],
                rms_trace: (sum_sq_trace[g] / n).sqrt(),
            }
        }
    });
    SummaryRow {
        time,
        groups,
        position_nees_mean: if samples == 0 { f64::NAN } else { nees_sum / n },
        samples,
    }
}

/// Time-and-run average of the position NEES for `agent`, over ticks at or
/// after `from_time`.
pub fn average_position_nees(logs: &[EpisodeLog], agent: usize, from_time: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for log in logs.iter().filter(|l| !l.diverged()) {
        for tick in log.ticks.iter().filter(|t| t.time >= from_time) {
            let a = &tick.agents[agent];
            if let (Some(est), Some(p)) = (&a.estimate, &a.covariance) {
                if let Some(v) = position_nees(est, p, &tick.truth) {
                    sum += v;
                    count += 1;
                }
            }
        }
    }
    sum / count as f64
}

/// Fraction of per-axis position samples with `|truth − estimate| ≤ 2σ`.
pub fn two_sigma_coverage(log: &EpisodeLog, agent: usize, from_time: f64) -> f64 {
    let mut inside = 0usize;
    let mut total = 0usize;
    for tick in log.ticks.iter().filter(|t| t.time >= from_time) {
        let a = &tick.agents[agent];
        if let (Some(est), Some(p)) = (&a.estimate, &a.covariance) {
            for k in 0..3 {
                let err = (est.position[k] - tick.truth.position[k]).abs();
                inside += usize::from(err <= 2.0 * p[(idx::POS + k, idx::POS + k)].sqrt());
                total += 1;
            }
        }
    }
    inside as f64 / total as f64
}

/// Largest truth-to-command position distance at or after `from_time`.
pub fn max_tracking_error(log: &EpisodeLog, from_time: f64) -> f64 {
    log.ticks
        .iter()
        .filter(|t| t.time >= from_time)
        .map(|t| (t.truth.position - t.command.position).norm())
        .fold(0.0, f64::max)
}
