//! CSV and manifest output.
//!
//! Files written into the output directory:
//! - `summary.csv`, one row per tick, see [`SUMMARY_HEADER`];
//! - `traj_runNNN.csv` per run, see [`TRAJECTORY_HEADER`];
//! - `bus_runNNN.bin` per run when bus recording is enabled;
//! - `manifest.toml`, the full config plus seeds. It loads as a config.

use super::config::SimConfig;
use super::episode::EpisodeLog;
use super::metrics::{McSummary, GROUPS};
use crate::dynamics::idx;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("nothing to export: no episode logs")]
    EmptyLogs,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub const TRAJECTORY_HEADER: &str = "time,truth_n,truth_e,truth_d,truth_qw,truth_qx,truth_qy,truth_qz,\
cmd_n,cmd_e,cmd_d,est_n,est_e,est_d,est_qw,est_qx,est_qy,est_qz,\
two_sigma_n,two_sigma_e,two_sigma_d,measured,comms_active";

pub fn summary_header() -> String {
    let mut cols = vec!["time".to_string()];
    for g in GROUPS {
        for stat in ["err_min", "err_mean", "err_max", "trace_rms"] {
            cols.push(format!("{g}_{stat}"));
        }
    }
    cols.push("position_nees_mean".into());
    cols.join(",")
}

/// Header of `summary.csv`; identical to [`summary_header`].
pub const SUMMARY_HEADER: &str = "time,\
position_err_min,position_err_mean,position_err_max,position_trace_rms,\
orientation_err_min,orientation_err_mean,orientation_err_max,orientation_trace_rms,\
velocity_err_min,velocity_err_mean,velocity_err_max,velocity_trace_rms,\
rates_err_min,rates_err_mean,rates_err_max,rates_trace_rms,\
position_nees_mean";

pub fn summary_csv(summary: &McSummary) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in &summary.rows {
        let _ = write!(out, "{}", row.time);
        for g in &row.groups {
            let _ = write!(out, ",{},{},{},{}", g.min, g.mean, g.max, g.rms_trace);
        }
        let _ = writeln!(out, ",{}", row.position_nees_mean);
    }
    out
}

pub fn trajectory_csv(log: &EpisodeLog) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for tick in &log.ticks {
        let tr = &tick.truth;
        let c = &tick.command.position;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            tick.time,
            tr.position.x,
            tr.position.y,
            tr.position.z,
            tr.attitude.w,
            tr.attitude.x,
            tr.attitude.y,
            tr.attitude.z,
            c.x,
            c.y,
            c.z
        );
        let a0 = tick.agents.first();
        match a0.and_then(|a| a.estimate.zip(a.covariance)) {
            Some((e, p)) => {
                let s = |k: usize| 2.0 * p[(idx::POS + k, idx::POS + k)].sqrt();
                let _ = write!(
                    out,
                    ",{},{},{},{},{},{},{},{},{},{}",
                    e.position.x,
                    e.position.y,
                    e.position.z,
                    e.attitude.w,
                    e.attitude.x,
                    e.attitude.y,
                    e.attitude.z,
                    s(0),
                    s(1),
                    s(2)
                );
            }
            None => out.push_str(",,,,,,,,,,"),
        }
        let measured = a0.is_some_and(|a| a.measured);
        let _ = writeln!(out, ",{},{}", u8::from(measured), u8::from(tick.comms_active));
    }
    out
}

#[derive(Serialize)]
struct RunInfo {
    master_seed: u64,
    runs: u32,
    seeds: Vec<u64>,
    diverged_seeds: Vec<u64>,
    version: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run: RunInfo,
    config: &'a SimConfig,
}

pub fn manifest_toml(cfg: &SimConfig, logs: &[EpisodeLog]) -> String {
    let manifest = Manifest {
        run: RunInfo {
            master_seed: cfg.seed,
            runs: logs.len() as u32,
            seeds: logs.iter().map(|l| l.seed).collect(),
            diverged_seeds: logs.iter().filter(|l| l.diverged()).map(|l| l.seed).collect(),
            version: env!("CARGO_PKG_VERSION"),
        },
        config: cfg,
    };
    toml::to_string(&manifest).expect("manifest serializes")
}

/// Paths written by [`export_results`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportedFiles {
    pub summary: PathBuf,
    pub trajectories: Vec<PathBuf>,
    pub recordings: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExportError> {
    let io = |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("partial");
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

pub fn export_results(
    cfg: &SimConfig,
    summary: &McSummary,
    logs: &[EpisodeLog],
    dir: &Path,
) -> Result<ExportedFiles, ExportError> {
    if logs.is_empty() {
        return Err(ExportError::EmptyLogs);
    }
    fs::create_dir_all(dir).map_err(|source| ExportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut trajectories = Vec::with_capacity(logs.len());
    let mut recordings = Vec::new();
    for (i, log) in logs.iter().enumerate() {
        let path = dir.join(format!("traj_run{i:03}.csv"));
        write_atomic(&path, trajectory_csv(log).as_bytes())?;
        trajectories.push(path);
        if let Some(rec) = &log.recording {
            let path = dir.join(format!("bus_run{i:03}.bin"));
            write_atomic(&path, rec)?;
            recordings.push(path);
        }
    }
    let manifest = dir.join("manifest.toml");
    write_atomic(&manifest, manifest_toml(cfg, logs).as_bytes())?;
    let summary_path = dir.join("summary.csv");
    write_atomic(&summary_path, summary_csv(summary).as_bytes())?;
    Ok(ExportedFiles {
        summary: summary_path,
        trajectories,
        recordings,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_constant_matches_generated() {
        assert_eq!(SUMMARY_HEADER, summary_header());
        assert_eq!(TRAJECTORY_HEADER.split(',').count(), 23);
    }

    #[test]
    fn empty_logs_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let summary = McSummary::from_logs(&[], 0);
        assert!(matches!(
            export_results(&SimConfig::default(), &summary, &[], &out),
            Err(ExportError::EmptyLogs)
        ));
        assert!(!out.exists());
    }
}
