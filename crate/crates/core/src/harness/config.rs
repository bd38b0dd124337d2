//! Simulation configuration, loaded from TOML.

use crate::controller::ControllerGains;
use crate::dynamics::DisturbanceModel;
use crate::estimator::NoiseConfig;
use crate::network::{LossSchedule, LossWindow};
use crate::sensor::{CameraConfig, FormationConfig, SensorNoise};
use crate::trajectory::TrajectoryConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Truth follows the feed-forward; estimates never touch the loop.
    #[default]
    Isolated,
    /// Each agent commands from its own estimate.
    InLoop,
}

/// Whose command drives the truth payload in in-loop mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopDriver {
    /// Mean of the agents' commands.
    #[default]
    AgentMean,
    /// A single agent's command.
    Agent(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PhysicsRate {
    /// Fixed-step RK4 at 240 Hz (12 substeps per 20 Hz tick).
    #[default]
    #[serde(rename = "lockstep-240")]
    Lockstep240,
    /// RK4 at exactly 250 Hz, alternating 12 and 13 substeps per tick.
    #[serde(rename = "strict-250")]
    Strict250,
}

impl PhysicsRate {
    pub fn hz(self) -> f64 {
        match self {
            PhysicsRate::Lockstep240 => 240.0,
            PhysicsRate::Strict250 => 250.0,
        }
    }

    /// Physics substeps covering estimator tick `k` (the interval ending at tick `k`).
    pub fn substeps(self, k: u64, estimator_dt: f64) -> u32 {
        let per_tick = estimator_dt * self.hz();
        let boundary = |j: u64| (j as f64 * per_tick + 1e-9).floor() as u64;
        match self {
            PhysicsRate::Lockstep240 => per_tick.round() as u32,
            PhysicsRate::Strict250 => (boundary(k) - boundary(k.saturating_sub(1))) as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub gains: ControllerGains,
    pub driver: LoopDriver,
    /// Isolated mode only: drive truth with the controller on the true state
    /// instead of pure feed-forward. The estimators still receive the feed-forward.
    pub isolated_feedback: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            gains: ControllerGains::default(),
            driver: LoopDriver::AgentMean,
            isolated_feedback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Delivery delay in whole estimator ticks.
    pub latency_steps: u64,
    /// Keep a byte log of every broadcast contribution.
    pub record: bool,
    pub loss: LossSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub mode: Mode,
    pub agents: u32,
    /// Episode length (s).
    pub duration: f64,
    /// Estimator and control period (s).
    pub estimator_dt: f64,
    pub physics: PhysicsRate,
    /// Master seed; run `i` of a campaign uses `seed + i`.
    pub seed: u64,
    pub runs: u32,
    pub trajectory: TrajectoryConfig,
    pub camera: CameraConfig,
    pub formation: FormationConfig,
    pub sensor: SensorNoise,
    pub filter: NoiseConfig,
    pub disturbance: DisturbanceModel,
    pub control: ControlConfig,
    pub network: NetworkConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Isolated,
            agents: 4,
            duration: 60.0,
            estimator_dt: 0.05,
            physics: PhysicsRate::Lockstep240,
            seed: 1,
            runs: 50,
            trajectory: TrajectoryConfig::pirouette(),
            camera: CameraConfig::default(),
            formation: FormationConfig::default(),
            sensor: SensorNoise::default(),
            filter: NoiseConfig::default(),
            disturbance: DisturbanceModel::default(),
            control: ControlConfig::default(),
            network: NetworkConfig::default(),
        }
    }
}

/// A run manifest wraps the config together with the seeds that were used.
#[derive(Debug, Deserialize)]
struct ManifestEnvelope {
    config: SimConfig,
}

impl SimConfig {
    /// Parses a config file, or the `[config]` table of a run manifest.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let value: toml::Table = text.parse()?;
        let cfg: SimConfig = if value.contains_key("config") {
            toml::from_str::<ManifestEnvelope>(text)?.config
        } else {
            toml::from_str(text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn tick_count(&self) -> u64 {
        (self.duration / self.estimator_dt).round() as u64
    }

    pub fn with_blackout(mut self, start: f64, end: f64) -> Self {
        self.network.loss.windows.push(LossWindow::blackout(start, end));
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        if self.agents == 0 || self.agents > 64 {
            return Err(invalid(format!("agents must be in 1..=64, got {}", self.agents)));
        }
        if !(self.estimator_dt > 0.0 && self.estimator_dt.is_finite()) {
            return Err(invalid("estimator_dt must be > 0".into()));
        }
        let per_tick = self.estimator_dt * self.physics.hz();
        if per_tick < 1.0 - 1e-9 {
            return Err(invalid("estimator_dt is shorter than one physics step".into()));
        }
        if self.physics == PhysicsRate::Lockstep240 && (per_tick - per_tick.round()).abs() > 1e-9 {
            return Err(invalid(format!(
                "estimator_dt {} is not a whole number of 240 Hz physics steps",
                self.estimator_dt
            )));
        }
        if !(self.duration > self.trajectory.ramp && self.duration.is_finite()) {
            return Err(invalid(format!(
                "duration {} must exceed the trajectory ramp {}",
                self.duration, self.trajectory.ramp
            )));
        }
        if self.runs == 0 {
            return Err(invalid("runs must be >= 1".into()));
        }
        if let LoopDriver::Agent(a) = self.control.driver {
            if a >= self.agents {
                return Err(invalid(format!("control.driver agent {a} does not exist")));
            }
        }
        self.trajectory.validate().map_err(invalid)?;
        self.camera.validate().map_err(invalid)?;
        self.formation.validate().map_err(invalid)?;
        self.sensor.validate().map_err(invalid)?;
        self.filter.validate().map_err(invalid)?;
        self.disturbance.validate().map_err(invalid)?;
        self.control.gains.validate().map_err(invalid)?;
        self.network.loss.validate().map_err(invalid)?;
        Ok(())
    }
}
