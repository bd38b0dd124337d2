//! Preset configurations.

use super::config::{Mode, SimConfig};
use crate::trajectory::TrajectoryConfig;
use std::fmt;
use std::str::FromStr;

/// Communication blackout used by the `*-commloss` presets (s).
pub const BLACKOUT: (f64, f64) = (20.0, 40.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Pirouette,
    PirouetteCommloss,
    Lissajous,
    LissajousCommloss,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Pirouette,
        Scenario::PirouetteCommloss,
        Scenario::Lissajous,
        Scenario::LissajousCommloss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Pirouette => "pirouette",
            Scenario::PirouetteCommloss => "pirouette-commloss",
            Scenario::Lissajous => "lissajous",
            Scenario::LissajousCommloss => "lissajous-commloss",
        }
    }

    /// Pirouette presets run the estimator in isolation for 60 s; Lissajous
    /// presets close the loop on the estimates for 80 s.
    pub fn config(self) -> SimConfig {
        let base = match self {
            Scenario::Pirouette | Scenario::PirouetteCommloss => SimConfig {
                mode: Mode::Isolated,
                duration: 60.0,
                trajectory: TrajectoryConfig::pirouette(),
                ..Default::default()
            },
            Scenario::Lissajous | Scenario::LissajousCommloss => SimConfig {
                mode: Mode::InLoop,
                duration: 80.0,
                trajectory: TrajectoryConfig::lissajous(),
                ..Default::default()
            },
        };
        match self {
            Scenario::PirouetteCommloss | Scenario::LissajousCommloss => base.with_blackout(BLACKOUT.0, BLACKOUT.1),
            _ => base,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scenario {s:?}"))
    }
}
