//! Episode orchestration, Monte Carlo campaigns, metrics and export.

pub mod config;
pub mod episode;
pub mod export;
pub mod metrics;
pub mod monte_carlo;
pub mod scenario;

pub use config::{ConfigError, LoopDriver, Mode, PhysicsRate, SimConfig};
pub use episode::{run_episode, run_episode_observed, EpisodeLog, TickObserver, TickRecord, TickView};
pub use export::{export_results, ExportError};
pub use metrics::McSummary;
pub use monte_carlo::{run_monte_carlo, run_seed, McOutcome};
pub use scenario::Scenario;
