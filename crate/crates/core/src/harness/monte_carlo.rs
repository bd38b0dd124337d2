//! Monte Carlo campaigns over disturbance and sensor-noise realizations.

use super::config::SimConfig;
use super::episode::{run_episode, EpisodeLog};
use super::metrics::McSummary;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct McOutcome {
    pub summary: McSummary,
    pub logs: Vec<EpisodeLog>,
}

/// Seed of run `index` in a campaign.
pub fn run_seed(master: u64, index: u32) -> u64 {
    master.wrapping_add(u64::from(index))
}

/// Runs `cfg.runs` episodes with up to `parallel` worker threads. Logs come
/// back in run order whatever the thread count.
pub fn run_monte_carlo(cfg: &SimConfig, parallel: usize) -> McOutcome {
    let seeds: Vec<u64> = (0..cfg.runs).map(|i| run_seed(cfg.seed, i)).collect();
    let logs: Vec<EpisodeLog> = if parallel <= 1 {
        seeds.iter().map(|&s| run_episode(cfg, s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .expect("thread pool");
        pool.install(|| seeds.par_iter().map(|&s| run_episode(cfg, s)).collect())
    };
    McOutcome {
        summary: McSummary::from_logs(&logs, 0),
        logs,
    }
}
