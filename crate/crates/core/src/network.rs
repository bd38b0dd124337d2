//! Lockstep broadcast bus with scheduled communication loss.

use crate::estimator::wire;
use crate::estimator::Contribution;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// What a loss window cuts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Every inter-agent link.
    Blackout,
    /// Only the listed directed links `[from, to]`.
    Links(Vec<[u32; 2]>),
}

/// Loss over the closed-open interval `[start, end)` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWindow {
    pub start: f64,
    pub end: f64,
    pub mode: LossMode,
}

impl LossWindow {
    pub fn blackout(start: f64, end: f64) -> Self {
        Self {
            start,
            end,
            mode: LossMode::Blackout,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    fn cuts(&self, from: u32, to: u32) -> bool {
        match &self.mode {
            LossMode::Blackout => true,
            LossMode::Links(links) => links.contains(&[from, to]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossSchedule {
    pub windows: Vec<LossWindow>,
}

impl LossSchedule {
    pub fn new(windows: Vec<LossWindow>) -> Self {
        Self { windows }
    }

    pub fn validate(&self) -> Result<(), String> {
        for w in &self.windows {
            if !(w.start.is_finite() && w.end.is_finite() && w.start < w.end) {
                return Err(format!("loss window [{}, {}) must have start < end", w.start, w.end));
            }
        }
        let mut sorted: Vec<&LossWindow> = self.windows.iter().collect();
        sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in sorted.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(format!(
                    "loss windows [{}, {}) and [{}, {}) overlap",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                ));
            }
        }
        Ok(())
    }

    pub fn link_up(&self, from: u32, to: u32, t: f64) -> bool {
        !self.windows.iter().any(|w| w.contains(t) && w.cuts(from, to))
    }

    /// True when no window of any kind is active at `t`.
    pub fn all_links_up(&self, t: f64) -> bool {
        !self.windows.iter().any(|w| w.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusMessage {
    pub sender: u32,
    pub step: u64,
    pub contribution: Contribution,
    pub send_time: f64,
}

/// Delivery counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusStats {
    pub produced: u64,
    pub delivered: u64,
    pub lost: u64,
    pub stale: u64,
    pub non_finite: u64,
}

#[derive(Debug, Clone)]
struct Pending {
    deliver_step: u64,
    contribution: Contribution,
}

/// Synchronous bus. A message broadcast at step `k` is collectable by each
/// reachable peer at step `k + latency`; anything not collected at its
/// delivery step is discarded as stale.
#[derive(Debug, Clone)]
pub struct Bus {
    agents: BTreeSet<u32>,
    schedule: LossSchedule,
    latency: u64,
    inboxes: Vec<Vec<Pending>>,
    stats: BusStats,
    recording: Option<Vec<u8>>,
}

impl Bus {
    pub fn new(agent_count: u32, schedule: LossSchedule, latency_steps: u64) -> Self {
        Self {
            agents: (0..agent_count).collect(),
            schedule,
            latency: latency_steps,
            inboxes: vec![Vec::new(); agent_count as usize],
            stats: BusStats::default(),
            recording: None,
        }
    }

    /// Keep a byte log of every broadcast: `send_time` as `f64` LE followed by
    /// the contribution wire encoding.
    pub fn enable_recording(&mut self) {
        self.recording.get_or_insert_with(Vec::new);
    }

    pub fn recording(&self) -> Option<&[u8]> {
        self.recording.as_deref()
    }

    pub fn stats(&self) -> BusStats {
        self.stats
    }

    pub fn schedule(&self) -> &LossSchedule {
        &self.schedule
    }

    pub fn broadcast(&mut self, msg: BusMessage, t: f64) {
        if !msg.contribution.is_finite() {
            self.stats.non_finite += 1;
            return;
        }
        self.stats.produced += 1;
        if let Some(rec) = &mut self.recording {
            rec.extend_from_slice(&msg.send_time.to_le_bytes());
            rec.extend_from_slice(&wire::encode(&msg.contribution));
        }
        let deliver_step = msg.step + self.latency;
        for &peer in &self.agents {
            if peer == msg.sender {
                continue;
            }
            if self.schedule.link_up(msg.sender, peer, t) {
                self.inboxes[peer as usize].push(Pending {
                    deliver_step,
                    contribution: msg.contribution.clone(),
                });
            } else {
                self.stats.lost += 1;
            }
        }
    }

    /// Peer contributions due at step `k`. Never includes the caller's own.
    pub fn collect(&mut self, agent: u32, k: u64) -> Vec<Contribution> {
        let Some(inbox) = self.inboxes.get_mut(agent as usize) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut keep = Vec::new();
        for p in inbox.drain(..) {
            match p.deliver_step.cmp(&k) {
                std::cmp::Ordering::Equal => out.push(p.contribution),
                std::cmp::Ordering::Less => self.stats.stale += 1,
                std::cmp::Ordering::Greater => keep.push(p),
            }
        }
        *inbox = keep;
        self.stats.delivered += out.len() as u64;
        out
    }
}
