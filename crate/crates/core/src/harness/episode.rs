//! One lockstep episode: truth, sensing, estimation, communication, control.

use super::config::{LoopDriver, Mode, SimConfig};
use crate::controller::compute_input;
use crate::dynamics::{sample_disturbance, step_truth, ControlInput, PayloadState};
use crate::estimator::{Agent, Matrix13};
use crate::geometry::Vec3;
use crate::network::{Bus, BusMessage, BusStats};
use crate::rng::{SeedTree, StreamRng};
use crate::sensor::{sense, Measurement, QuadPose};
use crate::trajectory::ReferenceState;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub estimate: Option<PayloadState>,
    pub covariance: Option<Matrix13>,
    /// The agent detected the tag this tick.
    pub measured: bool,
    /// Contributions fused this tick, own included.
    pub fused: usize,
    pub rejected: usize,
    /// Input the agent's filter predicted with this tick.
    pub filter_input: ControlInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub step: u64,
    pub time: f64,
    pub truth: PayloadState,
    /// Reference commanded at this tick.
    pub command: ReferenceState,
    /// Input applied to the truth over the following interval.
    pub applied: ControlInput,
    /// No loss window of any kind is active.
    pub comms_active: bool,
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub step: u64,
    pub time: f64,
    pub agent: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub estimator_dt: f64,
    pub ticks: Vec<TickRecord>,
    /// Set when a filter diverged; the log stops at the tick before.
    pub divergence: Option<Divergence>,
    pub bus: BusStats,
    #[serde(skip)]
    pub recording: Option<Vec<u8>>,
}

impl EpisodeLog {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }
}

/// Everything visible at the end of one tick, for observers that check the
/// pipeline against an external reference.
pub struct TickView<'a> {
    pub step: u64,
    pub time: f64,
    pub truth: &'a PayloadState,
    pub measurements: &'a [Measurement],
    pub quads: &'a [QuadPose],
    pub agents: &'a [Agent],
    /// Input each agent predicted with this tick; `None` at the first tick.
    pub filter_inputs: Option<&'a [ControlInput]>,
}

pub trait TickObserver {
    fn on_tick(&mut self, view: &TickView<'_>);
}

impl TickObserver for () {
    fn on_tick(&mut self, _: &TickView<'_>) {}
}

/// Reference at `t` with feed-forward accelerations taken at the middle of
/// the coming control interval.
pub fn command_reference(cfg: &SimConfig, t: f64) -> ReferenceState {
    let mut r = cfg.trajectory.sample(t);
    let mid = cfg.trajectory.sample(t + 0.5 * cfg.estimator_dt);
    r.linear_accel = mid.linear_accel;
    r.angular_accel = mid.angular_accel;
    r
}

fn reference_state(r: &ReferenceState) -> PayloadState {
    PayloadState {
        position: r.position,
        attitude: r.attitude,
        velocity: r.velocity,
        rates: r.rates,
    }
}

struct Streams {
    disturbance: StreamRng,
    sensors: Vec<StreamRng>,
    formation: Vec<StreamRng>,
}

impl Streams {
    fn new(seed: u64, agents: u32) -> Self {
        let tree = SeedTree::new(seed);
        Self {
            disturbance: tree.disturbance(),
            sensors: (0..agents).map(|a| tree.sensor(a)).collect(),
            formation: (0..agents).map(|a| tree.formation(a)).collect(),
        }
    }
}

/// Truth integrator with a piecewise-constant disturbance force.
struct Truth {
    state: PayloadState,
    time: f64,
    force: Vec3,
    next_resample: f64,
}

impl Truth {
    fn advance(&mut self, cfg: &SimConfig, u: &ControlInput, substeps: u32, rng: &mut StreamRng) {
        let h = 1.0 / cfg.physics.hz();
        for _ in 0..substeps {
            if self.time >= self.next_resample - 1e-9 {
                self.force = sample_disturbance(rng, &cfg.disturbance);
                self.next_resample += cfg.disturbance.hold_interval;
            }
            self.state = step_truth(&self.state, u, &self.force, cfg.disturbance.payload_mass, h);
            self.time += h;
        }
    }
}

fn quad_poses(cfg: &SimConfig, truth: &PayloadState, streams: &mut Streams) -> Vec<QuadPose> {
    (0..cfg.agents)
        .map(|a| {
            let mut pose = cfg.formation.quad_pose(truth, a, cfg.agents);
            let rng = &mut streams.formation[a as usize];
            let jitter = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            pose.position += cfg.formation.jitter_sigma * jitter;
            pose
        })
        .collect()
}

pub fn run_episode(cfg: &SimConfig, seed: u64) -> EpisodeLog {
    run_episode_observed(cfg, seed, &mut ())
}

/// Runs one episode. The config is assumed validated.
pub fn run_episode_observed(cfg: &SimConfig, seed: u64, observer: &mut dyn TickObserver) -> EpisodeLog {
    let n = cfg.agents as usize;
    let dt = cfg.estimator_dt;
    let mut streams = Streams::new(seed, cfg.agents);
    let mut bus = Bus::new(cfg.agents, cfg.network.loss.clone(), cfg.network.latency_steps);
    if cfg.network.record {
        bus.enable_recording();
    }
    let mut agents: Vec<Agent> = (0..cfg.agents).map(|a| Agent::new(a, cfg.filter.clone())).collect();
    let mut truth = Truth {
        state: reference_state(&cfg.trajectory.sample(0.0)),
        time: 0.0,
        force: Vec3::zeros(),
        next_resample: 0.0,
    };
    let mut applied = ControlInput::zero();
    let mut filter_inputs = vec![ControlInput::zero(); n];
    let mut ticks = Vec::with_capacity(cfg.tick_count() as usize);
    let mut divergence = None;

    'ticks: for k in 0..cfg.tick_count() {
        let t = k as f64 * dt;
        if k > 0 {
            let substeps = cfg.physics.substeps(k, dt);
            truth.advance(cfg, &applied, substeps, &mut streams.disturbance);
        }
        let quads = quad_poses(cfg, &truth.state, &mut streams);

        let mut measurements = Vec::with_capacity(n);
        let mut own = Vec::with_capacity(n);
        for (a, agent) in agents.iter_mut().enumerate() {
            let step_result = (if k > 0 { agent.predict(&filter_inputs[a], dt) } else { Ok(()) })
                .and_then(|_| {
                    let z = sense(
                        &quads[a],
                        &truth.state,
                        &cfg.camera,
                        &cfg.sensor,
                        &mut streams.sensors[a],
                        a as u32,
                        t,
                    );
                    measurements.push(z);
                    agent.contribute(&z, k)
                });
            match step_result {
                Ok(c) => own.push(c),
                Err(e) => {
                    divergence = Some(Divergence {
                        step: k,
                        time: t,
                        agent: a as u32,
                        reason: e.to_string(),
                    });
                    break 'ticks;
                }
            }
        }
        for (a, c) in own.iter().enumerate() {
            if let Some(c) = c {
                bus.broadcast(
                    BusMessage {
                        sender: a as u32,
                        step: k,
                        contribution: c.clone(),
                        send_time: t,
                    },
                    t,
                );
            }
        }
        let mut records = Vec::with_capacity(n);
        for (a, agent) in agents.iter_mut().enumerate() {
            let mut contributions = bus.collect(a as u32, k);
            if let Some(c) = &own[a] {
                contributions.push(c.clone());
            }
            match agent.fuse(&contributions) {
                Ok(report) => {
                    let est = agent.estimate();
                    records.push(AgentRecord {
                        estimate: est.map(|(x, _)| *x),
                        covariance: est.map(|(_, p)| *p),
                        measured: measurements[a].is_valid(),
                        fused: report.fused,
                        rejected: report.rejected,
                        filter_input: filter_inputs[a],
                    });
                }
                Err(e) => {
                    divergence = Some(Divergence {
                        step: k,
                        time: t,
                        agent: a as u32,
                        reason: e.to_string(),
                    });
                    break 'ticks;
                }
            }
        }

        observer.on_tick(&TickView {
            step: k,
            time: t,
            truth: &truth.state,
            measurements: &measurements,
            quads: &quads,
            agents: &agents,
            filter_inputs: (k > 0).then_some(filter_inputs.as_slice()),
        });

        let command = command_reference(cfg, t);
        let feed_forward = ControlInput::new(command.linear_accel, command.angular_accel);
        match cfg.mode {
            Mode::Isolated => {
                filter_inputs.iter_mut().for_each(|u| *u = feed_forward);
                applied = if cfg.control.isolated_feedback {
                    compute_input(&truth.state, &command, &cfg.control.gains)
                } else {
                    feed_forward
                };
            }
            Mode::InLoop => {
                for (a, agent) in agents.iter().enumerate() {
                    filter_inputs[a] = match agent.estimate() {
                        Some((x, _)) => compute_input(x, &command, &cfg.control.gains),
                        None => feed_forward,
                    };
                }
                applied = match cfg.control.driver {
                    LoopDriver::Agent(a) => filter_inputs[a as usize],
                    LoopDriver::AgentMean => {
                        let sum = filter_inputs.iter().fold(ControlInput::zero(), |acc, u| {
                            ControlInput::new(acc.linear + u.linear, acc.angular + u.angular)
                        });
                        ControlInput::new(sum.linear / n as f64, sum.angular / n as f64)
                    }
                };
            }
        }

        ticks.push(TickRecord {
            step: k,
            time: t,
            truth: truth.state,
            command,
            applied,
            comms_active: cfg.network.loss.all_links_up(t),
            agents: records,
        });
    }

    EpisodeLog {
        seed,
        estimator_dt: dt,
        ticks,
        divergence,
        bus: bus.stats(),
        recording: bus.recording().map(<[u8]>::to_vec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::SensorNoise;

    fn short_config() -> SimConfig {
        SimConfig {
            duration: 12.0,
            ..Default::default()
        }
    }

    #[test]
    fn tick_count_and_monotone_time() {
        let log = run_episode(&short_config(), 3);
        assert!(!log.diverged());
        assert_eq!(log.ticks.len(), 240);
        assert!(log.ticks.windows(2).all(|w| w[1].time > w[0].time));
        assert!(log.ticks.iter().all(|t| t.agents.len() == 4));
    }

    #[test]
    fn same_seed_same_log() {
        let cfg = short_config();
        assert_eq!(run_episode(&cfg, 9), run_episode(&cfg, 9));
        assert_ne!(run_episode(&cfg, 9).ticks[100].truth, run_episode(&cfg, 10).ticks[100].truth);
    }

    #[test]
    fn noiseless_estimates_match_truth() {
        let mut cfg = short_config();
        cfg.sensor = SensorNoise::noiseless();
        cfg.disturbance.sigma_force = 0.0;
        let log = run_episode(&cfg, 1);
        for tick in &log.ticks {
            for a in &tick.agents {
                let err = (a.estimate.unwrap().position - tick.truth.position).norm();
                assert!(err < 1e-6, "t={} err={err}", tick.time);
            }
        }
    }

    #[test]
    fn strict_physics_runs() {
        let mut cfg = short_config();
        cfg.physics = super::super::config::PhysicsRate::Strict250;
        let log = run_episode(&cfg, 2);
        assert!(!log.diverged());
    }
}
