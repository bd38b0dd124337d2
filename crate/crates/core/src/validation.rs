//! Quick self-checks behind the `validate` command: algebraic oracles and
//! property spot checks that run in a few seconds.

use crate::dynamics::{ControlInput, PayloadState};
use crate::estimator::model::{process_jacobian, transition_raw, NoiseConfig};
use crate::estimator::{ekf_oracle_step, fuse, Contribution, Matrix13};
use crate::geometry::{EulerAngles, Quaternion, Vec3};
use crate::harness::episode::{run_episode, run_episode_observed, TickObserver, TickView};
use crate::harness::{Scenario, SimConfig};
use crate::sensor::{compose_measurement, true_tag_in_camera, visible, PoseFix, SensorNoise};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

struct Shadow {
    noise: NoiseConfig,
    dt: f64,
    state: Option<(PayloadState, Matrix13)>,
    worst: f64,
    identical: bool,
    failed: Option<String>,
}

impl TickObserver for Shadow {
    fn on_tick(&mut self, view: &TickView<'_>) {
        let first = view.agents[0].information();
        self.identical &= view.agents.iter().all(|a| a.information() == first);
        let Some((xa, pa)) = view.agents[0].estimate() else {
            return;
        };
        let Some((x, p)) = &self.state else {
            self.state = Some((*xa, *pa));
            return;
        };
        let fixes: Vec<PoseFix> = view.measurements.iter().filter_map(|m| m.fix).collect();
        let u = view.filter_inputs.map_or(ControlInput::zero(), |u| u[0]);
        match ekf_oracle_step(x, p, &u, &fixes, &self.noise, self.dt) {
            Ok((xn, pn)) => {
                self.worst = self
                    .worst
                    .max((xn.to_vector() - xa.to_vector()).amax())
                    .max((pn - pa).amax());
                self.state = Some((xn, pn));
            }
            Err(e) => self.failed = Some(e.to_string()),
        }
    }
}

fn filter_matches_ekf(agents: u32, tol: f64) -> (bool, String) {
    let cfg = SimConfig {
        agents,
        duration: 30.0,
        ..Scenario::Pirouette.config()
    };
    let mut shadow = Shadow {
        noise: cfg.filter.clone(),
        dt: cfg.estimator_dt,
        state: None,
        worst: 0.0,
        identical: true,
        failed: None,
    };
    let log = run_episode_observed(&cfg, 1, &mut shadow);
    let ok = shadow.failed.is_none() && !log.diverged() && shadow.identical && shadow.worst < tol;
    (ok, format!("max difference {:.2e} over {} ticks", shadow.worst, log.ticks.len()))
}

fn sensor_round_trip() -> (bool, String) {
    let cfg = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 200 {
        let payload = PayloadState {
            position: Vec3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), -3.0),
            attitude: Quaternion::from_euler(EulerAngles::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-3.0..3.0),
            )),
            ..Default::default()
        };
        let agent = rng.random_range(0..4);
        let quad = cfg.formation.quad_pose(&payload, agent, 4);
        let obs = true_tag_in_camera(&quad, &payload, &cfg.camera);
        if !visible(&obs.d_c, &cfg.camera) {
            continue;
        }
        let fix = compose_measurement(&obs, &quad, &cfg.camera, &SensorNoise::noiseless(), &mut rng, agent, 0.0)
            .expect("visible")
            .fix
            .expect("fix");
        worst = worst
            .max((fix.position - payload.position).norm())
            .max(fix.attitude.distance(&payload.attitude));
        n += 1;
    }
    (worst < 1e-10, format!("worst pose error {worst:.2e} over {n} configurations"))
}

fn jacobian_vs_differences() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = PayloadState {
            position: Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0)),
            attitude: Quaternion::from_euler(EulerAngles::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-3.0..3.0),
            )),
            velocity: Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
            rates: Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
        };
        let u = ControlInput::new(
            Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0)),
            Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0)),
        );
        let f = process_jacobian(&x, &u, 0.05);
        let v = x.to_vector();
        for j in 0..13 {
            let (mut a, mut b) = (v, v);
            a[j] += 1e-6;
            b[j] -= 1e-6;
            let col = (transition_raw(&PayloadState::from_vector(&a), &u, 0.05)
                - transition_raw(&PayloadState::from_vector(&b), &u, 0.05))
                / 2e-6;
            worst = worst.max((col - f.column(j)).amax());
        }
    }
    (worst < 1e-6, format!("worst entry difference {worst:.2e}"))
}

fn fusion_order() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let prior = crate::estimator::to_information(&PayloadState::default(), &Matrix13::identity()).expect("identity");
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut cs: Vec<Contribution> = (0..5)
            .map(|a| {
                let l = crate::dynamics::StateVector::from_fn(|_, _| rng.random_range(-1.0..1.0));
                Contribution {
                    agent: a,
                    step: 0,
                    i: crate::dynamics::StateVector::from_fn(|_, _| rng.random_range(-3.0..3.0)),
                    matrix: l * l.transpose(),
                }
            })
            .collect();
        let a = fuse(&prior, &cs).pair;
        cs.reverse();
        cs.swap(0, 2);
        let b = fuse(&prior, &cs).pair;
        worst = worst.max((a.y - b.y).amax()).max((a.matrix - b.matrix).amax());
    }
    (worst < 1e-12, format!("worst difference {worst:.2e}"))
}

fn determinism() -> (bool, String) {
    let cfg = SimConfig {
        duration: 15.0,
        ..Scenario::LissajousCommloss.config()
    };
    let same = run_episode(&cfg, 3) == run_episode(&cfg, 3);
    (same, format!("repeat run identical = {same}"))
}

pub fn run_validation() -> Vec<Check> {
    let (a, b) = filter_matches_ekf(1, 1e-9);
    let (c, d) = filter_matches_ekf(4, 1e-8);
    let (e, f) = sensor_round_trip();
    let (g, h) = jacobian_vs_differences();
    let (i, j) = fusion_order();
    let (k, l) = determinism();
    vec![
        check("information filter equals EKF (1 agent)", a, b),
        check("distributed fusion equals centralized EKF (4 agents)", c, d),
        check("noiseless sensor chain round trip", e, f),
        check("process Jacobian vs finite differences", g, h),
        check("fusion order independence", i, j),
        check("episode determinism", k, l),
    ]
}
