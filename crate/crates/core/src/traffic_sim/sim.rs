//! Fixed-step roll-out with sample-and-hold inputs.
//!
//! The longitudinal ego and the agents advance by the exact zero-order-hold
//! solution of their double-integrator dynamics (agents stop instead of
//! reversing); the bicycle ego takes an explicit Euler step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::episode::{AccelProfile, Behavior, EgoModel, EpisodeConfig, Footprint};
use super::policy::{Observation, Policy};
use super::SimError;
use crate::stl::Signal;

/// Clearance reported when there are no agents or no lead.
pub const FAR: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// Footprints overlapped; the state is frozen from then on.
    Collision,
    /// The ego left the simulation domain; the signal stops there.
    Truncated,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub signal: Signal,
    /// `controls[k]` is held on `[t_k, t_{k+1})`.
    pub controls: Vec<Vec<f64>>,
    pub fallback: Vec<bool>,
    pub seed: u64,
    pub policy: String,
    pub termination: Termination,
    pub collision_index: Option<usize>,
}

impl Episode {
    pub fn collided(&self) -> bool {
        self.collision_index.is_some()
    }

    pub fn truncated(&self) -> bool {
        self.termination == Termination::Truncated
    }

    /// Whether the declared fallback was active on the step into sample `k`.
    pub fn fallback_before(&self, k: usize) -> bool {
        k > 0 && self.fallback.get(k - 1).copied().unwrap_or(false)
    }
}

/// Signal channel names for a configuration. `fallback` is 1 while the
/// policy reports its declared emergency strategy.
pub fn channel_names(cfg: &EpisodeConfig) -> Vec<String> {
    let mut c: Vec<String> = ["ego.x", "ego.y", "ego.heading", "ego.v"].iter().map(|s| s.to_string()).collect();
    for i in 0..cfg.agents.len() {
        for f in ["x", "y", "v"] {
            c.push(format!("agent{i}.{f}"));
        }
    }
    c.extend(["clearance", "lane_margin", "lane_offset", "gap", "fallback"].iter().map(|s| s.to_string()));
    c
}

/// Half extents of a footprint rotated by `heading`.
fn half_extents(fp: &Footprint, heading: f64) -> (f64, f64) {
    let (s, c) = heading.sin_cos();
    let (l, w) = (fp.length / 2.0, fp.width / 2.0);
    (l * c.abs() + w * s.abs(), l * s.abs() + w * c.abs())
}

/// Signed distance between two axis-aligned boxes given centre and half
/// extents; negative is penetration depth along the shallower axis.
pub fn aabb_clearance(a: (f64, f64), ha: (f64, f64), b: (f64, f64), hb: (f64, f64)) -> f64 {
    let dx = (a.0 - b.0).abs() - (ha.0 + hb.0);
    let dy = (a.1 - b.1).abs() - (ha.1 + hb.1);
    if dx < 0.0 && dy < 0.0 {
        dx.max(dy)
    } else {
        dx.max(0.0).hypot(dy.max(0.0))
    }
}

#[derive(Debug, Clone, Copy)]
struct Agent {
    x: f64,
    y: f64,
    v: f64,
}

struct AgentDriver {
    accel: f64,
    next_draw: usize,
    rng: ChaCha8Rng,
}

impl AgentDriver {
    fn new(seed: u64, index: usize) -> Self {
        let stream = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(index as u64 + 1);
        Self { accel: 0.0, next_draw: 0, rng: ChaCha8Rng::seed_from_u64(stream) }
    }

    fn accel(&mut self, b: &Behavior, k: usize, h: f64) -> f64 {
        match b {
            Behavior::ConstantVelocity => 0.0,
            Behavior::BoundedAccel { lo, hi, profile } => match profile {
                AccelProfile::Constant { accel } => accel.clamp(*lo, *hi),
                AccelProfile::Random { hold } => {
                    if k >= self.next_draw {
                        self.accel = if hi > lo { self.rng.gen_range(*lo..=*hi) } else { *lo };
                        self.next_draw = k + ((hold / h).round() as usize).max(1);
                    }
                    self.accel
                }
            },
        }
    }
}

struct Frame<'a> {
    cfg: &'a EpisodeConfig,
    ego: Vec<f64>,
    agents: Vec<Agent>,
}

impl Frame<'_> {
    fn pose(&self) -> (f64, f64, f64, f64) {
        match self.cfg.ego.model {
            EgoModel::Longitudinal => (self.ego[0], self.cfg.ego.y, 0.0, self.ego[1]),
            EgoModel::KinematicBicycle { .. } => (self.ego[0], self.ego[1], self.ego[2], self.ego[3]),
        }
    }

    fn lead(&self) -> Option<(f64, f64)> {
        let (x, y, th, _) = self.pose();
        let he = half_extents(&self.cfg.ego.footprint, th);
        self.agents
            .iter()
            .zip(&self.cfg.agents)
            .filter(|(a, c)| a.x > x && (a.y - y).abs() < he.1 + c.footprint.width / 2.0)
            .map(|(a, c)| (a.x - x - he.0 - c.footprint.length / 2.0, a.v))
            .min_by(|p, q| p.0.total_cmp(&q.0))
    }

    fn clearance(&self) -> f64 {
        let (x, y, th, _) = self.pose();
        let he = half_extents(&self.cfg.ego.footprint, th);
        self.agents
            .iter()
            .zip(&self.cfg.agents)
            .map(|(a, c)| aabb_clearance((x, y), he, (a.x, a.y), half_extents(&c.footprint, 0.0)))
            .fold(FAR, f64::min)
    }

    fn observe(&self, t: f64) -> Observation {
        let (x, y, heading, v) = self.pose();
        Observation { t, h: self.cfg.step, x, y, heading, v, lane_offset: y - self.cfg.lane.center, lead: self.lead() }
    }

    fn row(&self) -> Vec<f64> {
        let (x, y, th, v) = self.pose();
        let mut r = vec![x, y, th, v];
        for a in &self.agents {
            r.extend([a.x, a.y, a.v]);
        }
        let hy = half_extents(&self.cfg.ego.footprint, th).1;
        let offset = y - self.cfg.lane.center;
        r.push(self.clearance());
        r.push(self.cfg.lane.width / 2.0 - (offset.abs() + hy));
        r.push(offset);
        r.push(self.lead().map_or(FAR, |l| l.0));
        r.push(0.0);
        r
    }

    fn in_domain(&self) -> bool {
        let (x, y, _, _) = self.pose();
        let d = &self.cfg.domain;
        x >= d.x.0 && x <= d.x.1 && y >= d.y.0 && y <= d.y.1
    }

    fn advance(&mut self, u: &[f64], accels: &[f64]) {
        let h = self.cfg.step;
        match self.cfg.ego.model {
            EgoModel::Longitudinal => {
                let (x, v) = (self.ego[0], self.ego[1]);
                self.ego = vec![x + h * v + 0.5 * h * h * u[0], v + h * u[0]];
            }
            EgoModel::KinematicBicycle { wheelbase } => {
                let (th, v) = (self.ego[2], self.ego[3]);
                self.ego[0] += h * v * th.cos();
                self.ego[1] += h * v * th.sin();
                self.ego[2] += h * v * u[1].tan() / wheelbase;
                self.ego[3] += h * u[0];
            }
        }
        for (a, &acc) in self.agents.iter_mut().zip(accels) {
            a.x += agent_displacement(a.v, acc, h);
            a.v = (a.v + h * acc).max(0.0);
        }
    }
}

/// Distance an agent at speed `v ≥ 0` covers in `h` seconds at constant
/// acceleration `a`, stopping at zero speed. Nondecreasing in `v` and `a`.
pub fn agent_displacement(v: f64, a: f64, h: f64) -> f64 {
    if v + a * h >= 0.0 {
        v * h + 0.5 * a * h * h
    } else {
        -v * v / (2.0 * a)
    }
}

/// Simulate one episode of `policy` from `cfg`.
pub fn roll_out(cfg: &EpisodeConfig, policy: &Policy) -> Result<Episode, SimError> {
    cfg.validate()?;
    let u_box = cfg.ego.u_box();
    policy.validate(&u_box)?;
    let laterals = policy.law().is_some_and(|l| l.is_lateral());
    if laterals && cfg.ego.is_longitudinal() {
        return Err(SimError::Config(format!("policy `{}` steers but the ego is longitudinal", policy.name)));
    }
    let e = &cfg.ego;
    let ego = match e.model {
        EgoModel::Longitudinal => vec![e.x, e.v],
        EgoModel::KinematicBicycle { .. } => vec![e.x, e.y, e.heading, e.v],
    };
    let agents = cfg.agents.iter().map(|a| Agent { x: a.x, y: a.y, v: a.v.max(0.0) }).collect();
    let mut frame = Frame { cfg, ego, agents };
    let mut drivers: Vec<AgentDriver> = (0..cfg.agents.len()).map(|i| AgentDriver::new(cfg.seed, i)).collect();
    let mut controller = policy.controller(&u_box, cfg.seed);

    let n = cfg.samples() - 1;
    let h = cfg.step;
    let mut times = Vec::with_capacity(n + 1);
    let mut rows = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    let mut fallback = Vec::with_capacity(n);
    let mut termination = Termination::Completed;
    let mut collision_index = None;

    for k in 0..=n {
        let t = k as f64 * h;
        let row = frame.row();
        let clearance = row[row.len() - 5];
        times.push(t);
        rows.push(row);
        if !frame.in_domain() {
            termination = Termination::Truncated;
            break;
        }
        if clearance < 0.0 {
            termination = Termination::Collision;
            collision_index = Some(k);
            let last = rows[k].clone();
            for j in k + 1..=n {
                times.push(j as f64 * h);
                rows.push(last.clone());
            }
            break;
        }
        if k == n {
            break;
        }
        let action = controller.act(&frame.observe(t));
        let accels: Vec<f64> = drivers.iter_mut().zip(&cfg.agents).map(|(d, a)| d.accel(&a.behavior, k, h)).collect();
        frame.advance(&action.u, &accels);
        controls.push(action.u);
        fallback.push(action.fallback);
    }

    // fallback channel: flag of the action decided at each sample, held
    // after the last decision
    let mut flag = 0.0;
    for (k, row) in rows.iter_mut().enumerate() {
        if let Some(&f) = fallback.get(k) {
            flag = f64::from(u8::from(f));
        }
        *row.last_mut().unwrap() = flag;
    }
    let signal = Signal::new(channel_names(cfg), times, rows)?;
    Ok(Episode {
        signal,
        controls,
        fallback,
        seed: cfg.seed,
        policy: policy.name.clone(),
        termination,
        collision_index,
    })
}
