//! Ego control policies.
//!
//! White-box policies are registered control laws. Grey-box policies pair a
//! declared law with a bounded unknown additive term. Black-box policies are
//! opaque callables; they can be simulated but expose no output envelope.
//! Every policy output is clipped to the ego's control box, and longitudinal
//! laws never command a deceleration that would reverse the ego within one
//! step.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::interval::{IBox, Interval};

/// What the ego perceives at a decision instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: f64,
    /// Decision period.
    pub h: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub lane_offset: f64,
    /// Bumper gap and speed of the nearest in-lane agent ahead.
    pub lead: Option<(f64, f64)>,
}

/// Interval version of the longitudinal observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsBox {
    pub h: f64,
    pub v: Interval,
    pub lead: Option<(Interval, Interval)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub u: Vec<f64>,
    /// The policy reports its declared emergency strategy as active.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlLaw {
    /// No input.
    Zero,
    /// Full braking to standstill; this is the declared emergency strategy,
    /// so it always reports fallback.
    Brake { decel: f64 },
    /// Proportional speed tracking.
    Cruise { v_ref: f64, gain: f64 },
    /// Time-gap following with an emergency-brake fallback.
    Acc {
        v_ref: f64,
        time_gap: f64,
        standstill: f64,
        gain_gap: f64,
        gain_speed: f64,
        gain_cruise: f64,
        brake_decel: f64,
    },
    /// Speed tracking plus lateral and heading feedback to the lane center.
    LaneKeep { v_ref: f64, gain_speed: f64, k_lat: f64, k_head: f64 },
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// `max(a, -max(v, 0)/h)`.
fn no_reverse(a: f64, v: f64, h: f64) -> f64 {
    a.max(-pos(v) / h)
}

fn no_reverse_interval(a: Interval, v: Interval, h: f64) -> Interval {
    // increasing in a, decreasing in v
    Interval::new(a.lo.max(-pos(v.hi) / h), a.hi.max(-pos(v.lo) / h))
}

impl ControlLaw {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("`{name}` must be positive, got {v}"))
            }
        };
        match *self {
            ControlLaw::Zero => Ok(()),
            ControlLaw::Brake { decel } => positive("decel", decel),
            ControlLaw::Cruise { gain, .. } => positive("gain", gain),
            ControlLaw::Acc { time_gap, brake_decel, gain_cruise, .. } => {
                positive("brake_decel", brake_decel)?;
                positive("gain_cruise", gain_cruise)?;
                if time_gap < 0.0 {
                    return Err("`time_gap` must be nonnegative".into());
                }
                Ok(())
            }
            ControlLaw::LaneKeep { gain_speed, .. } => positive("gain_speed", gain_speed),
        }
    }

    pub fn is_lateral(&self) -> bool {
        matches!(self, ControlLaw::LaneKeep { .. })
    }

    /// Whether the emergency branch of the following law is active.
    fn acc_emergency(v: f64, gap: f64, v_lead: f64, brake: f64, h: f64) -> bool {
        let need = (pos(v) * pos(v) - pos(v_lead) * pos(v_lead)) / (2.0 * brake);
        gap <= need + pos(v) * h
    }

    /// Longitudinal acceleration and fallback flag.
    fn accel(&self, obs: &Observation) -> (f64, bool) {
        let (v, h) = (obs.v, obs.h);
        match *self {
            ControlLaw::Zero => (0.0, false),
            ControlLaw::Brake { decel } => (-(decel.min(pos(v) / h)), true),
            ControlLaw::Cruise { v_ref, gain } => (no_reverse(gain * (v_ref - v), v, h), false),
            ControlLaw::Acc { v_ref, time_gap, standstill, gain_gap, gain_speed, gain_cruise, brake_decel } => {
                let cruise = gain_cruise * (v_ref - v);
                match obs.lead {
                    None => (no_reverse(cruise, v, h), false),
                    Some((gap, vl)) => {
                        if Self::acc_emergency(v, gap, vl, brake_decel, h) {
                            (-(brake_decel.min(pos(v) / h)), true)
                        } else {
                            let follow = gain_gap * (gap - standstill - time_gap * v) + gain_speed * (vl - v);
                            (no_reverse(cruise.min(follow), v, h), false)
                        }
                    }
                }
            }
            ControlLaw::LaneKeep { v_ref, gain_speed, .. } => (no_reverse(gain_speed * (v_ref - v), v, h), false),
        }
    }

    /// Control vector of dimension `u_dim` (acceleration, then steering).
    pub fn act(&self, obs: &Observation, u_dim: usize) -> Action {
        let (a, fallback) = self.accel(obs);
        let mut u = vec![a];
        if u_dim > 1 {
            let steer = match *self {
                ControlLaw::LaneKeep { k_lat, k_head, .. } => -k_lat * obs.lane_offset - k_head * obs.heading,
                _ => 0.0,
            };
            u.push(steer);
        }
        Action { u, fallback }
    }

    /// Enclosure of the acceleration over every observation in `ob`.
    pub fn accel_envelope(&self, ob: &ObsBox) -> Interval {
        let (v, h) = (ob.v, ob.h);
        let brake = |decel: f64| {
            // -(min(decel, v⁺/h)) is decreasing in v
            Interval::new(-(decel.min(pos(v.hi) / h)), -(decel.min(pos(v.lo) / h)))
        };
        match *self {
            ControlLaw::Zero => Interval::point(0.0),
            ControlLaw::Brake { decel } => brake(decel),
            ControlLaw::Cruise { v_ref, gain } | ControlLaw::LaneKeep { v_ref, gain_speed: gain, .. } => {
                no_reverse_interval((Interval::point(v_ref) - v).scale(gain), v, h)
            }
            ControlLaw::Acc { v_ref, time_gap, standstill, gain_gap, gain_speed, gain_cruise, brake_decel } => {
                let cruise = (Interval::point(v_ref) - v).scale(gain_cruise);
                let Some((gap, vl)) = ob.lead else {
                    return no_reverse_interval(cruise, v, h);
                };
                let follow = (gap + (-standstill) - v.scale(time_gap)).scale(gain_gap) + (vl - v).scale(gain_speed);
                let nominal = no_reverse_interval(cruise.min(&follow), v, h);
                // emergency iff gap <= need(v, vl) + v⁺h; need grows with v, shrinks with vl
                let need = |v: f64, vl: f64| (pos(v) * pos(v) - pos(vl) * pos(vl)) / (2.0 * brake_decel) + pos(v) * h;
                let surely = gap.hi <= need(v.lo, vl.hi);
                let never = gap.lo > need(v.hi, vl.lo);
                match (surely, never) {
                    (true, _) => brake(brake_decel),
                    (_, true) => nominal,
                    _ => nominal.hull(&brake(brake_decel)),
                }
            }
        }
    }
}

/// How the grey-box unknown term is realized in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermRealization {
    /// The center of the term box.
    Center,
    /// Uniform in the box, redrawn at every decision step from the episode seed.
    Random,
}

type BlackBoxFn = dyn Fn(&Observation, &mut dyn RngCore) -> Vec<f64> + Send + Sync;

/// Opaque policy; only its outputs are observable.
#[derive(Clone)]
pub struct BlackBox {
    f: Arc<BlackBoxFn>,
    description: String,
}

impl fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBox").field("description", &self.description).finish()
    }
}

impl BlackBox {
    pub fn new<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Observation, &mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { f: Arc::new(f), description: description.into() }
    }

    /// A law whose acceleration is perturbed by uniform noise of amplitude
    /// `noise`, hidden behind the black-box interface.
    pub fn noisy(law: ControlLaw, noise: f64) -> Self {
        let desc = format!("{law:?} with noise {noise}");
        Self::new(desc, move |obs, rng| {
            let mut u = law.act(obs, if law.is_lateral() { 2 } else { 1 }).u;
            if noise > 0.0 {
                u[0] += rng.gen_range(-noise..=noise);
            }
            u
        })
    }

    pub fn description(&self) -> &str {
        &self.description
    }
}

#[derive(Debug, Clone)]
pub enum PolicyKind {
    WhiteBox(ControlLaw),
    GreyBox { structure: ControlLaw, term: IBox, realization: TermRealization },
    BlackBox(BlackBox),
}

#[derive(Debug, Clone)]
pub struct Policy {
    pub name: String,
    pub kind: PolicyKind,
}

impl Policy {
    pub fn white_box(name: impl Into<String>, law: ControlLaw) -> Self {
        Self { name: name.into(), kind: PolicyKind::WhiteBox(law) }
    }

    pub fn grey_box(name: impl Into<String>, structure: ControlLaw, term: IBox, realization: TermRealization) -> Self {
        Self { name: name.into(), kind: PolicyKind::GreyBox { structure, term, realization } }
    }

    pub fn black_box(name: impl Into<String>, bb: BlackBox) -> Self {
        Self { name: name.into(), kind: PolicyKind::BlackBox(bb) }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            PolicyKind::WhiteBox(_) => "white_box",
            PolicyKind::GreyBox { .. } => "grey_box",
            PolicyKind::BlackBox(_) => "black_box",
        }
    }

    /// White- and grey-box policies admit set propagation.
    pub fn is_transparent(&self) -> bool {
        !matches!(self.kind, PolicyKind::BlackBox(_))
    }

    pub fn law(&self) -> Option<&ControlLaw> {
        match &self.kind {
            PolicyKind::WhiteBox(l) | PolicyKind::GreyBox { structure: l, .. } => Some(l),
            PolicyKind::BlackBox(_) => None,
        }
    }

    pub fn validate(&self, u_box: &IBox) -> Result<(), SimError> {
        let bad = |m: String| SimError::Policy(format!("policy `{}`: {m}", self.name));
        if let Some(l) = self.law() {
            l.validate().map_err(bad)?;
            if l.is_lateral() && u_box.dim() < 2 {
                return Err(bad("lane keeping needs a steering input".into()));
            }
        }
        if let PolicyKind::GreyBox { term, .. } = &self.kind {
            if term.dim() != u_box.dim() || !term.is_bounded() {
                return Err(bad(format!("term box needs {} bounded dimension(s)", u_box.dim())));
            }
        }
        Ok(())
    }

    /// Per-episode controller; `seed` drives any internal randomness.
    pub fn controller(&self, u_box: &IBox, seed: u64) -> Controller {
        Controller { policy: self.clone(), u_box: u_box.clone(), rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_9011c7) }
    }

    /// Enclosure of the clipped acceleration output over `ob`.
    pub fn accel_envelope(&self, ob: &ObsBox, u_box: &IBox) -> Result<Interval, SimError> {
        let env = match &self.kind {
            PolicyKind::WhiteBox(l) => l.accel_envelope(ob),
            PolicyKind::GreyBox { structure, term, .. } => structure.accel_envelope(ob) + term.0[0],
            PolicyKind::BlackBox(_) => return Err(SimError::Opaque(self.name.clone())),
        };
        let a = u_box.0[0];
        Ok(env.clamp(a.lo, a.hi))
    }
}

pub struct Controller {
    policy: Policy,
    u_box: IBox,
    rng: ChaCha8Rng,
}

impl Controller {
    pub fn act(&mut self, obs: &Observation) -> Action {
        let dim = self.u_box.dim();
        let mut action = match &self.policy.kind {
            PolicyKind::WhiteBox(l) => l.act(obs, dim),
            PolicyKind::GreyBox { structure, term, realization } => {
                let mut a = structure.act(obs, dim);
                for (ui, ti) in a.u.iter_mut().zip(&term.0) {
                    *ui += match realization {
                        TermRealization::Center => ti.mid(),
                        TermRealization::Random if ti.width() > 0.0 => self.rng.gen_range(ti.lo..=ti.hi),
                        TermRealization::Random => ti.lo,
                    };
                }
                a
            }
            PolicyKind::BlackBox(bb) => {
                let mut u = (bb.f)(obs, &mut self.rng);
                u.resize(dim, 0.0);
                Action { u, fallback: false }
            }
        };
        for (ui, b) in action.u.iter_mut().zip(&self.u_box.0) {
            *ui = if ui.is_nan() { b.mid() } else { ui.clamp(b.lo, b.hi) };
        }
        action
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(v: f64, lead: Option<(f64, f64)>) -> Observation {
        Observation { t: 0.0, h: 0.05, x: 0.0, y: 0.0, heading: 0.0, v, lane_offset: 0.0, lead }
    }

    #[test]
    fn brake_stops_without_reversing() {
        let law = ControlLaw::Brake { decel: 5.0 };
        assert_eq!(law.act(&obs(10.0, None), 1).u, vec![-5.0]);
        assert!((law.act(&obs(0.1, None), 1).u[0] + 2.0).abs() < 1e-12);
        assert_eq!(law.act(&obs(0.0, None), 1).u, vec![0.0]);
        assert!(law.act(&obs(0.0, None), 1).fallback);
    }

    #[test]
    fn clipping_to_u_box() {
        let p = Policy::white_box("cruise", ControlLaw::Cruise { v_ref: 30.0, gain: 10.0 });
        let ub = IBox::from_bounds(&[-6.0], &[2.0]);
        let mut c = p.controller(&ub, 1);
        assert_eq!(c.act(&obs(10.0, None)).u, vec![2.0]);
        let g = Policy::grey_box(
            "g",
            ControlLaw::Zero,
            IBox::from_bounds(&[-10.0], &[10.0]),
            TermRealization::Random,
        );
        let mut c = g.controller(&ub, 3);
        for _ in 0..100 {
            let a = c.act(&obs(10.0, None)).u[0];
            assert!((-6.0..=2.0).contains(&a));
        }
    }

    #[test]
    fn envelopes_contain_outputs() {
        let laws = [
            ControlLaw::Zero,
            ControlLaw::Brake { decel: 5.0 },
            ControlLaw::Cruise { v_ref: 12.0, gain: 0.8 },
            ControlLaw::Acc {
                v_ref: 15.0,
                time_gap: 1.5,
                standstill: 2.0,
                gain_gap: 0.3,
                gain_speed: 0.8,
                gain_cruise: 0.5,
                brake_decel: 6.0,
            },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for law in &laws {
            for _ in 0..300 {
                let v0 = rng.gen_range(-1.0..20.0);
                let g0 = rng.gen_range(0.0..40.0);
                let l0 = rng.gen_range(0.0..20.0);
                let ob = ObsBox {
                    h: 0.05,
                    v: Interval::new(v0, v0 + 1.0),
                    lead: Some((Interval::new(g0, g0 + 2.0), Interval::new(l0, l0 + 0.5))),
                };
                let env = law.accel_envelope(&ob);
                for _ in 0..20 {
                    let o = obs(rng.gen_range(v0..=v0 + 1.0), Some((rng.gen_range(g0..=g0 + 2.0), rng.gen_range(l0..=l0 + 0.5))));
                    let a = law.act(&o, 1).u[0];
                    assert!(env.inflate(1e-9).contains(a), "{law:?}: {a} outside {env}");
                }
            }
        }
    }

    #[test]
    fn black_box_is_opaque() {
        let p = Policy::black_box("bb", BlackBox::noisy(ControlLaw::Zero, 0.5));
        let ob = ObsBox { h: 0.1, v: Interval::point(1.0), lead: None };
        assert!(matches!(p.accel_envelope(&ob, &IBox::from_bounds(&[-1.0], &[1.0])), Err(SimError::Opaque(_))));
        let mut a = p.controller(&IBox::from_bounds(&[-1.0], &[1.0]), 9);
        let mut b = p.controller(&IBox::from_bounds(&[-1.0], &[1.0]), 9);
        assert_eq!(a.act(&obs(1.0, None)), b.act(&obs(1.0, None)));
    }
}
