//! Episode configuration and the scenario-to-model binding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::interval::IBox;
use crate::scenario_space::{Scenario, ScenarioSpace};

pub const MAX_AGENTS: usize = 4;
pub const MAX_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum EgoModel {
    /// Double integrator along the lane; lateral position fixed.
    Longitudinal,
    KinematicBicycle { wheelbase: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Footprint {
    pub length: f64,
    pub width: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Self { length: 4.5, width: 1.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEgo")]
pub struct EgoConfig {
    #[serde(flatten)]
    pub model: EgoModel,
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub footprint: Footprint,
    /// Acceleration bounds `[lo, hi]`.
    pub accel: (f64, f64),
    /// Steering bounds, bicycle only.
    #[serde(default)]
    pub steer: Option<(f64, f64)>,
}

impl EgoConfig {
    pub fn u_box(&self) -> IBox {
        let mut lo = vec![self.accel.0];
        let mut hi = vec![self.accel.1];
        if let (EgoModel::KinematicBicycle { .. }, Some((a, b))) = (&self.model, self.steer) {
            lo.push(a);
            hi.push(b);
        }
        IBox::from_bounds(&lo, &hi)
    }

    pub fn is_longitudinal(&self) -> bool {
        matches!(self.model, EgoModel::Longitudinal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AccelProfile {
    Constant { accel: f64 },
    /// Uniform in the bounds, redrawn every `hold` seconds from the seed.
    Random { hold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "behavior", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    ConstantVelocity,
    BoundedAccel { lo: f64, hi: f64, profile: AccelProfile },
}

impl Behavior {
    /// Acceleration box the agent may use.
    pub fn d_box(&self) -> (f64, f64) {
        match *self {
            Behavior::ConstantVelocity => (0.0, 0.0),
            Behavior::BoundedAccel { lo, hi, .. } => (lo, hi),
        }
    }
}

/// Agent driving along the x axis at fixed lateral position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAgent")]
pub struct AgentConfig {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub footprint: Footprint,
    #[serde(flatten)]
    pub behavior: Behavior,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelName {
    Longitudinal,
    KinematicBicycle,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum BehaviorName {
    ConstantVelocity,
    BoundedAccel,
}

// Tag and payload as plain fields so unknown keys stay an error; serde
// cannot combine `flatten` with `deny_unknown_fields`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEgo {
    model: ModelName,
    wheelbase: Option<f64>,
    #[serde(default)]
    x: f64,
    #[serde(default)]
    y: f64,
    #[serde(default)]
    heading: f64,
    #[serde(default)]
    v: f64,
    #[serde(default)]
    footprint: Footprint,
    accel: (f64, f64),
    #[serde(default)]
    steer: Option<(f64, f64)>,
}

impl TryFrom<RawEgo> for EgoConfig {
    type Error = String;
    fn try_from(r: RawEgo) -> Result<Self, String> {
        let model = match (r.model, r.wheelbase) {
            (ModelName::Longitudinal, None) => EgoModel::Longitudinal,
            (ModelName::Longitudinal, Some(_)) => return Err("`wheelbase` applies to the kinematic bicycle only".into()),
            (ModelName::KinematicBicycle, Some(wheelbase)) => EgoModel::KinematicBicycle { wheelbase },
            (ModelName::KinematicBicycle, None) => return Err("kinematic bicycle needs `wheelbase`".into()),
        };
        Ok(Self { model, x: r.x, y: r.y, heading: r.heading, v: r.v, footprint: r.footprint, accel: r.accel, steer: r.steer })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    #[serde(default)]
    x: f64,
    #[serde(default)]
    y: f64,
    #[serde(default)]
    v: f64,
    #[serde(default)]
    footprint: Footprint,
    behavior: BehaviorName,
    lo: Option<f64>,
    hi: Option<f64>,
    profile: Option<AccelProfile>,
}

impl TryFrom<RawAgent> for AgentConfig {
    type Error = String;
    fn try_from(r: RawAgent) -> Result<Self, String> {
        let behavior = match (r.behavior, r.lo, r.hi, r.profile) {
            (BehaviorName::ConstantVelocity, None, None, None) => Behavior::ConstantVelocity,
            (BehaviorName::ConstantVelocity, ..) => {
                return Err("constant_velocity agents take no `lo`, `hi` or `profile`".into())
            }
            (BehaviorName::BoundedAccel, Some(lo), Some(hi), Some(profile)) => Behavior::BoundedAccel { lo, hi, profile },
            (BehaviorName::BoundedAccel, ..) => return Err("bounded_accel agents need `lo`, `hi` and `profile`".into()),
        };
        Ok(Self { x: r.x, y: r.y, v: r.v, footprint: r.footprint, behavior })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub center: f64,
    pub width: f64,
}

impl Default for Lane {
    fn default() -> Self {
        Self { center: 0.0, width: 3.5 }
    }
}

/// Region the ego must stay in; leaving it truncates the episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDomain {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Default for SimDomain {
    fn default() -> Self {
        Self { x: (-1e4, 1e4), y: (-100.0, 100.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub duration: f64,
    pub step: f64,
    #[serde(default)]
    pub seed: u64,
    pub ego: EgoConfig,
    #[serde(default)]
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub lane: Lane,
    #[serde(default)]
    pub domain: SimDomain,
}

impl EpisodeConfig {
    pub fn samples(&self) -> usize {
        (self.duration / self.step).round() as usize + 1
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.step > 0.0 && self.step.is_finite()) || !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad(format!("duration {} and step {} must be finite, step positive", self.duration, self.step));
        }
        let n = self.duration / self.step;
        if (n - n.round()).abs() > 1e-6 * n.max(1.0) {
            return bad(format!("step {} does not divide duration {}", self.step, self.duration));
        }
        if self.samples() > MAX_SAMPLES {
            return bad(format!("{} samples exceed the limit of {MAX_SAMPLES}", self.samples()));
        }
        if self.agents.len() > MAX_AGENTS {
            return bad(format!("{} agents exceed the limit of {MAX_AGENTS}", self.agents.len()));
        }
        let (alo, ahi) = self.ego.accel;
        if !(alo <= ahi) || !alo.is_finite() || !ahi.is_finite() {
            return bad(format!("ego acceleration bounds [{alo}, {ahi}] are invalid"));
        }
        match (&self.ego.model, self.ego.steer) {
            (EgoModel::KinematicBicycle { wheelbase }, Some((a, b))) => {
                if !(*wheelbase > 0.0) {
                    return bad("wheelbase must be positive".into());
                }
                let half = std::f64::consts::FRAC_PI_2;
                if !(a <= b && a > -half && b < half) {
                    return bad(format!("steering bounds [{a}, {b}] must lie inside (-pi/2, pi/2)"));
                }
            }
            (EgoModel::KinematicBicycle { .. }, None) => return bad("bicycle ego needs steering bounds".into()),
            (EgoModel::Longitudinal, Some(_)) => return bad("longitudinal ego takes no steering bounds".into()),
            (EgoModel::Longitudinal, None) => {}
        }
        let fp_ok = |f: &Footprint| f.length > 0.0 && f.width > 0.0;
        if !fp_ok(&self.ego.footprint) || !self.agents.iter().all(|a| fp_ok(&a.footprint)) {
            return bad("footprints need positive length and width".into());
        }
        for (i, a) in self.agents.iter().enumerate() {
            if let Behavior::BoundedAccel { lo, hi, profile } = &a.behavior {
                if !(lo <= hi) {
                    return bad(format!("agent {i}: acceleration bounds [{lo}, {hi}] are inverted"));
                }
                if let AccelProfile::Random { hold } = profile {
                    if !(*hold > 0.0) {
                        return bad(format!("agent {i}: hold time must be positive"));
                    }
                }
            }
        }
        if !(self.lane.width > 0.0) {
            return bad("lane width must be positive".into());
        }
        Ok(())
    }
}

/// Grounding of scenario parameters into episode fields.
///
/// Field paths: `ego.x`, `ego.y`, `ego.v`, `ego.heading`, `duration`,
/// `agents.N.x`, `agents.N.y`, `agents.N.v`, `agents.N.accel` (constant
/// acceleration of a bounded-accel agent), `agents.N.accel_lo`,
/// `agents.N.accel_hi`, and `agents.N.gap`, the bumper gap ahead of the ego
/// (sets the agent's x from the ego's position and both footprints).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binding {
    /// Continuous parameter name to field path.
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    /// Discrete parameter name to label to field assignments.
    #[serde(default)]
    pub labels: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
}

fn field_rank(path: &str) -> u8 {
    if path.starts_with("ego.") || path == "duration" {
        0
    } else if path.ends_with(".gap") {
        2
    } else {
        1
    }
}

fn set_field(cfg: &mut EpisodeConfig, path: &str, value: f64) -> Result<(), SimError> {
    let unknown = || SimError::Binding(format!("unknown field path `{path}`"));
    let parts: Vec<&str> = path.split('.').collect();
    match parts.as_slice() {
        ["duration"] => cfg.duration = value,
        ["ego", f] => match *f {
            "x" => cfg.ego.x = value,
            "y" => cfg.ego.y = value,
            "v" => cfg.ego.v = value,
            "heading" => cfg.ego.heading = value,
            _ => return Err(unknown()),
        },
        ["agents", i, f] => {
            let i: usize = i.parse().map_err(|_| unknown())?;
            let ego_half = cfg.ego.footprint.length / 2.0;
            let ego_x = cfg.ego.x;
            let agent = cfg
                .agents
                .get_mut(i)
                .ok_or_else(|| SimError::Binding(format!("`{path}` names agent {i}, which is not configured")))?;
            match *f {
                "x" => agent.x = value,
                "y" => agent.y = value,
                "v" => agent.v = value,
                "gap" => agent.x = ego_x + ego_half + agent.footprint.length / 2.0 + value,
                "accel" | "accel_lo" | "accel_hi" => match &mut agent.behavior {
                    Behavior::BoundedAccel { lo, hi, profile } => match *f {
                        "accel" => *profile = AccelProfile::Constant { accel: value },
                        "accel_lo" => *lo = value,
                        _ => *hi = value,
                    },
                    Behavior::ConstantVelocity => {
                        return Err(SimError::Binding(format!("`{path}` needs a bounded-accel agent")))
                    }
                },
                _ => return Err(unknown()),
            }
        }
        _ => return Err(unknown()),
    }
    Ok(())
}

impl Binding {
    /// Check that every parameter of `space` is bound to a known field.
    pub fn check(&self, space: &ScenarioSpace, base: &EpisodeConfig) -> Result<(), SimError> {
        let probe = Scenario {
            continuous_values: space.continuous().iter().map(|p| 0.5 * (p.lower + p.upper)).collect(),
            discrete_values: space.discrete().iter().map(|d| d.values[0].clone()).collect(),
        };
        for d in space.discrete() {
            let table = self
                .labels
                .get(&d.name)
                .ok_or_else(|| SimError::Binding(format!("discrete parameter `{}` has no binding", d.name)))?;
            if let Some(l) = d.values.iter().find(|l| !table.contains_key(*l)) {
                return Err(SimError::Binding(format!("label `{l}` of `{}` has no binding", d.name)));
            }
            for assignments in table.values() {
                let mut c = base.clone();
                for (path, v) in assignments {
                    set_field(&mut c, path, *v)?;
                }
            }
        }
        if let Some(extra) = self.params.keys().find(|k| !space.continuous().iter().any(|p| &&p.name == k)) {
            return Err(SimError::Binding(format!("binding names unknown parameter `{extra}`")));
        }
        self.apply(base, space, &probe).map(|_| ())
    }

    /// Episode for one scenario: parameters bound to fields, ego fields
    /// first, then agent fields, then gaps.
    pub fn apply(&self, base: &EpisodeConfig, space: &ScenarioSpace, s: &Scenario) -> Result<EpisodeConfig, SimError> {
        let mut assignments: Vec<(String, f64)> = Vec::new();
        for (p, &v) in space.continuous().iter().zip(&s.continuous_values) {
            let path = self
                .params
                .get(&p.name)
                .ok_or_else(|| SimError::Binding(format!("parameter `{}` has no binding", p.name)))?;
            assignments.push((path.clone(), v));
        }
        for (d, label) in space.discrete().iter().zip(&s.discrete_values) {
            let table = self
                .labels
                .get(&d.name)
                .and_then(|t| t.get(label))
                .ok_or_else(|| SimError::Binding(format!("label `{label}` of `{}` has no binding", d.name)))?;
            assignments.extend(table.iter().map(|(k, v)| (k.clone(), *v)));
        }
        assignments.sort_by_key(|(p, _)| field_rank(p));
        let mut cfg = base.clone();
        for (path, v) in &assignments {
            set_field(&mut cfg, path, *v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario_space::{ContinuousParam, DiscreteParam};

    pub(crate) fn base() -> EpisodeConfig {
        EpisodeConfig {
            duration: 5.0,
            step: 0.05,
            seed: 0,
            ego: EgoConfig {
                model: EgoModel::Longitudinal,
                x: 0.0,
                y: 0.0,
                heading: 0.0,
                v: 10.0,
                footprint: Footprint::default(),
                accel: (-5.0, 2.0),
                steer: None,
            },
            agents: vec![AgentConfig {
                x: 50.0,
                y: 0.0,
                v: 0.0,
                footprint: Footprint::default(),
                behavior: Behavior::BoundedAccel { lo: -1.0, hi: 1.0, profile: AccelProfile::Constant { accel: 0.0 } },
            }],
            lane: Lane::default(),
            domain: SimDomain::default(),
        }
    }

    #[test]
    fn gap_binding_uses_bound_ego_position() {
        let space = ScenarioSpace::new(
            "s",
            vec![ContinuousParam::new("d", 0.0, 20.0), ContinuousParam::new("x0", -5.0, 5.0)],
            vec![DiscreteParam::new("mood", ["calm", "wild"])],
        )
        .unwrap();
        let mut b = Binding::default();
        b.params.insert("d".into(), "agents.0.gap".into());
        b.params.insert("x0".into(), "ego.x".into());
        let mut calm = BTreeMap::new();
        calm.insert("agents.0.accel".to_string(), 0.0);
        let mut wild = BTreeMap::new();
        wild.insert("agents.0.accel".to_string(), -1.0);
        b.labels.insert("mood".into(), BTreeMap::from([("calm".to_string(), calm), ("wild".to_string(), wild)]));
        b.check(&space, &base()).unwrap();
        let s = Scenario { continuous_values: vec![8.0, 2.0], discrete_values: vec!["wild".into()] };
        let cfg = b.apply(&base(), &space, &s).unwrap();
        assert_eq!(cfg.ego.x, 2.0);
        assert_eq!(cfg.agents[0].x, 2.0 + 4.5 + 8.0);
        assert_eq!(
            cfg.agents[0].behavior,
            Behavior::BoundedAccel { lo: -1.0, hi: 1.0, profile: AccelProfile::Constant { accel: -1.0 } }
        );
    }

    #[test]
    fn binding_errors() {
        let space = ScenarioSpace::new("s", vec![ContinuousParam::new("d", 0.0, 1.0)], vec![]).unwrap();
        let mut b = Binding::default();
        assert!(b.check(&space, &base()).is_err());
        b.params.insert("d".into(), "agents.3.gap".into());
        assert!(b.check(&space, &base()).is_err());
        b.params.insert("d".into(), "ego.z".into());
        assert!(b.check(&space, &base()).is_err());
        b.params.insert("d".into(), "ego.v".into());
        b.check(&space, &base()).unwrap();
    }

    #[test]
    fn validation() {
        let mut c = base();
        c.validate().unwrap();
        c.step = 0.03;
        assert!(c.validate().is_err());
        let mut c = base();
        c.duration = 1e4;
        c.step = 0.01;
        assert!(c.validate().is_err());
        let mut c = base();
        c.agents = vec![c.agents[0].clone(); 5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn serde_round_trip_and_strict_fields() {
        let mut c = base();
        c.ego.model = EgoModel::KinematicBicycle { wheelbase: 2.7 };
        c.ego.steer = Some((-0.5, 0.5));
        c.agents[0].behavior =
            Behavior::BoundedAccel { lo: -3.0, hi: 1.0, profile: AccelProfile::Random { hold: 0.5 } };
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<EpisodeConfig>(&json).unwrap(), c);
        let typo = json.replace("\"hold\"", "\"hodl\"");
        assert!(serde_json::from_str::<EpisodeConfig>(&typo).is_err());
        let stray = json.replace("\"wheelbase\"", "\"colour\":1,\"wheelbase\"");
        assert!(serde_json::from_str::<EpisodeConfig>(&stray).is_err());
    }
}
