//! Feasibility of collision-avoidance requirements.
//!
//! A formula reduces to avoid-set form when its conjuncts, after pushing
//! `G` through `∧`, include `G[0,b] collision_free`. For a longitudinal ego
//! behind a single in-lane agent the avoid set is `gap < 0` in the relative
//! model `(gap, v_ego, v_lead)`, and the verdict comes from an ICS check of
//! the point state over the remaining window.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::verdict::IcsEvidence;
use super::VerifyError;
use crate::interval::{IBox, Interval};
use crate::reachability::models::RelativeLongitudinal;
use crate::reachability::{ics_check_box, DynamicalSystem, HalfSpace, IcsOptions, IcsVerdict};
use crate::stl::{Signal, StlFormula};
use crate::traffic_sim::{AccelProfile, Behavior, EgoModel, EpisodeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Feasible,
    SafetyInfeasible,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub class: Feasibility,
    pub reason: Option<String>,
    /// Present exactly when the class is `SafetyInfeasible`.
    pub ics: Option<IcsEvidence>,
    /// Constant ego acceleration proving feasibility, when one was needed.
    pub evasion: Option<Vec<f64>>,
}

impl FeasibilityReport {
    fn unknown(reason: impl Into<String>) -> Self {
        Self { class: Feasibility::Unknown, reason: Some(reason.into()), ics: None, evasion: None }
    }

    fn feasible(reason: impl Into<String>) -> Self {
        Self { class: Feasibility::Feasible, reason: Some(reason.into()), ics: None, evasion: None }
    }
}

/// Collision content of a formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    /// Largest `b` over the `G[0,b] collision_free` conjuncts.
    pub collision_horizon: Option<f64>,
    /// Every conjunct is a collision conjunct.
    pub complete: bool,
}

fn conjuncts(f: &StlFormula, window: Option<(f64, f64)>, out: &mut Vec<(Option<(f64, f64)>, StlFormula)>) {
    match f {
        StlFormula::And(a, b) => {
            conjuncts(a, window, out);
            conjuncts(b, window, out);
        }
        // nested windows compose additively
        StlFormula::Always(i, g) => {
            let (lo, hi) = window.unwrap_or((0.0, 0.0));
            conjuncts(g, Some((lo + i.lo(), hi + i.hi())), out);
        }
        other => out.push((window, other.clone())),
    }
}

/// Split `phi` into collision conjuncts over the episode `duration`.
pub fn reduce(phi: &StlFormula, duration: f64) -> Reduction {
    let mut parts = Vec::new();
    conjuncts(phi, None, &mut parts);
    let mut horizon: Option<f64> = None;
    let mut complete = true;
    for (window, f) in parts {
        let (lo, hi) = window.unwrap_or((0.0, 0.0));
        match f {
            StlFormula::Atom(a) if a.name == "collision_free" && lo == 0.0 => {
                let b = hi.min(duration);
                horizon = Some(horizon.map_or(b, |h| h.max(b)));
            }
            StlFormula::Atom(a) if a.name == "true" => {}
            _ => complete = false,
        }
    }
    Reduction { collision_horizon: horizon, complete }
}

/// Relative longitudinal abstraction of an episode.
#[derive(Debug, Clone)]
pub struct RelativeSetup {
    pub sys: DynamicalSystem,
    /// Sum of the half footprint lengths.
    pub half_lengths: f64,
}

impl RelativeSetup {
    /// `Ok(None)` when there is no agent to collide with; errors carry the
    /// reason the episode is outside the relative abstraction.
    pub fn from_config(cfg: &EpisodeConfig) -> Result<Option<Self>, String> {
        if cfg.ego.model != EgoModel::Longitudinal {
            return Err("only longitudinal egos reduce to the relative model".into());
        }
        let agent = match cfg.agents.as_slice() {
            [] => return Ok(None),
            [a] => a,
            _ => return Err(format!("{} agents; the relative model takes exactly one", cfg.agents.len())),
        };
        let lateral = (agent.y - cfg.ego.y).abs();
        if lateral >= (cfg.ego.footprint.width + agent.footprint.width) / 2.0 {
            return Err("agent does not share the ego's lane band".into());
        }
        if agent.x <= cfg.ego.x {
            return Err("agent is not ahead of the ego".into());
        }
        let (lo, hi) = match &agent.behavior {
            Behavior::ConstantVelocity => (0.0, 0.0),
            Behavior::BoundedAccel { lo, hi, profile } => match profile {
                AccelProfile::Constant { accel } => {
                    let a = accel.clamp(*lo, *hi);
                    (a, a)
                }
                AccelProfile::Random { .. } => (*lo, *hi),
            },
        };
        // agents stop rather than reverse; a lead that never accelerates is
        // bounded above by one holding its speed
        let d = IBox::new(vec![Interval::new(lo, hi.max(0.0))]);
        let u = IBox::new(vec![Interval::new(cfg.ego.accel.0, cfg.ego.accel.1)]);
        let x = IBox::from_bounds(&[-1e6, -1e5, -1e5], &[1e6, 1e5, 1e5]);
        let sys = DynamicalSystem::new(Arc::new(RelativeLongitudinal), x, u, d).map_err(|e| e.to_string())?;
        Ok(Some(Self { sys, half_lengths: (cfg.ego.footprint.length + agent.footprint.length) / 2.0 }))
    }

    pub fn initial_state(&self, cfg: &EpisodeConfig) -> Vec<f64> {
        let a = &cfg.agents[0];
        vec![a.x - cfg.ego.x - self.half_lengths, cfg.ego.v, a.v.max(0.0)]
    }

    /// State at sample `k` of a simulated trace.
    pub fn state_at(&self, sig: &Signal, k: usize) -> Option<Vec<f64>> {
        let ch = |n: &str| sig.channel_index(n).map(|i| sig.states()[k][i]);
        Some(vec![ch("agent0.x")? - ch("ego.x")? - self.half_lengths, ch("ego.v")?, ch("agent0.v")?])
    }
}

/// Feasibility of `phi` from `state` at time `t` (sample `sample`).
pub fn classify_feasibility_at(
    cfg: &EpisodeConfig,
    phi: &StlFormula,
    setup: &RelativeSetup,
    state: &[f64],
    sample: usize,
    t: f64,
) -> Result<FeasibilityReport, VerifyError> {
    let red = reduce(phi, cfg.duration);
    let Some(b) = red.collision_horizon else {
        return Ok(FeasibilityReport::unknown("formula has no `G[0,b] collision_free` conjunct"));
    };
    let h = cfg.step;
    let n = (((b - t) / h) + 1e-9).floor().max(0.0) as usize;
    let horizon = n as f64 * h;
    let region = HalfSpace { axis: 0, bound: 0.0 };
    let evidence = |entry_step| IcsEvidence { sample, time: t, state: state.to_vec(), horizon, entry_step };
    if state[0] < 0.0 {
        return Ok(FeasibilityReport {
            class: Feasibility::SafetyInfeasible,
            reason: Some("footprints already overlap".into()),
            ics: Some(evidence(0)),
            evasion: None,
        });
    }
    if n == 0 {
        return Ok(classify_complete(red.complete, None, "window ends here"));
    }
    let report = ics_check_box(&setup.sys, &IBox::point(state), &region, horizon, h, &IcsOptions::default())?;
    Ok(match report.verdict {
        IcsVerdict::Inevitable => FeasibilityReport {
            class: Feasibility::SafetyInfeasible,
            reason: None,
            ics: Some(evidence(report.entry_step.unwrap_or(0))),
            evasion: None,
        },
        IcsVerdict::Avoidable => classify_complete(red.complete, report.evasion, "constant evasion exists"),
        IcsVerdict::BoundaryUnknown => FeasibilityReport::unknown("state lies in the undecided ICS boundary zone"),
    })
}

fn classify_complete(complete: bool, evasion: Option<Vec<f64>>, why: &str) -> FeasibilityReport {
    if complete {
        FeasibilityReport { evasion, ..FeasibilityReport::feasible(why) }
    } else {
        FeasibilityReport::unknown("collision part is avoidable but other conjuncts are not reducible")
    }
}

/// Feasibility of `phi` at the episode's initial state. Depends only on
/// the configuration, never on a policy.
pub fn classify_feasibility(cfg: &EpisodeConfig, phi: &StlFormula) -> Result<FeasibilityReport, VerifyError> {
    cfg.validate()?;
    let red = reduce(phi, cfg.duration);
    if red.collision_horizon.is_none() {
        return Ok(FeasibilityReport::unknown("formula has no `G[0,b] collision_free` conjunct"));
    }
    match RelativeSetup::from_config(cfg) {
        Err(reason) => Ok(FeasibilityReport::unknown(reason)),
        Ok(None) => Ok(classify_complete(red.complete, None, "no agents to collide with")),
        Ok(Some(setup)) => classify_feasibility_at(cfg, phi, &setup, &setup.initial_state(cfg), 0, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{parse, PredicateRegistry};
    use crate::verification::fixtures::wall;

    fn phi(s: &str) -> StlFormula {
        parse(s, &PredicateRegistry::with_builtins()).unwrap()
    }

    #[test]
    fn wall_examples() {
        let g = phi("G[0,5] collision_free");
        let r = classify_feasibility(&wall(10.0, 5.0, 8.0), &g).unwrap();
        assert_eq!(r.class, Feasibility::SafetyInfeasible);
        assert!(r.ics.is_some());
        assert_eq!(classify_feasibility(&wall(10.0, 5.0, 12.0), &g).unwrap().class, Feasibility::Feasible);
    }

    #[test]
    fn reduction() {
        let r = reduce(&phi("G[0,3] (collision_free & G[0,1] collision_free)"), 10.0);
        assert_eq!(r, Reduction { collision_horizon: Some(4.0), complete: true });
        let r = reduce(&phi("G[0,3] collision_free & G in_lane"), 10.0);
        assert_eq!(r.collision_horizon, Some(3.0));
        assert!(!r.complete);
        assert_eq!(reduce(&phi("G[1,3] collision_free"), 10.0).collision_horizon, None);
        assert_eq!(reduce(&phi("G collision_free"), 10.0).collision_horizon, Some(10.0));
    }

    #[test]
    fn non_reducible_is_unknown_not_error() {
        let c = wall(10.0, 5.0, 8.0);
        assert_eq!(classify_feasibility(&c, &phi("G in_lane")).unwrap().class, Feasibility::Unknown);
        // infeasible collision part settles a partially reducible formula
        let mixed = phi("G[0,5] collision_free & G in_lane");
        assert_eq!(classify_feasibility(&c, &mixed).unwrap().class, Feasibility::SafetyInfeasible);
        let far = wall(10.0, 5.0, 30.0);
        assert_eq!(classify_feasibility(&far, &mixed).unwrap().class, Feasibility::Unknown);
    }
}
