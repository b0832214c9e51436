//! Liability determination.
//!
//! Rule table over (violation, feasibility, fallback):
//!
//! | violated | feasibility | fallback | finding                          |
//! |----------|-------------|----------|----------------------------------|
//! | no       | any         | any      | NoViolation, not at fault        |
//! | yes      | Feasible    | any      | SpecViolatedAvoidable, at fault  |
//! | yes      | Infeasible  | yes      | UnavoidableWithFallback, not     |
//! | yes      | Infeasible  | no       | UnavoidableNoFallback, at fault  |
//! | yes      | Unknown     | any      | withheld                         |

use serde::{Deserialize, Serialize};

use super::feasibility::{classify_feasibility_at, Feasibility, FeasibilityReport, RelativeSetup};
use super::posteriori::verify_a_posteriori;
use super::verdict::{Outcome, Violation};
use super::VerifyError;
use crate::stl::{PredicateRegistry, Signal, StlFormula};
use crate::traffic_sim::{Episode, EpisodeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    SpecViolatedAvoidable,
    UnavoidableWithFallback,
    UnavoidableNoFallback,
    NoViolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiabilityFinding {
    at_fault: bool,
    rationale: Rationale,
}

impl LiabilityFinding {
    pub fn new(rationale: Rationale) -> Self {
        let at_fault = matches!(rationale, Rationale::SpecViolatedAvoidable | Rationale::UnavoidableNoFallback);
        Self { at_fault, rationale }
    }

    pub fn at_fault(&self) -> bool {
        self.at_fault
    }

    pub fn rationale(&self) -> Rationale {
        self.rationale
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiabilityDecision {
    Finding(LiabilityFinding),
    Withheld { reason: String },
}

impl LiabilityDecision {
    pub fn finding(&self) -> Option<LiabilityFinding> {
        match self {
            LiabilityDecision::Finding(f) => Some(*f),
            LiabilityDecision::Withheld { .. } => None,
        }
    }
}

pub fn liability_rule(violated: bool, feasibility: Feasibility, fallback_engaged: bool) -> LiabilityDecision {
    let f = |r| LiabilityDecision::Finding(LiabilityFinding::new(r));
    match (violated, feasibility, fallback_engaged) {
        (false, _, _) => f(Rationale::NoViolation),
        (true, Feasibility::Feasible, _) => f(Rationale::SpecViolatedAvoidable),
        (true, Feasibility::SafetyInfeasible, true) => f(Rationale::UnavoidableWithFallback),
        (true, Feasibility::SafetyInfeasible, false) => f(Rationale::UnavoidableNoFallback),
        (true, Feasibility::Unknown, _) => LiabilityDecision::Withheld {
            reason: "feasibility at the violation onset could not be decided".into(),
        },
    }
}

/// Apply the rule table to a trace and precomputed feasibility.
pub fn determine_liability(
    trace: &Signal,
    phi: &StlFormula,
    registry: &PredicateRegistry,
    feasibility: Feasibility,
    fallback_engaged: bool,
) -> Result<LiabilityDecision, VerifyError> {
    let violated = verify_a_posteriori(trace, phi, registry)?.outcome() == Outcome::UnsafeObserved;
    Ok(liability_rule(violated, feasibility, fallback_engaged))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiabilityAssessment {
    pub decision: LiabilityDecision,
    pub violation: Option<Violation>,
    /// Feasibility at the onset state the decision rests on.
    pub onset: Option<FeasibilityReport>,
    pub fallback_engaged: bool,
}

/// Full assessment of a simulated episode.
///
/// Scanning backward from the sample before the first violation, the
/// latest avoidable state makes the violation avoidable. If none exists and
/// the initial state is already inevitable the violation was unavoidable,
/// and the fallback counts as engaged only if the trace's `fallback`
/// channel is set on every decision from the start until the violation.
pub fn assess_liability(
    cfg: &EpisodeConfig,
    episode: &Episode,
    phi: &StlFormula,
    registry: &PredicateRegistry,
) -> Result<LiabilityAssessment, VerifyError> {
    let sig = &episode.signal;
    let post = verify_a_posteriori(sig, phi, registry)?;
    let Some(violation) = post.evidence().violation else {
        return Ok(LiabilityAssessment {
            decision: liability_rule(false, Feasibility::Unknown, false),
            violation: None,
            onset: None,
            fallback_engaged: false,
        });
    };
    let kv = violation.sample;
    let fallback_engaged = match sig.channel("fallback") {
        Some(f) => f[..kv.max(1)].iter().all(|&x| x > 0.5),
        None => false,
    };
    let withheld = |reason: String, onset| LiabilityAssessment {
        decision: LiabilityDecision::Withheld { reason },
        violation: Some(violation),
        onset,
        fallback_engaged,
    };
    let setup = match RelativeSetup::from_config(cfg) {
        Ok(Some(s)) => s,
        Ok(None) => return Ok(withheld("no agent; collision feasibility is undefined".into(), None)),
        Err(reason) => return Ok(withheld(reason, None)),
    };
    let classify = |k: usize| -> Result<FeasibilityReport, VerifyError> {
        let state = setup.state_at(sig, k).expect("simulator channels");
        classify_feasibility_at(cfg, phi, &setup, &state, k, sig.times()[k])
    };
    let mut initial = None;
    for k in (0..kv.max(1)).rev() {
        let r = classify(k)?;
        if r.class == Feasibility::Feasible {
            return Ok(LiabilityAssessment {
                decision: liability_rule(true, Feasibility::Feasible, fallback_engaged),
                violation: Some(violation),
                onset: Some(r),
                fallback_engaged,
            });
        }
        if k == 0 {
            initial = Some(r);
        }
    }
    let initial = initial.expect("scan reaches the first sample");
    let decision = liability_rule(true, initial.class, fallback_engaged);
    Ok(LiabilityAssessment { decision, violation: Some(violation), onset: Some(initial), fallback_engaged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_table_is_total() {
        let classes = [Feasibility::Feasible, Feasibility::SafetyInfeasible, Feasibility::Unknown];
        let mut seen = 0;
        for violated in [false, true] {
            for &class in &classes {
                for fallback in [false, true] {
                    let d = liability_rule(violated, class, fallback);
                    let expect = match (violated, class, fallback) {
                        (false, _, _) => Some((false, Rationale::NoViolation)),
                        (true, Feasibility::Feasible, _) => Some((true, Rationale::SpecViolatedAvoidable)),
                        (true, Feasibility::SafetyInfeasible, true) => Some((false, Rationale::UnavoidableWithFallback)),
                        (true, Feasibility::SafetyInfeasible, false) => Some((true, Rationale::UnavoidableNoFallback)),
                        (true, Feasibility::Unknown, _) => None,
                    };
                    assert_eq!(d.finding().map(|f| (f.at_fault(), f.rationale())), expect);
                    seen += 1;
                }
            }
        }
        assert_eq!(seen, 12);
    }
}
