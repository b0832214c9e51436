use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    SafeVerified,
    UnsafeObserved,
    SafetyInfeasible,
    Unknown,
}

impl Outcome {
    pub const ALL: [Outcome; 4] =
        [Outcome::SafeVerified, Outcome::UnsafeObserved, Outcome::SafetyInfeasible, Outcome::Unknown];

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::SafeVerified => "safe_verified",
            Outcome::UnsafeObserved => "unsafe_observed",
            Outcome::SafetyInfeasible => "safety_infeasible",
            Outcome::Unknown => "unknown",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// First sample at which the trace falsifies the formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sample: usize,
    pub time: f64,
}

/// Inevitable-collision certificate for one state of the relative model
/// `(gap, v_ego, v_lead)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcsEvidence {
    pub sample: usize,
    pub time: f64,
    pub state: Vec<f64>,
    pub horizon: f64,
    /// Step by which every control has closed the gap.
    pub entry_step: usize,
}

/// Summary of the predicted closed-loop tubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeEvidence {
    pub decisions: usize,
    pub lookahead_steps: usize,
    /// Smallest lower gap bound over every tube.
    pub min_gap_lower: f64,
    /// `(decision sample, lookahead step)` of the first predicted contact.
    pub first_contact: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Reference to the trace the verdict was read from.
    #[serde(default)]
    pub trace: Option<String>,
    #[serde(default)]
    pub violation: Option<Violation>,
    /// The trace ended before the formula's horizon.
    #[serde(default)]
    pub truncated: bool,
    #[serde(default)]
    pub ics: Option<IcsEvidence>,
    #[serde(default)]
    pub tube: Option<TubeEvidence>,
    #[serde(default)]
    pub note: Option<String>,
}

/// Safety verdict for one scenario. Infeasibility always carries an ICS
/// certificate and an observed violation always carries the violating
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVerdict")]
pub struct Verdict {
    outcome: Outcome,
    evidence: Evidence,
    spec: String,
}

#[derive(Deserialize)]
struct RawVerdict {
    outcome: Outcome,
    evidence: Evidence,
    spec: String,
}

impl TryFrom<RawVerdict> for Verdict {
    type Error = String;
    fn try_from(r: RawVerdict) -> Result<Self, String> {
        Verdict::new(r.outcome, r.evidence, r.spec)
    }
}

impl Verdict {
    pub fn new(outcome: Outcome, evidence: Evidence, spec: impl Into<String>) -> Result<Self, String> {
        let v = Self { outcome, evidence, spec: spec.into() };
        v.check()?;
        Ok(v)
    }

    pub fn unknown(spec: impl Into<String>, note: impl Into<String>) -> Self {
        Self { outcome: Outcome::Unknown, evidence: Evidence { note: Some(note.into()), ..Evidence::default() }, spec: spec.into() }
    }

    /// Verdict invariants.
    pub fn check(&self) -> Result<(), String> {
        match self.outcome {
            Outcome::SafetyInfeasible if self.evidence.ics.is_none() => {
                Err("safety_infeasible verdict without an inevitable-collision certificate".into())
            }
            Outcome::UnsafeObserved if self.evidence.violation.is_none() => {
                Err("unsafe_observed verdict without a violating sample".into())
            }
            _ => Ok(()),
        }
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    pub fn spec(&self) -> &str {
        &self.spec
    }

    pub fn with_trace(mut self, trace: impl Into<String>) -> Self {
        self.evidence.trace = Some(trace.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.evidence.note = Some(note.into());
        self
    }

    /// Promote to infeasible with the certificate attached.
    pub fn into_infeasible(mut self, ics: IcsEvidence) -> Self {
        self.outcome = Outcome::SafetyInfeasible;
        self.evidence.ics = Some(ics);
        self
    }

    pub(crate) fn demote_unknown(mut self, note: impl Into<String>) -> Self {
        self.outcome = Outcome::Unknown;
        self.evidence.note = Some(note.into());
        self
    }
}
