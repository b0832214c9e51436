//! Per-scenario safety verdicts: trace replay, predictive tubes,
//! feasibility of the safety formula and liability.

mod feasibility;
mod liability;
mod posteriori;
mod priori;
mod verdict;

pub use feasibility::{
    classify_feasibility, classify_feasibility_at, reduce, Feasibility, FeasibilityReport, Reduction, RelativeSetup,
};
pub use liability::{
    assess_liability, determine_liability, liability_rule, LiabilityAssessment, LiabilityDecision, LiabilityFinding,
    Rationale,
};
pub use posteriori::verify_a_posteriori;
pub use priori::{closed_loop_tube, relative_step, verify_a_priori, AprioriOptions};
pub use verdict::{Evidence, IcsEvidence, Outcome, TubeEvidence, Verdict, Violation};

use crate::reachability::ReachError;
use crate::stl::StlError;
use crate::traffic_sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("policy `{0}` is a black box; a priori verification needs a white- or grey-box policy, use a posteriori verification instead")]
    Opaque(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error("{0}")]
    Invariant(String),
}

impl From<String> for VerifyError {
    fn from(s: String) -> Self {
        VerifyError::Invariant(s)
    }
}
