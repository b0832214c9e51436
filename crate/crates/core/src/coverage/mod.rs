//! Coverage campaigns, the per-cell ledger and the derived statistics.

mod campaign;
mod ledger;
mod report;

pub use campaign::{run_campaign, verify_cell, verify_scenario, Campaign};
pub use ledger::{
    CellTest, ClassTally, CoverageLedger, LedgerEntry, LedgerStats, Method, Mode, ModeBreakdown,
    LEDGER_SCHEMA,
};
pub use report::{
    evolution_report, penetration_rate, safe_coverage, threshold_r, CellChange, CoverageReport, EvolutionReport,
    IterationDelta, REPORT_SCHEMA,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario_space::{CellIndex, SpaceError};
use crate::stl::{parse, PredicateRegistry, StlFormula};

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("cell {index}: {reason}")]
    Cell { index: CellIndex, reason: String },
    #[error("policy `{0}` is a black box; formal verification needs a white- or grey-box policy")]
    Opaque(String),
    #[error("penetration rate is defined only for formal or mixed ledgers")]
    SampleBasedPenetration,
    #[error("ledgers differ in {0}")]
    Mismatch(&'static str),
    #[error("invalid ledger: {0}")]
    Ledger(String),
    #[error("invalid safety clause: {0}")]
    Spec(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// A natural-language safety clause with its temporal-logic translation.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySpec {
    clause_text: String,
    formula: StlFormula,
}

impl SafetySpec {
    pub fn new(clause_text: impl Into<String>, formula: StlFormula) -> Result<Self, CoverageError> {
        let clause_text = clause_text.into();
        if clause_text.trim().is_empty() {
            return Err(CoverageError::Spec("clause text is empty".into()));
        }
        Ok(Self { clause_text, formula })
    }

    pub fn parse(clause_text: impl Into<String>, formula: &str, registry: &PredicateRegistry) -> Result<Self, CoverageError> {
        let f = parse(formula, registry).map_err(|e| CoverageError::Spec(e.to_string()))?;
        Self::new(clause_text, f)
    }

    pub fn clause_text(&self) -> &str {
        &self.clause_text
    }

    pub fn formula(&self) -> &StlFormula {
        &self.formula
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    clause_text: String,
    formula: String,
}

impl Serialize for SafetySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawSpec { clause_text: self.clause_text.clone(), formula: self.formula.to_string() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SafetySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawSpec::deserialize(d)?;
        // stored formulas are re-read against the builtin library
        SafetySpec::parse(raw.clause_text, &raw.formula, &PredicateRegistry::with_builtins())
            .map_err(serde::de::Error::custom)
    }
}
