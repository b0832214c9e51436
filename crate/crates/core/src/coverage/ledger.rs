use std::collections::BTreeMap;
use std::fmt;
use std::ops::AddAssign;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CoverageError, SafetySpec};
use crate::scenario_space::{enumerate_cells, space_volume, unit_volume, CellIndex, Resolution, ScenarioCell, ScenarioSpace};
use crate::verification::{Outcome, Verdict};

pub const LEDGER_SCHEMA: &str = "scov-ledger/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SampleBased,
    Formal,
    /// Formal where the policy allows it, falling back to replay on cells
    /// the formal route leaves undecided.
    Mixed,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::SampleBased => "sample_based",
            Mode::Formal => "formal",
            Mode::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sample" | "sample_based" => Ok(Mode::SampleBased),
            "formal" => Ok(Mode::Formal),
            "mixed" => Ok(Mode::Mixed),
            _ => Err(format!("unknown mode `{s}` (expected sample, formal or mixed)")),
        }
    }
}

/// Route that produced a cell's verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sample,
    Formal,
}

/// Points tested per cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellTest {
    #[default]
    Center,
    /// The center and every corner of the test box, combined conjunctively.
    CornersAndCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub index: CellIndex,
    pub method: Method,
    pub verdict: Verdict,
}

/// One value per verdict class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassTally<T> {
    pub safe_verified: T,
    pub unsafe_observed: T,
    pub safety_infeasible: T,
    pub unknown: T,
}

impl<T: Copy + AddAssign> ClassTally<T> {
    pub fn get(&self, o: Outcome) -> T {
        match o {
            Outcome::SafeVerified => self.safe_verified,
            Outcome::UnsafeObserved => self.unsafe_observed,
            Outcome::SafetyInfeasible => self.safety_infeasible,
            Outcome::Unknown => self.unknown,
        }
    }

    pub fn add(&mut self, o: Outcome, x: T) {
        let slot = match o {
            Outcome::SafeVerified => &mut self.safe_verified,
            Outcome::UnsafeObserved => &mut self.unsafe_observed,
            Outcome::SafetyInfeasible => &mut self.safety_infeasible,
            Outcome::Unknown => &mut self.unknown,
        };
        *slot += x;
    }
}

impl ClassTally<u64> {
    pub fn total(&self) -> u64 {
        self.safe_verified + self.unsafe_observed + self.safety_infeasible + self.unknown
    }
}

impl ClassTally<f64> {
    pub fn total(&self) -> f64 {
        self.safe_verified + self.unsafe_observed + self.safety_infeasible + self.unknown
    }
}

/// Counts and volumes derived from a ledger. Cells without an entry count
/// as unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerStats {
    pub total_cells: u64,
    pub populated: u64,
    pub counts: ClassTally<u64>,
    pub space_volume: f64,
    pub unit_volume: f64,
    pub volumes: ClassTally<f64>,
    pub by_method: BTreeMap<Method, ModeBreakdown>,
}

/// Cells and volume decided by one verification route.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeBreakdown {
    pub counts: ClassTally<u64>,
    pub volumes: ClassTally<f64>,
}

/// Per-cell verdicts of one campaign.
#[derive(Debug, Clone)]
pub struct CoverageLedger {
    space: ScenarioSpace,
    resolution: Resolution,
    spec: SafetySpec,
    policy: String,
    mode: Mode,
    cell_test: CellTest,
    config_hash: String,
    cells: Vec<ScenarioCell>,
    positions: BTreeMap<CellIndex, usize>,
    entries: BTreeMap<CellIndex, LedgerEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerDocument {
    schema: String,
    config_hash: String,
    policy: String,
    mode: Mode,
    cell_test: CellTest,
    spec: SafetySpec,
    space: ScenarioSpace,
    resolution: Resolution,
    statistics: LedgerStats,
    entries: Vec<LedgerEntry>,
}

impl PartialEq for CoverageLedger {
    fn eq(&self, o: &Self) -> bool {
        self.space == o.space
            && self.resolution == o.resolution
            && self.spec == o.spec
            && self.policy == o.policy
            && self.mode == o.mode
            && self.cell_test == o.cell_test
            && self.config_hash == o.config_hash
            && self.entries == o.entries
    }
}

impl CoverageLedger {
    /// Empty ledger over the cells of `space` at `resolution`.
    pub fn new(
        space: ScenarioSpace,
        resolution: Resolution,
        spec: SafetySpec,
        policy: impl Into<String>,
        mode: Mode,
        cell_test: CellTest,
    ) -> Result<Self, CoverageError> {
        let cells = enumerate_cells(&space, &resolution)?;
        let positions = cells.iter().enumerate().map(|(i, c)| (c.index.clone(), i)).collect();
        Ok(Self {
            space,
            resolution,
            spec,
            policy: policy.into(),
            mode,
            cell_test,
            config_hash: String::new(),
            cells,
            positions,
            entries: BTreeMap::new(),
        })
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    pub fn set_config_hash(&mut self, hash: impl Into<String>) {
        self.config_hash = hash.into();
    }

    /// Record a verdict; the cell must exist and be unrecorded.
    pub fn insert(&mut self, entry: LedgerEntry) -> Result<(), CoverageError> {
        if !self.positions.contains_key(&entry.index) {
            return Err(CoverageError::Ledger(format!("cell {} is not a cell of the space", entry.index)));
        }
        entry.verdict.check().map_err(|e| CoverageError::Ledger(format!("cell {}: {e}", entry.index)))?;
        if entry.verdict.spec() != self.spec.formula().to_string() {
            return Err(CoverageError::Ledger(format!("cell {} was verified against `{}`", entry.index, entry.verdict.spec())));
        }
        if self.entries.contains_key(&entry.index) {
            return Err(CoverageError::Ledger(format!("cell {} recorded twice", entry.index)));
        }
        self.entries.insert(entry.index.clone(), entry);
        Ok(())
    }

    pub fn space(&self) -> &ScenarioSpace {
        &self.space
    }

    pub fn resolution(&self) -> &Resolution {
        &self.resolution
    }

    pub fn spec(&self) -> &SafetySpec {
        &self.spec
    }

    pub fn policy(&self) -> &str {
        &self.policy
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cell_test(&self) -> CellTest {
        self.cell_test
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// Cells in enumeration order.
    pub fn cells(&self) -> &[ScenarioCell] {
        &self.cells
    }

    pub fn cell(&self, index: &CellIndex) -> Option<&ScenarioCell> {
        self.positions.get(index).map(|&i| &self.cells[i])
    }

    /// Entries ordered by cell index.
    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.values()
    }

    pub fn entry(&self, index: &CellIndex) -> Option<&LedgerEntry> {
        self.entries.get(index)
    }

    /// Verdict class of a cell; unrecorded cells are unknown.
    pub fn outcome(&self, index: &CellIndex) -> Outcome {
        self.entries.get(index).map_or(Outcome::Unknown, |e| e.verdict.outcome())
    }

    pub fn is_complete(&self) -> bool {
        self.entries.len() == self.cells.len()
    }

    pub fn stats(&self) -> LedgerStats {
        let mut counts = ClassTally::<u64>::default();
        let mut volumes = ClassTally::<f64>::default();
        let mut by_method: BTreeMap<Method, ModeBreakdown> = BTreeMap::new();
        for cell in &self.cells {
            let vol = cell.volume();
            let (o, method) = match self.entries.get(&cell.index) {
                Some(e) => (e.verdict.outcome(), Some(e.method)),
                None => (Outcome::Unknown, None),
            };
            counts.add(o, 1);
            volumes.add(o, vol);
            if let Some(m) = method {
                let b = by_method.entry(m).or_default();
                b.counts.add(o, 1);
                b.volumes.add(o, vol);
            }
        }
        LedgerStats {
            total_cells: self.cells.len() as u64,
            populated: self.entries.len() as u64,
            counts,
            space_volume: space_volume(&self.space),
            unit_volume: unit_volume(&self.space, &self.resolution).expect("resolution checked at construction"),
            volumes,
            by_method,
        }
    }

    /// Pretty-printed document with a trailing newline.
    pub fn to_json(&self) -> Result<String, CoverageError> {
        let doc = LedgerDocument {
            schema: LEDGER_SCHEMA.into(),
            config_hash: self.config_hash.clone(),
            policy: self.policy.clone(),
            mode: self.mode,
            cell_test: self.cell_test,
            spec: self.spec.clone(),
            space: self.space.clone(),
            resolution: self.resolution.clone(),
            statistics: self.stats(),
            entries: self.entries.values().cloned().collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Parse a ledger document, rejecting entries outside the space and
    /// statistics that disagree with the entries.
    pub fn from_json(text: &str) -> Result<Self, CoverageError> {
        let doc: LedgerDocument = serde_json::from_str(text)?;
        if doc.schema != LEDGER_SCHEMA {
            return Err(CoverageError::Ledger(format!("schema `{}`, expected `{LEDGER_SCHEMA}`", doc.schema)));
        }
        let resolution = Resolution::new(&doc.space, doc.resolution.half_widths().to_vec())?;
        let mut ledger = CoverageLedger::new(doc.space, resolution, doc.spec, doc.policy, doc.mode, doc.cell_test)?
            .with_config_hash(doc.config_hash);
        for e in doc.entries {
            ledger.insert(e)?;
        }
        let stats = ledger.stats();
        let tol = 1e-9 * stats.space_volume.max(f64::MIN_POSITIVE);
        let close = |a: &ClassTally<f64>, b: &ClassTally<f64>| {
            Outcome::ALL.iter().all(|&o| (a.get(o) - b.get(o)).abs() <= tol)
        };
        let s = &doc.statistics;
        if s.counts != stats.counts || s.total_cells != stats.total_cells || s.populated != stats.populated {
            return Err(CoverageError::Ledger("stored counts disagree with the entries".into()));
        }
        if !close(&s.volumes, &stats.volumes) {
            return Err(CoverageError::Ledger("stored volumes disagree with the entries".into()));
        }
        Ok(ledger)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::scenario_space::ContinuousParam;
    use crate::stl::PredicateRegistry;

    pub(crate) fn ledger_1d(n: usize) -> CoverageLedger {
        let space = ScenarioSpace::new("line", vec![ContinuousParam::new("d", 0.0, n as f64)], vec![]).unwrap();
        let res = Resolution::new(&space, vec![0.5]).unwrap();
        let spec = SafetySpec::parse("no collision", "G[0,5] collision_free", &PredicateRegistry::with_builtins()).unwrap();
        CoverageLedger::new(space, res, spec, "p", Mode::Formal, CellTest::Center).unwrap()
    }

    fn safe(spec: &str) -> Verdict {
        Verdict::new(Outcome::SafeVerified, Default::default(), spec).unwrap()
    }

    #[test]
    fn missing_entries_count_as_unknown() {
        let mut l = ledger_1d(4);
        let spec = l.spec().formula().to_string();
        let idx = l.cells()[1].index.clone();
        l.insert(LedgerEntry { index: idx, method: Method::Formal, verdict: safe(&spec) }).unwrap();
        let s = l.stats();
        assert_eq!(s.counts.total(), 4);
        assert_eq!((s.counts.safe_verified, s.counts.unknown), (1, 3));
        assert!((s.volumes.total() - s.space_volume).abs() < 1e-12);
        assert_eq!(s.by_method[&Method::Formal].volumes.safe_verified, 1.0);
    }

    #[test]
    fn insert_rejects_foreign_and_duplicate_cells() {
        let mut l = ledger_1d(2);
        let spec = l.spec().formula().to_string();
        let e = |i| LedgerEntry { index: CellIndex(vec![i]), method: Method::Formal, verdict: safe(&spec) };
        assert!(l.insert(e(7)).is_err());
        l.insert(e(0)).unwrap();
        assert!(l.insert(e(0)).is_err());
        let other = LedgerEntry { index: CellIndex(vec![1]), method: Method::Formal, verdict: safe("G in_lane") };
        assert!(l.insert(other).is_err());
    }

    #[test]
    fn json_round_trip_and_tamper_detection() {
        let mut l = ledger_1d(3).with_config_hash("abc");
        let spec = l.spec().formula().to_string();
        l.insert(LedgerEntry { index: CellIndex(vec![2]), method: Method::Sample, verdict: safe(&spec) }).unwrap();
        let text = l.to_json().unwrap();
        let back = CoverageLedger::from_json(&text).unwrap();
        assert_eq!(back, l);
        assert_eq!(back.to_json().unwrap(), text);
        let tampered = text.replacen("\"safe_verified\": 1", "\"safe_verified\": 2", 1);
        assert_ne!(tampered, text);
        assert!(CoverageLedger::from_json(&tampered).is_err());
    }

    #[test]
    fn mode_names() {
        for m in [Mode::SampleBased, Mode::Formal, Mode::Mixed] {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("sample".parse::<Mode>().unwrap(), Mode::SampleBased);
        assert!("exhaustive".parse::<Mode>().is_err());
    }
}
