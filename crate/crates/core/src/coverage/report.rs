use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ledger::{CellTest, ClassTally, CoverageLedger, Method, Mode, ModeBreakdown};
use super::CoverageError;
use crate::scenario_space::{required_samples, threshold_ratio, CellIndex};
use crate::verification::Outcome;

pub const REPORT_SCHEMA: &str = "scov-report/1";

/// Safety-verified volume over the space volume. Unrecorded and unknown
/// cells contribute nothing.
pub fn safe_coverage(ledger: &CoverageLedger) -> f64 {
    let s = ledger.stats();
    if s.space_volume <= 0.0 {
        return 0.0;
    }
    (s.volumes.safe_verified / s.space_volume).clamp(0.0, 1.0)
}

/// Safety-verified volume over the volume not proven infeasible.
pub fn penetration_rate(ledger: &CoverageLedger) -> Result<f64, CoverageError> {
    if ledger.mode() == Mode::SampleBased {
        return Err(CoverageError::SampleBasedPenetration);
    }
    let v = ledger.stats().volumes;
    // summed cell by cell rather than as V_S minus the infeasible volume
    let claimable = v.safe_verified + v.unsafe_observed + v.unknown;
    if claimable == 0.0 {
        return Ok(if v.safe_verified == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((v.safe_verified / claimable).clamp(0.0, 1.0))
}

/// Safety-verified cell count over the total cell count.
pub fn threshold_r(ledger: &CoverageLedger) -> Result<f64, CoverageError> {
    let s = ledger.stats();
    Ok(threshold_ratio(s.counts.safe_verified, s.total_cells)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema: String,
    pub config_hash: String,
    pub policy: String,
    pub mode: Mode,
    pub cell_test: CellTest,
    pub clause_text: String,
    pub formula: String,
    pub total_cells: u64,
    pub required_samples: u64,
    pub counts: ClassTally<u64>,
    pub space_volume: f64,
    pub unit_volume: f64,
    pub safe_coverage: f64,
    /// Absent for sample-based ledgers.
    pub penetration_rate: Option<f64>,
    pub threshold_r: f64,
    pub verified_volume: f64,
    pub unsafe_volume: f64,
    pub infeasible_volume: f64,
    pub unknown_volume: f64,
    pub by_method: BTreeMap<Method, ModeBreakdown>,
}

impl CoverageReport {
    pub fn from_ledger(ledger: &CoverageLedger) -> Result<Self, CoverageError> {
        let s = ledger.stats();
        let penetration = match penetration_rate(ledger) {
            Ok(p) => Some(p),
            Err(CoverageError::SampleBasedPenetration) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            schema: REPORT_SCHEMA.into(),
            config_hash: ledger.config_hash().into(),
            policy: ledger.policy().into(),
            mode: ledger.mode(),
            cell_test: ledger.cell_test(),
            clause_text: ledger.spec().clause_text().into(),
            formula: ledger.spec().formula().to_string(),
            total_cells: s.total_cells,
            required_samples: required_samples(ledger.space(), ledger.resolution())?,
            counts: s.counts,
            space_volume: s.space_volume,
            unit_volume: s.unit_volume,
            safe_coverage: safe_coverage(ledger),
            penetration_rate: penetration,
            threshold_r: threshold_r(ledger)?,
            verified_volume: s.volumes.safe_verified,
            unsafe_volume: s.volumes.unsafe_observed,
            infeasible_volume: s.volumes.safety_infeasible,
            unknown_volume: s.volumes.unknown,
            by_method: s.by_method,
        })
    }

    pub fn to_json(&self) -> Result<String, CoverageError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One row per cell in enumeration order: index, center parameters,
    /// owned volume, verdict and method.
    pub fn cell_csv(ledger: &CoverageLedger) -> Result<String, CoverageError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["cell".to_string()];
        header.extend(ledger.space().continuous().iter().map(|p| p.name.clone()));
        header.extend(ledger.space().discrete().iter().map(|p| p.name.clone()));
        header.extend(["volume", "outcome", "method"].map(String::from));
        w.write_record(&header)?;
        for cell in ledger.cells() {
            let entry = ledger.entry(&cell.index);
            let mut row = vec![cell.index.to_string()];
            row.extend(cell.center.continuous_values.iter().map(|v| v.to_string()));
            row.extend(cell.center.discrete_values.iter().cloned());
            row.push(cell.volume().to_string());
            row.push(ledger.outcome(&cell.index).as_str().into());
            row.push(match entry.map(|e| e.method) {
                Some(Method::Sample) => "sample".into(),
                Some(Method::Formal) => "formal".into(),
                None => String::new(),
            });
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| CoverageError::Ledger(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellChange {
    pub index: CellIndex,
    pub from: Outcome,
    pub to: Outcome,
}

/// Difference between consecutive iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDelta {
    pub from: usize,
    pub to: usize,
    pub counts: ClassTally<i64>,
    pub volumes: ClassTally<f64>,
    pub changed: Vec<CellChange>,
    /// Unsafe volume changed by less than one unit volume.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub iterations: usize,
    pub unit_volume: f64,
    pub unsafe_volumes: Vec<f64>,
    pub deltas: Vec<IterationDelta>,
    /// The last step changed the unsafe volume by less than one unit volume.
    pub converged: bool,
    /// The unsafe volume never grew.
    pub monotone: bool,
    /// Cells still failing in the last iteration.
    pub targets: Vec<CellIndex>,
}

impl EvolutionReport {
    pub fn to_json(&self) -> Result<String, CoverageError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Track verdict changes across successive redesigns over one space.
pub fn evolution_report(ledgers: &[CoverageLedger]) -> Result<EvolutionReport, CoverageError> {
    let Some(first) = ledgers.first() else {
        return Err(CoverageError::Ledger("evolution needs at least one ledger".into()));
    };
    for l in &ledgers[1..] {
        if l.space() != first.space() {
            return Err(CoverageError::Mismatch("scenario space"));
        }
        if l.resolution() != first.resolution() {
            return Err(CoverageError::Mismatch("resolution"));
        }
        if l.spec().formula() != first.spec().formula() {
            return Err(CoverageError::Mismatch("safety clause"));
        }
    }
    let stats: Vec<_> = ledgers.iter().map(CoverageLedger::stats).collect();
    let unit_volume = stats[0].unit_volume;
    let mut deltas = Vec::new();
    for i in 1..ledgers.len() {
        let (a, b) = (&stats[i - 1], &stats[i]);
        let mut counts = ClassTally::<i64>::default();
        let mut volumes = ClassTally::<f64>::default();
        for o in Outcome::ALL {
            counts.add(o, b.counts.get(o) as i64 - a.counts.get(o) as i64);
            volumes.add(o, b.volumes.get(o) - a.volumes.get(o));
        }
        let changed = ledgers[i]
            .cells()
            .iter()
            .filter_map(|c| {
                let (from, to) = (ledgers[i - 1].outcome(&c.index), ledgers[i].outcome(&c.index));
                (from != to).then(|| CellChange { index: c.index.clone(), from, to })
            })
            .collect();
        let converged = volumes.unsafe_observed.abs() < unit_volume;
        deltas.push(IterationDelta { from: i - 1, to: i, counts, volumes, changed, converged });
    }
    let unsafe_volumes: Vec<f64> = stats.iter().map(|s| s.volumes.unsafe_observed).collect();
    let last = ledgers.last().expect("nonempty");
    Ok(EvolutionReport {
        iterations: ledgers.len(),
        unit_volume,
        monotone: unsafe_volumes.windows(2).all(|w| w[1] <= w[0]),
        unsafe_volumes,
        converged: deltas.last().is_some_and(|d| d.converged),
        deltas,
        targets: last
            .cells()
            .iter()
            .filter(|c| last.outcome(&c.index) == Outcome::UnsafeObserved)
            .map(|c| c.index.clone())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::ledger::tests::ledger_1d;
    use crate::coverage::LedgerEntry;
    use crate::verification::{Evidence, IcsEvidence, Verdict, Violation};

    fn verdict(o: Outcome, spec: &str) -> Verdict {
        let mut ev = Evidence::default();
        match o {
            Outcome::UnsafeObserved => ev.violation = Some(Violation { sample: 0, time: 0.0 }),
            Outcome::SafetyInfeasible => {
                ev.ics = Some(IcsEvidence { sample: 0, time: 0.0, state: vec![], horizon: 0.0, entry_step: 0 })
            }
            _ => {}
        }
        Verdict::new(o, ev, spec).unwrap()
    }

    /// Ledger over `codes.len()` unit cells; `s`, `u`, `i`, `?` per cell.
    fn ledger(codes: &str, mode: Mode) -> CoverageLedger {
        let mut l = ledger_1d(codes.len());
        let spec = l.spec().formula().to_string();
        let idx: Vec<CellIndex> = l.cells().iter().map(|c| c.index.clone()).collect();
        for (c, i) in codes.chars().zip(idx) {
            let o = match c {
                's' => Outcome::SafeVerified,
                'u' => Outcome::UnsafeObserved,
                'i' => Outcome::SafetyInfeasible,
                _ => Outcome::Unknown,
            };
            l.insert(LedgerEntry { index: i, method: Method::Formal, verdict: verdict(o, &spec) }).unwrap();
        }
        let json = l.to_json().unwrap().replace("\"mode\": \"formal\"", &format!("\"mode\": \"{}\"", mode.as_str()));
        CoverageLedger::from_json(&json).unwrap()
    }

    #[test]
    fn trivial_ratios() {
        assert_eq!(safe_coverage(&ledger_1d(3)), 0.0);
        let all_safe = ledger("ssss", Mode::Formal);
        assert_eq!((safe_coverage(&all_safe), penetration_rate(&all_safe).unwrap()), (1.0, 1.0));
        let half = ledger("iiss??", Mode::Formal);
        assert_eq!(penetration_rate(&half).unwrap(), 0.5);
        assert!((safe_coverage(&half) - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(threshold_r(&half).unwrap(), 2.0 / 6.0);
        assert_eq!(penetration_rate(&ledger("iii", Mode::Formal)).unwrap(), 1.0);
        assert!(matches!(penetration_rate(&ledger("su", Mode::SampleBased)), Err(CoverageError::SampleBasedPenetration)));
        assert_eq!(CoverageReport::from_ledger(&ledger("su", Mode::SampleBased)).unwrap().penetration_rate, None);
    }

    #[test]
    fn hand_counted_evolution() {
        let runs = [ledger("uuus?", Mode::Formal), ledger("uus?s", Mode::Formal), ledger("ussss", Mode::Formal)];
        let r = evolution_report(&runs).unwrap();
        assert_eq!(r.unsafe_volumes, [3.0, 2.0, 1.0]);
        assert!(r.monotone);
        let d0 = &r.deltas[0];
        assert_eq!((d0.counts.unsafe_observed, d0.counts.safe_verified, d0.counts.unknown), (-1, 1, 0));
        let changed: Vec<(usize, Outcome, Outcome)> = d0.changed.iter().map(|c| (c.index.0[0], c.from, c.to)).collect();
        use Outcome::*;
        assert_eq!(changed, [(2, UnsafeObserved, SafeVerified), (3, SafeVerified, Unknown), (4, Unknown, SafeVerified)]);
        let d1 = &r.deltas[1];
        assert_eq!((d1.counts.unsafe_observed, d1.counts.safe_verified, d1.counts.unknown), (-1, 2, -1));
        assert_eq!(d1.changed.len(), 2);
        // each step removes exactly one unit volume of failures
        assert!(!r.converged);
        assert_eq!(r.targets, [CellIndex(vec![0])]);
    }

    #[test]
    fn identical_ledgers_converge() {
        let l = ledger("usi?", Mode::Formal);
        let r = evolution_report(&[l.clone(), l]).unwrap();
        assert!(r.converged && r.monotone);
        assert!(r.deltas[0].changed.is_empty());
        assert_eq!(r.deltas[0].counts, ClassTally::default());
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        assert!(matches!(
            evolution_report(&[ledger("ss", Mode::Formal), ledger("sss", Mode::Formal)]),
            Err(CoverageError::Mismatch(_))
        ));
        assert!(evolution_report(&[]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let l = ledger("su?", Mode::Formal);
        let text = CoverageReport::cell_csv(&l).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "cell,d,volume,outcome,method");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2], "1,1.5,1,unsafe_observed,formal");
    }
}
