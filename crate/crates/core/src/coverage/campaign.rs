use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::ledger::{CellTest, CoverageLedger, LedgerEntry, Method, Mode};
use super::{CoverageError, SafetySpec};
use crate::scenario_space::{Resolution, Scenario, ScenarioCell, ScenarioSpace};
use crate::stl::PredicateRegistry;
use crate::traffic_sim::{roll_out, Binding, EpisodeConfig, Policy};
use crate::verification::{
    classify_feasibility, verify_a_posteriori, verify_a_priori, AprioriOptions, Feasibility, Outcome, Verdict,
    VerifyError,
};

/// Everything a campaign needs besides the mode-independent cell list.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub space: ScenarioSpace,
    pub resolution: Resolution,
    pub spec: SafetySpec,
    pub policy: Policy,
    pub mode: Mode,
    pub cell_test: CellTest,
    /// Episode every scenario is bound onto.
    pub base: EpisodeConfig,
    pub binding: Binding,
    pub registry: PredicateRegistry,
    pub apriori: AprioriOptions,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Overrides the input fingerprint recorded in the ledger.
    pub config_hash: Option<String>,
}

impl Campaign {
    pub fn new(
        space: ScenarioSpace,
        resolution: Resolution,
        spec: SafetySpec,
        policy: Policy,
        mode: Mode,
        base: EpisodeConfig,
        binding: Binding,
    ) -> Self {
        Self {
            space,
            resolution,
            spec,
            policy,
            mode,
            cell_test: CellTest::Center,
            base,
            binding,
            registry: PredicateRegistry::with_builtins(),
            apriori: AprioriOptions::default(),
            jobs: None,
            config_hash: None,
        }
    }

    /// SHA-256 over a canonical rendering of the inputs.
    pub fn fingerprint(&self) -> String {
        let canon = serde_json::json!({
            "space": self.space,
            "resolution": self.resolution,
            "spec": self.spec,
            "policy": { "name": self.policy.name, "kind": format!("{:?}", self.policy.kind) },
            "mode": self.mode,
            "cell_test": self.cell_test,
            "base": self.base,
            "binding": self.binding,
            "apriori": self.apriori,
        });
        hex::encode(Sha256::digest(canon.to_string().as_bytes()))
    }

    /// Mode and binding preconditions, checked before any cell runs.
    pub fn validate(&self) -> Result<(), CoverageError> {
        if self.mode == Mode::Formal && !self.policy.is_transparent() {
            return Err(CoverageError::Opaque(self.policy.name.clone()));
        }
        self.binding.check(&self.space, &self.base).map_err(|e| CoverageError::Spec(e.to_string()))
    }
}

fn sample_verdict(c: &Campaign, cfg: &EpisodeConfig) -> Result<Verdict, VerifyError> {
    let phi = c.spec.formula();
    let ep = roll_out(cfg, &c.policy)?;
    let v = verify_a_posteriori(&ep.signal, phi, &c.registry)?;
    if ep.truncated() && v.outcome() == Outcome::SafeVerified {
        return Ok(v.demote_unknown("episode left the simulation domain"));
    }
    Ok(v)
}

/// Attach an infeasibility certificate when the configuration admits no
/// safe continuation at all.
fn settle_failure(c: &Campaign, cfg: &EpisodeConfig, v: Verdict) -> Result<Verdict, VerifyError> {
    if v.outcome() == Outcome::SafeVerified {
        return Ok(v);
    }
    let f = classify_feasibility(cfg, c.spec.formula())?;
    match (f.class, f.ics) {
        (Feasibility::SafetyInfeasible, Some(ics)) => Ok(v.into_infeasible(ics)),
        _ => Ok(v),
    }
}

fn formal_verdict(c: &Campaign, cfg: &EpisodeConfig) -> Result<Verdict, VerifyError> {
    let (v, _) = verify_a_priori(cfg, &c.policy, c.spec.formula(), &c.registry, &c.apriori)?;
    settle_failure(c, cfg, v)
}

/// Verdict at one scenario under the campaign mode.
pub fn verify_scenario(c: &Campaign, s: &Scenario) -> Result<(Verdict, Method), VerifyError> {
    let cfg = c.binding.apply(&c.base, &c.space, s)?;
    match c.mode {
        Mode::SampleBased => Ok((sample_verdict(c, &cfg)?, Method::Sample)),
        Mode::Formal => Ok((formal_verdict(c, &cfg)?, Method::Formal)),
        Mode::Mixed => {
            if c.policy.is_transparent() {
                let v = formal_verdict(c, &cfg)?;
                if v.outcome() != Outcome::Unknown {
                    return Ok((v, Method::Formal));
                }
            }
            Ok((settle_failure(c, &cfg, sample_verdict(c, &cfg)?)?, Method::Sample))
        }
    }
}

/// Conjunctive verdict over the cell's probe points.
pub fn verify_cell(c: &Campaign, cell: &ScenarioCell) -> Result<LedgerEntry, CoverageError> {
    let probes = match c.cell_test {
        CellTest::Center => vec![cell.center.clone()],
        CellTest::CornersAndCenter => cell.probe_points(),
    };
    let fail = |e: VerifyError| CoverageError::Cell { index: cell.index.clone(), reason: e.to_string() };
    let mut results = Vec::with_capacity(probes.len());
    for (p, s) in probes.iter().enumerate() {
        let (v, m) = verify_scenario(c, s).map_err(fail)?;
        let label = if p == 0 { format!("cell {} center", cell.index) } else { format!("cell {} corner {}", cell.index, p - 1) };
        results.push((v.with_trace(label), m));
        // a single observed violation settles the cell
        if results.last().is_some_and(|(v, _)| v.outcome() == Outcome::UnsafeObserved) {
            break;
        }
    }
    let pick = |o: Outcome| results.iter().position(|(v, _)| v.outcome() == o);
    let all = |o: Outcome| results.iter().all(|(v, _)| v.outcome() == o);
    let (chosen, agree) = if let Some(i) = pick(Outcome::UnsafeObserved) {
        (i, true)
    } else if all(Outcome::SafeVerified) || all(Outcome::SafetyInfeasible) {
        (0, true)
    } else {
        (pick(Outcome::Unknown).unwrap_or(0), all(Outcome::Unknown))
    };
    let (mut verdict, method) = results.swap_remove(chosen);
    if !agree {
        verdict = verdict.demote_unknown("probe points of the cell disagree");
    }
    Ok(LedgerEntry { index: cell.index.clone(), method, verdict })
}

/// Verify every cell and collect the ledger. Cells run in parallel; the
/// result is independent of scheduling.
pub fn run_campaign(c: &Campaign) -> Result<CoverageLedger, CoverageError> {
    c.validate()?;
    let mut ledger = CoverageLedger::new(
        c.space.clone(),
        c.resolution.clone(),
        c.spec.clone(),
        c.policy.name.clone(),
        c.mode,
        c.cell_test,
    )?
    .with_config_hash(c.config_hash.clone().unwrap_or_else(|| c.fingerprint()));
    let work = || ledger.cells().par_iter().map(|cell| verify_cell(c, cell)).collect::<Vec<_>>();
    let results = match c.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CoverageError::Pool(e.to_string()))?
            .install(work),
        None => work(),
    };
    // merge in enumeration order so the first failing cell is reported
    for r in results {
        ledger.insert(r?)?;
    }
    Ok(ledger)
}
