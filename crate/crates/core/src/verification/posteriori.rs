//! Trace-replay verification.

use super::verdict::{Evidence, Outcome, Verdict, Violation};
use super::VerifyError;
use crate::stl::{monitor_trace, time_eps, window_range, EvalTree, PredicateRegistry, Signal, StlFormula};

/// Earliest sample explaining why `f` fails at `k`: `G` points at the first
/// failing sample in its window, `∧` at its first failing conjunct, and
/// every other operator at `k` itself.
fn witness(f: &StlFormula, tree: &EvalTree, times: &[f64], k: usize) -> usize {
    match f {
        StlFormula::And(a, b) => {
            if !tree.children[0].verdicts[k] {
                witness(a, &tree.children[0], times, k)
            } else {
                witness(b, &tree.children[1], times, k)
            }
        }
        StlFormula::Always(i, g) => {
            let (lo, hi) = window_range(times, k, i);
            let child = &tree.children[0];
            match (lo..hi).find(|&j| !child.verdicts[j]) {
                Some(j) => witness(g, child, times, j),
                None => k,
            }
        }
        _ => k,
    }
}

/// `SafeVerified` iff the trace satisfies `phi` at its first sample.
pub fn verify_a_posteriori(
    trace: &Signal,
    phi: &StlFormula,
    registry: &PredicateRegistry,
) -> Result<Verdict, VerifyError> {
    let eval = monitor_trace(trace, phi, registry)?;
    let times = trace.times();
    let span = trace.last_time() - trace.first_time();
    let horizon = phi.horizon();
    let truncated = horizon.is_finite() && horizon > span + time_eps(horizon);
    let spec = phi.to_string();
    let mut evidence = Evidence { truncated, ..Evidence::default() };
    if eval.verdicts[0] {
        return Ok(Verdict::new(Outcome::SafeVerified, evidence, spec)?);
    }
    let sample = witness(phi, &eval.tree, times, 0);
    evidence.violation = Some(Violation { sample, time: times[sample] });
    Ok(Verdict::new(Outcome::UnsafeObserved, evidence, spec)?)
}
