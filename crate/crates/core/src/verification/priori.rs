//! Predictive verification with closed-loop tubes.
//!
//! At every decision sample the simulator's own discrete map is propagated
//! over boxes from the current state for the lookahead, with the ego input
//! narrowed to the policy's output envelope on the current box and the lead
//! input ranging over its acceleration box.

use serde::{Deserialize, Serialize};

use super::feasibility::{reduce, RelativeSetup};
use super::posteriori::verify_a_posteriori;
use super::verdict::{Outcome, TubeEvidence, Verdict};
use super::VerifyError;
use crate::interval::{IBox, Interval};
use crate::stl::{PredicateRegistry, StlFormula};
use crate::traffic_sim::{agent_displacement, roll_out, Episode, EpisodeConfig, ObsBox, Policy, PolicyKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AprioriOptions {
    /// Prediction horizon of each tube in seconds.
    pub lookahead: f64,
}

impl Default for AprioriOptions {
    fn default() -> Self {
        Self { lookahead: 2.0 }
    }
}

/// One step of the sampled relative dynamics over boxes: ego by zero-order
/// hold, lead stopping at zero speed. Both displacements are monotone in
/// speed and acceleration, so bounds come from the box corners.
pub fn relative_step(x: &IBox, u: Interval, d: Interval, h: f64) -> IBox {
    let (gap, ve, vl) = (x.0[0], x.0[1], x.0[2]);
    let ego = |v: f64, a: f64| v * h + 0.5 * a * h * h;
    let lead_lo = agent_displacement(vl.lo.max(0.0), d.lo, h);
    let lead_hi = agent_displacement(vl.hi.max(0.0), d.hi, h);
    IBox::new(vec![
        Interval::new(gap.lo + lead_lo - ego(ve.hi, u.hi), gap.hi + lead_hi - ego(ve.lo, u.lo)),
        ve + u * h,
        Interval::new((vl.lo + h * d.lo).max(0.0), (vl.hi + h * d.hi).max(0.0)),
    ])
    .outward()
}

/// Closed-loop tube from `x0` for `steps` steps; entry `k` encloses the
/// state `k` samples ahead.
pub fn closed_loop_tube(
    setup: &RelativeSetup,
    policy: &Policy,
    x0: &IBox,
    steps: usize,
    h: f64,
) -> Result<Vec<IBox>, VerifyError> {
    let d = setup.sys.d_box.0[0];
    let mut tube = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    tube.push(x.clone());
    for _ in 0..steps {
        let ob = ObsBox { h, v: x.0[1], lead: Some((x.0[0], x.0[2])) };
        let u = policy.accel_envelope(&ob, &setup.sys.u_box)?;
        x = relative_step(&x, u, d, h);
        tube.push(x.clone());
    }
    Ok(tube)
}

/// Predict and replay one episode. The returned episode is the completed
/// trace the verdict was checked against.
pub fn verify_a_priori(
    cfg: &EpisodeConfig,
    policy: &Policy,
    phi: &StlFormula,
    registry: &PredicateRegistry,
    opts: &AprioriOptions,
) -> Result<(Verdict, Episode), VerifyError> {
    if let PolicyKind::BlackBox(_) = policy.kind {
        return Err(VerifyError::Opaque(policy.name.clone()));
    }
    let episode = roll_out(cfg, policy)?;
    let post = verify_a_posteriori(&episode.signal, phi, registry)?;
    let spec = phi.to_string();
    if post.outcome() == Outcome::UnsafeObserved {
        return Ok((post, episode));
    }
    if episode.truncated() {
        return Ok((post.demote_unknown("episode left the simulation domain"), episode));
    }
    let red = reduce(phi, cfg.duration);
    if !red.complete || red.collision_horizon.is_none() {
        return Ok((Verdict::unknown(spec, "formula is not reducible to collision avoidance"), episode));
    }
    let setup = match RelativeSetup::from_config(cfg) {
        Ok(Some(s)) => s,
        Ok(None) => return Ok((post.with_note("no agents; every tube is trivially collision free"), episode)),
        Err(reason) => return Ok((Verdict::unknown(spec, reason), episode)),
    };

    let h = cfg.step;
    let lookahead_steps = ((opts.lookahead / h) + 1e-9).floor() as usize;
    let last = episode.signal.len() - 1;
    let mut min_gap = f64::INFINITY;
    let mut first_contact = None;
    for k in 0..episode.controls.len() {
        let state = setup.state_at(&episode.signal, k).expect("simulator channels");
        let steps = lookahead_steps.min(last - k);
        let tube = closed_loop_tube(&setup, policy, &IBox::point(&state), steps, h)?;
        for (j, b) in tube.iter().enumerate() {
            min_gap = min_gap.min(b.0[0].lo);
            if first_contact.is_none() && b.0[0].lo < 0.0 {
                first_contact = Some((k, j));
            }
        }
    }
    let evidence = TubeEvidence {
        decisions: episode.controls.len(),
        lookahead_steps,
        min_gap_lower: if min_gap.is_finite() { min_gap } else { 0.0 },
        first_contact,
    };
    let mut ev = post.evidence().clone();
    ev.tube = Some(evidence);
    let verdict = match first_contact {
        None => Verdict::new(Outcome::SafeVerified, ev, spec)?,
        Some((k, j)) => {
            ev.note = Some(format!("tube from sample {k} may reach contact {j} steps ahead"));
            Verdict::new(Outcome::Unknown, ev, spec)?
        }
    };
    Ok((verdict, episode))
}
