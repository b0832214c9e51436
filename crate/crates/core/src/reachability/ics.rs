//! Inevitable-collision-state classification.
//!
//! A state is inevitable when every admissible control sequence enters the
//! unsafe set within the horizon, for every disturbance in its box. Both
//! verdicts come with a whole-cell certificate:
//!
//! * inevitable: the box of all successors of the cell under the full
//!   control box lies inside the unsafe set at some sample time;
//! * avoidable: one constant control from a sample grid over the control
//!   box keeps the swept tube of the cell outside the unsafe set and inside
//!   the domain for the whole horizon.
//!
//! Cells with neither certificate are reported as boundary cells.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::StateSet;
use super::models::DynamicalSystem;
use super::reach::{forced_entry_step, reach, QuantD, ReachMode, ReachResult, ReachSpec};
use super::ReachError;
use crate::interval::IBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcsVerdict {
    Inevitable,
    Avoidable,
    BoundaryUnknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcsReport {
    pub verdict: IcsVerdict,
    /// Constant control proving avoidability.
    pub evasion: Option<Vec<f64>>,
    /// Step by which every control has entered the unsafe set.
    pub entry_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcsOptions {
    /// Evasion candidates per control axis (endpoints included).
    pub evasion_samples: usize,
}

impl Default for IcsOptions {
    fn default() -> Self {
        Self { evasion_samples: 3 }
    }
}

/// Unsafe region queried by whole boxes.
pub trait Region: Sync {
    /// Every point of `b` is unsafe.
    fn contains_box(&self, b: &IBox) -> bool;
    /// Some point of `b` may be unsafe.
    fn meets_box(&self, b: &IBox) -> bool;
}

impl Region for StateSet {
    fn contains_box(&self, b: &IBox) -> bool {
        StateSet::contains_box(self, b)
    }
    fn meets_box(&self, b: &IBox) -> bool {
        StateSet::meets_box(self, b)
    }
}

/// `{x : x[axis] < bound}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    pub axis: usize,
    pub bound: f64,
}

impl Region for HalfSpace {
    fn contains_box(&self, b: &IBox) -> bool {
        b.0[self.axis].hi < self.bound
    }
    fn meets_box(&self, b: &IBox) -> bool {
        b.0[self.axis].lo < self.bound
    }
}

fn d_quantifier(sys: &DynamicalSystem) -> QuantD {
    if sys.d_box.dim() > 0 {
        QuantD::ForAll
    } else {
        QuantD::None
    }
}

/// Cells certified inevitable within `horizon` seconds, tagged `Under`.
pub fn unsafe_backward_set(
    sys: &DynamicalSystem,
    unsafe_set: &StateSet,
    horizon: f64,
    step: f64,
) -> Result<ReachResult, ReachError> {
    let spec = ReachSpec::min_brs(horizon).with_mode(ReachMode::Tube).with_d(d_quantifier(sys));
    reach(sys, unsafe_set, &spec, step)
}

/// Constant control from the sample grid whose swept tube from `b` avoids
/// `unsafe_set` and stays in the domain for `n` steps.
pub fn find_evasion<R: Region + ?Sized>(
    sys: &DynamicalSystem,
    b: &IBox,
    unsafe_set: &R,
    n: usize,
    h: f64,
    samples: usize,
) -> Option<Vec<f64>> {
    if unsafe_set.meets_box(b) {
        return None;
    }
    sys.u_box.sample_grid(samples).into_iter().find(|u| {
        let ub = IBox::point(u);
        let mut x = b.clone();
        for _ in 0..n {
            let swept = sys.flow.sweep_enclosure(&x, &ub, &sys.d_box, h);
            if !sys.x_box.contains_box(&swept) || unsafe_set.meets_box(&swept) {
                return false;
            }
            x = sys.flow.step_enclosure(&x, &ub, &sys.d_box, h);
        }
        true
    })
}

fn classify_box<R: Region + ?Sized>(
    sys: &DynamicalSystem,
    b: &IBox,
    unsafe_set: &R,
    n: usize,
    h: f64,
    opts: &IcsOptions,
) -> IcsReport {
    if let Some(k) = forced_entry_step(sys, b, &sys.u_box, &sys.d_box, unsafe_set, n, h, true) {
        return IcsReport { verdict: IcsVerdict::Inevitable, evasion: None, entry_step: Some(k) };
    }
    match find_evasion(sys, b, unsafe_set, n, h, opts.evasion_samples) {
        Some(u) => IcsReport { verdict: IcsVerdict::Avoidable, evasion: Some(u), entry_step: None },
        None => IcsReport { verdict: IcsVerdict::BoundaryUnknown, evasion: None, entry_step: None },
    }
}

fn horizon_steps(horizon: f64, step: f64) -> Result<usize, ReachError> {
    ReachSpec::min_brs(horizon).steps(step)
}

pub fn ics_check(
    sys: &DynamicalSystem,
    x0: &[f64],
    unsafe_set: &StateSet,
    horizon: f64,
    step: f64,
) -> Result<IcsVerdict, ReachError> {
    Ok(ics_check_with(sys, x0, unsafe_set, horizon, step, &IcsOptions::default())?.verdict)
}

/// Classify the grid cell holding `x0`.
pub fn ics_check_with(
    sys: &DynamicalSystem,
    x0: &[f64],
    unsafe_set: &StateSet,
    horizon: f64,
    step: f64,
    opts: &IcsOptions,
) -> Result<IcsReport, ReachError> {
    let n = horizon_steps(horizon, step)?;
    let geom = unsafe_set.geometry();
    if geom.domain() != sys.x_box {
        return Err(ReachError::Geometry("unsafe set grid differs from the state box".into()));
    }
    let cell = geom
        .cell_of_point(x0)
        .ok_or_else(|| ReachError::OutOfDomain(format!("state {x0:?} lies outside {}", sys.x_box)))?;
    Ok(classify_box(sys, &geom.cell_box(&cell), unsafe_set, n, step, opts))
}

/// Classify an arbitrary box of initial states against `region`.
pub fn ics_check_box<R: Region + ?Sized>(
    sys: &DynamicalSystem,
    b: &IBox,
    region: &R,
    horizon: f64,
    step: f64,
    opts: &IcsOptions,
) -> Result<IcsReport, ReachError> {
    let n = horizon_steps(horizon, step)?;
    if b.dim() != sys.dim_x() || !sys.x_box.contains_box(b) {
        return Err(ReachError::OutOfDomain(format!("box {b} lies outside {}", sys.x_box)));
    }
    Ok(classify_box(sys, b, region, n, step, opts))
}

/// Verdict for every cell of the grid, row-major.
pub fn ics_map(
    sys: &DynamicalSystem,
    unsafe_set: &StateSet,
    horizon: f64,
    step: f64,
    opts: &IcsOptions,
) -> Result<Vec<IcsVerdict>, ReachError> {
    let n = horizon_steps(horizon, step)?;
    let geom = unsafe_set.geometry();
    Ok((0..geom.total_cells())
        .into_par_iter()
        .map(|lin| classify_box(sys, &geom.cell_box(&geom.unravel(lin)), unsafe_set, n, step, opts).verdict)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reachability::grid::GridGeometry;
    use crate::reachability::models::DoubleIntegrator;
    use std::sync::Arc;

    fn wall(p_wall: f64) -> (DynamicalSystem, StateSet) {
        let sys = DynamicalSystem::new(
            Arc::new(DoubleIntegrator),
            IBox::from_bounds(&[-40.0, -20.0], &[30.0, 20.0]),
            IBox::from_bounds(&[-5.0], &[5.0]),
            IBox::empty_dims(),
        )
        .unwrap();
        let g = GridGeometry::with_widths(&sys.x_box, &[0.2, 0.1]).unwrap();
        let unsafe_set = StateSet::from_predicate(g, |b| b.0[0].lo >= p_wall - 1e-9);
        (sys, unsafe_set)
    }

    #[test]
    fn braking_distance_examples() {
        let (sys, u8) = wall(8.0);
        assert_eq!(ics_check(&sys, &[0.0, 10.0], &u8, 3.0, 0.01).unwrap(), IcsVerdict::Inevitable);
        let (sys, u12) = wall(12.0);
        assert_eq!(ics_check(&sys, &[0.0, 10.0], &u12, 3.0, 0.01).unwrap(), IcsVerdict::Avoidable);
        assert!(ics_check(&sys, &[100.0, 0.0], &u12, 3.0, 0.01).is_err());
    }

    #[test]
    fn half_space_braking_threshold() {
        // relative model against a stopped lead: stopping distance 10 m
        let sys = DynamicalSystem::new(
            Arc::new(crate::reachability::models::RelativeLongitudinal),
            IBox::from_bounds(&[-1e3, -50.0, -50.0], &[1e3, 50.0, 50.0]),
            IBox::from_bounds(&[-5.0], &[5.0]),
            IBox::from_bounds(&[0.0], &[0.0]),
        )
        .unwrap();
        let collide = HalfSpace { axis: 0, bound: 0.0 };
        let opts = IcsOptions::default();
        let at = |g: f64| ics_check_box(&sys, &IBox::point(&[g, 10.0, 0.0]), &collide, 3.0, 0.01, &opts).unwrap();
        assert_eq!(at(9.9).verdict, IcsVerdict::Inevitable);
        assert_eq!(at(10.1).verdict, IcsVerdict::Avoidable);
        assert!(collide.meets_box(&IBox::from_bounds(&[-1.0, 0.0], &[1.0, 1.0])));
        assert!(!collide.contains_box(&IBox::from_bounds(&[-1.0, 0.0], &[1.0, 1.0])));
    }

    #[test]
    fn backward_set_membership() {
        let (sys, u8) = wall(8.0);
        let s = unsafe_backward_set(&sys, &u8, 3.0, 0.05).unwrap();
        assert_eq!(s.approx(), crate::reachability::Approx::Under);
        assert!(s.contains_point(&[0.05, 10.05]));
        assert!(!s.contains_point(&[-4.95, 10.05]));
    }
}
