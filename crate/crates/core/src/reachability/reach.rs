//! Grid-and-interval set propagation.
//!
//! Existential control (`Over` results): every seed cell's box is carried
//! through the one-step enclosure over the whole control box, clipped to the
//! domain and rasterized at every sample time. Carrying boxes rather than
//! re-seeding from cells keeps the over-approximation from growing by a
//! cell per step.
//!
//! Universal control (`Under` results):
//! * backward, a cell belongs to the set when the box of all its successors
//!   under every control lies inside the target at the final step (or, for
//!   tubes, at some step);
//! * forward, a cell belongs to step `k+1` when, for every piece of a
//!   partition of the control box, a certified preimage enclosure of the
//!   cell lies inside step `k`.
//!
//! Disturbances: `None` freezes `d` at the center of its box, `Exists` lets
//! it range over the box like a second control, `ForAll` makes it
//! adversarial. Under existential control the adversarial case takes, per
//! piece of the control partition, the intersection of images over sampled
//! disturbances and then the hull over pieces; its tag is flagged heuristic
//! in the metadata.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{for_each_in_range, Approx, GridGeometry, StateSet};
use super::models::DynamicalSystem;
use super::ics::Region;
use super::ReachError;
use crate::interval::IBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantU {
    Exists,
    ForAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantD {
    None,
    Exists,
    ForAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachMode {
    SetAtTime,
    Tube,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachSpec {
    pub direction: Direction,
    pub quantifier_u: QuantU,
    pub quantifier_d: QuantD,
    /// `[t0, t]` in seconds.
    pub horizon: (f64, f64),
    pub mode: ReachMode,
}

impl ReachSpec {
    fn make(direction: Direction, quantifier_u: QuantU, quantifier_d: QuantD, t: f64, mode: ReachMode) -> Self {
        Self { direction, quantifier_u, quantifier_d, horizon: (0.0, t), mode }
    }

    pub fn max_frs(t: f64) -> Self {
        Self::make(Direction::Forward, QuantU::Exists, QuantD::None, t, ReachMode::SetAtTime)
    }

    pub fn min_frs(t: f64) -> Self {
        Self::make(Direction::Forward, QuantU::ForAll, QuantD::None, t, ReachMode::SetAtTime)
    }

    pub fn max_brs(t: f64) -> Self {
        Self::make(Direction::Backward, QuantU::Exists, QuantD::None, t, ReachMode::SetAtTime)
    }

    pub fn min_brs(t: f64) -> Self {
        Self::make(Direction::Backward, QuantU::ForAll, QuantD::None, t, ReachMode::SetAtTime)
    }

    pub fn max_frt(t: f64) -> Self {
        Self::make(Direction::Forward, QuantU::Exists, QuantD::None, t, ReachMode::Tube)
    }

    pub fn adversarial_frs(t: f64) -> Self {
        Self::make(Direction::Forward, QuantU::Exists, QuantD::ForAll, t, ReachMode::SetAtTime)
    }

    pub fn with_d(mut self, q: QuantD) -> Self {
        self.quantifier_d = q;
        self
    }

    pub fn with_mode(mut self, mode: ReachMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn duration(&self) -> f64 {
        self.horizon.1 - self.horizon.0
    }

    /// Number of integration steps covering the horizon.
    pub fn steps(&self, step: f64) -> Result<usize, ReachError> {
        let (t0, t1) = self.horizon;
        if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
            return Err(ReachError::Spec(format!("horizon [{t0}, {t1}] is empty")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(ReachError::Spec(format!("step {step} must be positive")));
        }
        let n = (t1 - t0) / step;
        let k = n.round();
        if (n - k).abs() > 1e-6 * n.max(1.0) {
            return Err(ReachError::Spec(format!("step {step} does not divide horizon length {}", t1 - t0)));
        }
        Ok(k as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachOptions {
    /// Pieces per control axis in universal-control modes and the
    /// adversarial min-max.
    pub input_splits: usize,
    /// Disturbance sample points per axis for the adversarial min-max.
    pub d_samples: usize,
    /// Keep the set at every sample time in [`ReachResult::steps`].
    pub keep_steps: bool,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self { input_splits: 2, d_samples: 3, keep_steps: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReachMetadata {
    pub steps: usize,
    pub step: f64,
    /// Some propagated enclosure left the domain and was cut back to it.
    pub clipped: bool,
    /// Result of the adversarial min-max, sound only as a heuristic.
    pub heuristic: bool,
}

#[derive(Debug, Clone)]
pub struct ReachResult {
    pub set: StateSet,
    /// Sets at `t0, t0+h, ...`, when requested.
    pub steps: Vec<StateSet>,
    pub metadata: ReachMetadata,
}

impl std::ops::Deref for ReachResult {
    type Target = StateSet;
    fn deref(&self) -> &StateSet {
        &self.set
    }
}

pub fn reach(sys: &DynamicalSystem, seed: &StateSet, spec: &ReachSpec, step: f64) -> Result<ReachResult, ReachError> {
    reach_with(sys, seed, spec, step, &ReachOptions::default())
}

pub fn reach_with(
    sys: &DynamicalSystem,
    seed: &StateSet,
    spec: &ReachSpec,
    step: f64,
    opts: &ReachOptions,
) -> Result<ReachResult, ReachError> {
    let n = spec.steps(step)?;
    check_inputs(sys, seed, spec)?;
    let mut result = match spec.quantifier_u {
        QuantU::Exists => exists_reach(sys, seed, spec, n, step, opts),
        QuantU::ForAll => match spec.direction {
            Direction::Backward => forall_backward(sys, seed, spec, n, step, opts),
            Direction::Forward => forall_forward(sys, seed, spec, n, step, opts),
        },
    };
    result.metadata.steps = n;
    result.metadata.step = step;
    Ok(result)
}

fn check_inputs(sys: &DynamicalSystem, seed: &StateSet, spec: &ReachSpec) -> Result<(), ReachError> {
    if seed.is_empty() {
        return Err(ReachError::Spec("seed set is empty".into()));
    }
    let geom = seed.geometry();
    if geom.dim() != sys.dim_x() {
        return Err(ReachError::Geometry(format!(
            "{}-dimensional grid for a {}-dimensional system",
            geom.dim(),
            sys.dim_x()
        )));
    }
    if geom.domain() != sys.x_box {
        return Err(ReachError::Geometry(format!(
            "grid domain {} differs from the state box {}",
            geom.domain(),
            sys.x_box
        )));
    }
    if spec.quantifier_d != QuantD::None && sys.d_box.dim() == 0 {
        return Err(ReachError::Spec("disturbance quantifier set for a system without disturbance".into()));
    }
    Ok(())
}

/// Collects per-step rasterizations for one propagation.
#[derive(Clone)]
struct Sink {
    final_set: StateSet,
    tube: Option<StateSet>,
    steps: Vec<StateSet>,
    clipped: bool,
}

impl Sink {
    fn new(geom: &GridGeometry, spec: &ReachSpec, n: usize, keep: bool, approx: Approx) -> Self {
        let empty = StateSet::empty(geom.clone(), approx);
        Self {
            final_set: empty.clone(),
            tube: (spec.mode == ReachMode::Tube).then(|| empty.clone()),
            steps: if keep { vec![empty; n + 1] } else { Vec::new() },
            clipped: false,
        }
    }

    fn record(&mut self, k: usize, n: usize, b: &IBox) {
        if let Some(t) = &mut self.tube {
            t.insert_box(b);
        }
        if k == n {
            self.final_set.insert_box(b);
        }
        if let Some(s) = self.steps.get_mut(k) {
            s.insert_box(b);
        }
    }

    fn merge(mut self, other: Sink) -> Sink {
        self.final_set.union_with(&other.final_set).expect("same grid");
        if let (Some(a), Some(b)) = (&mut self.tube, &other.tube) {
            a.union_with(b).expect("same grid");
        }
        for (a, b) in self.steps.iter_mut().zip(&other.steps) {
            a.union_with(b).expect("same grid");
        }
        self.clipped |= other.clipped;
        self
    }

    fn finish(self, metadata: ReachMetadata) -> ReachResult {
        let set = self.tube.unwrap_or(self.final_set);
        ReachResult { set, steps: self.steps, metadata: ReachMetadata { clipped: self.clipped, ..metadata } }
    }
}

/// One-step image (or preimage) of a box under existential control.
fn exists_map(sys: &DynamicalSystem, spec: &ReachSpec, opts: &ReachOptions, b: &IBox, h: f64) -> Option<IBox> {
    let f = &sys.flow;
    let image = |u: &IBox, d: &IBox| -> Option<IBox> {
        match spec.direction {
            Direction::Forward => Some(f.step_enclosure(b, u, d, h)),
            Direction::Backward => f.preimage_enclosure(b, u, d, h, &sys.x_box).map(|p| p.hull),
        }
    };
    match spec.quantifier_d {
        QuantD::None => image(&sys.u_box, &sys.d_center()),
        QuantD::Exists => image(&sys.u_box, &sys.d_box),
        QuantD::ForAll => {
            let ds = sys.d_box.sample_grid(opts.d_samples);
            let worst = |u: &IBox| -> Option<IBox> {
                let mut inter = image(u, &IBox::point(&ds[0]))?;
                for d in &ds[1..] {
                    inter = inter.intersect(&image(u, &IBox::point(d))?)?;
                }
                Some(inter)
            };
            sys.u_box
                .split_grid(opts.input_splits)
                .iter()
                .filter_map(worst)
                .reduce(|acc, b| acc.hull(&b))
        }
    }
}

fn exists_reach(
    sys: &DynamicalSystem,
    seed: &StateSet,
    spec: &ReachSpec,
    n: usize,
    h: f64,
    opts: &ReachOptions,
) -> ReachResult {
    let geom = seed.geometry();
    let seeds: Vec<usize> = seed.linear_cells().collect();
    let blank = Sink::new(geom, spec, n, opts.keep_steps, Approx::Over);
    let sink = seeds
        .par_iter()
        .fold(
            || blank.clone(),
            |mut sink, &lin| {
                let mut b = geom.cell_box(&geom.unravel(lin));
                sink.record(0, n, &b);
                for k in 1..=n {
                    let Some(next) = exists_map(sys, spec, opts, &b, h) else {
                        break;
                    };
                    let Some(clipped) = next.intersect(&sys.x_box) else {
                        sink.clipped = true;
                        break;
                    };
                    if clipped != next {
                        sink.clipped = true;
                    }
                    b = clipped;
                    sink.record(k, n, &b);
                }
                sink
            },
        )
        .reduce(|| blank.clone(), Sink::merge);
    sink.finish(ReachMetadata { heuristic: spec.quantifier_d == QuantD::ForAll, ..Default::default() })
}

/// Disturbance box used when the control is universally quantified; an
/// existential disturbance is fixed to one witness, the center.
fn forall_d(sys: &DynamicalSystem, spec: &ReachSpec) -> IBox {
    match spec.quantifier_d {
        QuantD::ForAll => sys.d_box.clone(),
        QuantD::None | QuantD::Exists => sys.d_center(),
    }
}

/// First step `k ≤ n` at which every trajectory from `b` under any control
/// in `u` lies in `target`, checking only `k = n` unless `any_step`.
pub(crate) fn forced_entry_step<R: Region + ?Sized>(
    sys: &DynamicalSystem,
    b: &IBox,
    u: &IBox,
    d: &IBox,
    target: &R,
    n: usize,
    h: f64,
    any_step: bool,
) -> Option<usize> {
    let mut b = b.clone();
    for k in 0..=n {
        if (any_step || k == n) && target.contains_box(&b) {
            return Some(k);
        }
        if k == n {
            break;
        }
        b = sys.flow.step_enclosure(&b, u, d, h);
        if !sys.x_box.contains_box(&b) {
            return None;
        }
    }
    None
}

fn forall_backward(
    sys: &DynamicalSystem,
    target: &StateSet,
    spec: &ReachSpec,
    n: usize,
    h: f64,
    opts: &ReachOptions,
) -> ReachResult {
    let geom = target.geometry();
    let d = forall_d(sys, spec);
    let tube = spec.mode == ReachMode::Tube;
    let hits: Vec<(usize, usize)> = (0..geom.total_cells())
        .into_par_iter()
        .filter_map(|lin| {
            let b = geom.cell_box(&geom.unravel(lin));
            forced_entry_step(sys, &b, &sys.u_box, &d, target, n, h, tube).map(|k| (lin, k))
        })
        .collect();
    let mut set = StateSet::empty(geom.clone(), Approx::Under);
    for &(lin, _) in &hits {
        set.insert_linear(lin);
    }
    let mut steps = Vec::new();
    if opts.keep_steps {
        // step k holds cells certified within n - k remaining steps
        steps = (0..=n)
            .map(|k| {
                let mut s = StateSet::empty(geom.clone(), Approx::Under);
                for &(lin, j) in &hits {
                    if (tube && j <= n - k) || j == n - k {
                        s.insert_linear(lin);
                    }
                }
                s
            })
            .collect();
    }
    ReachResult { set, steps, metadata: ReachMetadata::default() }
}

fn forall_forward(
    sys: &DynamicalSystem,
    seed: &StateSet,
    spec: &ReachSpec,
    n: usize,
    h: f64,
    opts: &ReachOptions,
) -> ReachResult {
    let geom = seed.geometry();
    let d = forall_d(sys, spec);
    let pieces = sys.u_box.split_grid(opts.input_splits);
    let mut current = seed.clone().with_approx(Approx::Under);
    let mut tube = current.clone();
    let mut steps = Vec::new();
    if opts.keep_steps {
        steps.push(current.clone());
    }
    for _ in 0..n {
        // candidates: cells meeting the existential image of the current set
        let mut candidates = StateSet::empty(geom.clone(), Approx::Over);
        for lin in current.linear_cells() {
            let img = sys.flow.step_enclosure(&geom.cell_box(&geom.unravel(lin)), &sys.u_box, &d, h);
            candidates.insert_box(&img);
        }
        let cand: Vec<usize> = candidates.linear_cells().collect();
        let keep: Vec<usize> = cand
            .into_par_iter()
            .filter(|&lin| {
                let cb = geom.cell_box(&geom.unravel(lin));
                pieces.iter().all(|u| match sys.flow.preimage_enclosure(&cb, u, &d, h, &sys.x_box) {
                    Some(p) => p.certified && current.contains_box(&p.hull),
                    None => false,
                })
            })
            .collect();
        let mut next = StateSet::empty(geom.clone(), Approx::Under);
        for lin in keep {
            next.insert_linear(lin);
        }
        tube.union_with(&next).expect("same grid");
        if opts.keep_steps {
            steps.push(next.clone());
        }
        current = next;
    }
    let set = if spec.mode == ReachMode::Tube { tube } else { current };
    ReachResult { set, steps, metadata: ReachMetadata::default() }
}

/// All cells of `geom` whose box meets `b`, as a seed.
pub fn seed_from_box(geom: &GridGeometry, b: &IBox) -> StateSet {
    StateSet::from_box(geom.clone(), b)
}

/// Cells of the inclusive index range, as a seed.
pub fn seed_from_range(geom: &GridGeometry, lo: &[usize], hi: &[usize]) -> StateSet {
    let mut s = StateSet::empty(geom.clone(), Approx::Exact);
    for_each_in_range(lo, hi, |idx| s.insert(idx));
    s
}
