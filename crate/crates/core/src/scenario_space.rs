//! Parameterized operational design domains.
//!
//! A [`ScenarioSpace`] is the product of closed continuous ranges and finite
//! label sets. Its volume multiplies range lengths by label-set cardinalities,
//! so each discrete combination contributes one full copy of the continuous
//! box. Units are therefore inhomogeneous whenever both kinds are present.
//!
//! Verification cells tile every continuous range with boxes of width `2w`.
//! When a range is not a multiple of `2w`, the last box along that axis is
//! shifted down so its upper face sits on the range bound; it overlaps its
//! neighbour and owns only the leftover slab for volume accounting.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ratios within this relative distance of an integer are treated as integral
/// when taking ceilings, so `10 / 2` does not become 6 through rounding.
const CEIL_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("parameter `{name}`: lower bound {lower} must be below upper bound {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("discrete parameter `{0}` has no values")]
    EmptyDiscrete(String),
    #[error("discrete parameter `{name}` repeats label `{label}`")]
    DuplicateLabel { name: String, label: String },
    #[error("scenario space `{0}` declares no parameters")]
    NoParameters(String),
    #[error("scenario space volume {0} is not strictly positive and finite")]
    DegenerateVolume(f64),
    #[error("resolution has {got} half-widths, space has {expected} continuous parameters")]
    ResolutionDimension { expected: usize, got: usize },
    #[error("half-width {w} for `{name}` must be positive with 2w <= range {range}")]
    ResolutionWidth { name: String, w: f64, range: f64 },
    #[error("verified volume {volume} outside [0, {max}]")]
    VolumeOutOfRange { volume: f64, max: f64 },
    #[error("required scenario count must be at least 1")]
    ZeroRequirement,
    #[error("verified count {verified} exceeds required count {required}")]
    CountExceedsRequirement { verified: u64, required: u64 },
    #[error("scenario does not belong to the space: {0}")]
    ForeignScenario(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousParam {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ContinuousParam {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), lower, upper }
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteParam {
    pub name: String,
    pub values: Vec<String>,
}

impl DiscreteParam {
    pub fn new<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Self { name: name.into(), values: values.into_iter().map(Into::into).collect() }
    }
}

/// Scenario space of one ODD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct ScenarioSpace {
    odd_name: String,
    continuous: Vec<ContinuousParam>,
    discrete: Vec<DiscreteParam>,
}

#[derive(Deserialize)]
struct RawSpace {
    odd_name: String,
    #[serde(default)]
    continuous: Vec<ContinuousParam>,
    #[serde(default)]
    discrete: Vec<DiscreteParam>,
}

impl TryFrom<RawSpace> for ScenarioSpace {
    type Error = SpaceError;
    fn try_from(raw: RawSpace) -> Result<Self, SpaceError> {
        ScenarioSpace::new(raw.odd_name, raw.continuous, raw.discrete)
    }
}

impl ScenarioSpace {
    pub fn new(
        odd_name: impl Into<String>,
        continuous: Vec<ContinuousParam>,
        discrete: Vec<DiscreteParam>,
    ) -> Result<Self, SpaceError> {
        let odd_name = odd_name.into();
        if continuous.is_empty() && discrete.is_empty() {
            return Err(SpaceError::NoParameters(odd_name));
        }
        let mut names = HashSet::new();
        for p in &continuous {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(SpaceError::InvalidBounds {
                    name: p.name.clone(),
                    lower: p.lower,
                    upper: p.upper,
                });
            }
            if !names.insert(p.name.clone()) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        for q in &discrete {
            if q.values.is_empty() {
                return Err(SpaceError::EmptyDiscrete(q.name.clone()));
            }
            let mut labels = HashSet::new();
            for v in &q.values {
                if !labels.insert(v) {
                    return Err(SpaceError::DuplicateLabel { name: q.name.clone(), label: v.clone() });
                }
            }
            if !names.insert(q.name.clone()) {
                return Err(SpaceError::DuplicateName(q.name.clone()));
            }
        }
        let space = Self { odd_name, continuous, discrete };
        let v = space_volume(&space);
        if !(v.is_finite() && v > 0.0) {
            return Err(SpaceError::DegenerateVolume(v));
        }
        Ok(space)
    }

    pub fn odd_name(&self) -> &str {
        &self.odd_name
    }

    pub fn continuous(&self) -> &[ContinuousParam] {
        &self.continuous
    }

    pub fn discrete(&self) -> &[DiscreteParam] {
        &self.discrete
    }

    /// Number of distinct discrete combinations, `∏ |Q_j|` (1 with no discrete parameters).
    pub fn discrete_combinations(&self) -> u64 {
        self.discrete.iter().map(|q| q.values.len() as u64).product()
    }

    pub fn contains(&self, s: &Scenario) -> bool {
        s.continuous_values.len() == self.continuous.len()
            && s.discrete_values.len() == self.discrete.len()
            && self
                .continuous
                .iter()
                .zip(&s.continuous_values)
                .all(|(p, &v)| p.lower <= v && v <= p.upper)
            && self.discrete.iter().zip(&s.discrete_values).all(|(q, v)| q.values.contains(v))
    }

    /// Value of a named parameter in a scenario, continuous first.
    pub fn continuous_value(&self, s: &Scenario, name: &str) -> Option<f64> {
        self.continuous.iter().position(|p| p.name == name).map(|k| s.continuous_values[k])
    }

    pub fn discrete_value<'a>(&self, s: &'a Scenario, name: &str) -> Option<&'a str> {
        self.discrete.iter().position(|q| q.name == name).map(|k| s.discrete_values[k].as_str())
    }
}

/// Tolerable resolution: one half-width per continuous parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    half_widths: Vec<f64>,
}

impl Resolution {
    pub fn new(space: &ScenarioSpace, half_widths: Vec<f64>) -> Result<Self, SpaceError> {
        if half_widths.len() != space.continuous.len() {
            return Err(SpaceError::ResolutionDimension {
                expected: space.continuous.len(),
                got: half_widths.len(),
            });
        }
        for (p, &w) in space.continuous.iter().zip(&half_widths) {
            // a relative slack lets w = range/2 pass despite rounding
            if !(w.is_finite() && w > 0.0 && 2.0 * w <= p.range() * (1.0 + 1e-12)) {
                return Err(SpaceError::ResolutionWidth { name: p.name.clone(), w, range: p.range() });
            }
        }
        Ok(Self { half_widths })
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }

    fn check(&self, space: &ScenarioSpace) -> Result<(), SpaceError> {
        if self.half_widths.len() != space.continuous.len() {
            return Err(SpaceError::ResolutionDimension {
                expected: space.continuous.len(),
                got: self.half_widths.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub continuous_values: Vec<f64>,
    pub discrete_values: Vec<String>,
}

/// Integer coordinates of a cell: one tile index per continuous parameter,
/// then one label index per discrete parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellIndex(pub Vec<usize>);

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl std::str::FromStr for CellIndex {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(CellIndex(Vec::new()));
        }
        s.split(',').map(|p| p.trim().parse()).collect::<Result<Vec<_>, _>>().map(CellIndex)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCell {
    pub index: CellIndex,
    pub center: Scenario,
    /// Test box `center ± w` along each continuous axis.
    pub bounds: Vec<(f64, f64)>,
    /// Slab this cell owns for volume accounting; slabs partition the space.
    pub owned: Vec<(f64, f64)>,
}

impl ScenarioCell {
    /// Volume owned by this cell (one discrete combination).
    pub fn volume(&self) -> f64 {
        self.owned.iter().map(|(a, b)| b - a).product()
    }

    /// Center plus every corner of the test box; corners are clipped to the
    /// owned slab's enclosing space automatically because test boxes never
    /// exceed the space.
    pub fn probe_points(&self) -> Vec<Scenario> {
        let n = self.bounds.len();
        let mut out = vec![self.center.clone()];
        for mask in 0..(1usize << n) {
            let values = (0..n)
                .map(|i| if mask >> i & 1 == 1 { self.bounds[i].1 } else { self.bounds[i].0 })
                .collect();
            out.push(Scenario { continuous_values: values, discrete_values: self.center.discrete_values.clone() });
        }
        out
    }
}

/// `V_S = ∏ (upper - lower) · ∏ |Q_j|`.
pub fn space_volume(space: &ScenarioSpace) -> f64 {
    let continuous: f64 = space.continuous.iter().map(ContinuousParam::range).product();
    continuous * space.discrete_combinations() as f64
}

/// `V_0 = ∏ 2 w_i`; discrete parameters do not enter.
pub fn unit_volume(space: &ScenarioSpace, res: &Resolution) -> Result<f64, SpaceError> {
    res.check(space)?;
    Ok(res.half_widths.iter().map(|w| 2.0 * w).product())
}

/// `n = ⌈V_S / V_0⌉`, at least 1.
pub fn required_samples(space: &ScenarioSpace, res: &Resolution) -> Result<u64, SpaceError> {
    let v0 = unit_volume(space, res)?;
    Ok(snapped_ceil(space_volume(space) / v0).max(1))
}

pub(crate) fn snapped_ceil(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= CEIL_SNAP * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Tiles along one continuous axis: `(center, owned slab)` pairs.
fn axis_tiles(p: &ContinuousParam, w: f64) -> Vec<(f64, (f64, f64))> {
    let n = snapped_ceil(p.range() / (2.0 * w)).max(1) as usize;
    // neighbours share the same computed edge, so slabs tile without seams
    let edge = |k: usize| if k == n { p.upper } else { p.lower + 2.0 * w * k as f64 };
    (0..n)
        .map(|k| {
            let center = if k + 1 == n { p.upper - w } else { edge(k) + w };
            (center, (edge(k), edge(k + 1)))
        })
        .collect()
}

/// Number of cells `∏ ⌈range_i / 2w_i⌉ · ∏ |Q_j|` without materializing them.
pub fn cell_count(space: &ScenarioSpace, res: &Resolution) -> Result<u64, SpaceError> {
    res.check(space)?;
    let tiles: u64 = space
        .continuous
        .iter()
        .zip(&res.half_widths)
        .map(|(p, &w)| snapped_ceil(p.range() / (2.0 * w)).max(1))
        .product();
    Ok(tiles * space.discrete_combinations())
}

/// Row-major enumeration (last coordinate fastest) of every verification cell.
pub fn enumerate_cells(space: &ScenarioSpace, res: &Resolution) -> Result<Vec<ScenarioCell>, SpaceError> {
    res.check(space)?;
    let tiles: Vec<Vec<(f64, (f64, f64))>> =
        space.continuous.iter().zip(&res.half_widths).map(|(p, &w)| axis_tiles(p, w)).collect();
    let mut radix: Vec<usize> = tiles.iter().map(Vec::len).collect();
    radix.extend(space.discrete.iter().map(|q| q.values.len()));
    let total: usize = radix.iter().product();
    let nc = tiles.len();
    let mut cells = Vec::with_capacity(total);
    let mut idx = vec![0usize; radix.len()];
    for _ in 0..total {
        let mut values = Vec::with_capacity(nc);
        let mut bounds = Vec::with_capacity(nc);
        let mut owned = Vec::with_capacity(nc);
        for (i, axis) in tiles.iter().enumerate() {
            let (c, slab) = axis[idx[i]];
            let w = res.half_widths[i];
            values.push(c);
            bounds.push((c - w, c + w));
            owned.push(slab);
        }
        let labels = space
            .discrete
            .iter()
            .enumerate()
            .map(|(j, q)| q.values[idx[nc + j]].clone())
            .collect();
        cells.push(ScenarioCell {
            index: CellIndex(idx.clone()),
            center: Scenario { continuous_values: values, discrete_values: labels },
            bounds,
            owned,
        });
        for k in (0..radix.len()).rev() {
            idx[k] += 1;
            if idx[k] < radix[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(cells)
}

/// `verified_volume / V_S`; the caller intersects with the space first.
pub fn coverage_ratio(verified_volume: f64, space: &ScenarioSpace) -> Result<f64, SpaceError> {
    let vs = space_volume(space);
    let slack = 1e-9 * vs;
    if !(verified_volume >= -slack && verified_volume <= vs + slack) {
        return Err(SpaceError::VolumeOutOfRange { volume: verified_volume, max: vs });
    }
    Ok((verified_volume / vs).clamp(0.0, 1.0))
}

/// `r = N_sv / N_ODD`.
pub fn threshold_ratio(n_safe_verified: u64, n_odd_required: u64) -> Result<f64, SpaceError> {
    if n_odd_required == 0 {
        return Err(SpaceError::ZeroRequirement);
    }
    if n_safe_verified > n_odd_required {
        return Err(SpaceError::CountExceedsRequirement {
            verified: n_safe_verified,
            required: n_odd_required,
        });
    }
    Ok(n_safe_verified as f64 / n_odd_required as f64)
}
