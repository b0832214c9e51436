//! Uniform grid over the state domain and cell-set representation.

use std::sync::OnceLock;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::ReachError;
use crate::interval::{IBox, Interval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl GridGeometry {
    pub fn new(domain: &IBox, counts: Vec<usize>) -> Result<Self, ReachError> {
        if domain.dim() == 0 || domain.dim() != counts.len() {
            return Err(ReachError::Geometry(format!(
                "{} count(s) for a {}-dimensional domain",
                counts.len(),
                domain.dim()
            )));
        }
        if !domain.is_bounded() || domain.0.iter().any(|i| i.width() <= 0.0) {
            return Err(ReachError::Geometry(format!("domain {domain} must be bounded with positive widths")));
        }
        if counts.contains(&0) {
            return Err(ReachError::Geometry("cell counts must be positive".into()));
        }
        let total = counts.iter().try_fold(1usize, |a, &c| a.checked_mul(c));
        if total.is_none_or(|t| t > 1 << 28) {
            return Err(ReachError::Geometry("grid has too many cells".into()));
        }
        Ok(Self { lower: domain.lo(), upper: domain.hi(), counts })
    }

    /// Grid with cells no wider than `widths`, counts rounded up.
    pub fn with_widths(domain: &IBox, widths: &[f64]) -> Result<Self, ReachError> {
        if widths.len() != domain.dim() || widths.iter().any(|w| !(*w > 0.0)) {
            return Err(ReachError::Geometry("cell widths must be positive, one per dimension".into()));
        }
        let counts = domain
            .0
            .iter()
            .zip(widths)
            .map(|(i, w)| crate::scenario_space::snapped_ceil(i.width() / w).max(1) as usize)
            .collect();
        Self::new(domain, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn domain(&self) -> IBox {
        IBox::from_bounds(&self.lower, &self.upper)
    }

    pub fn width(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.counts[axis] as f64
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.width(i)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn total_cells(&self) -> usize {
        self.counts.iter().product()
    }

    /// Row-major linear index, last axis fastest.
    pub fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn unravel(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = lin % self.counts[axis];
            lin /= self.counts[axis];
        }
        idx
    }

    pub fn cell_box(&self, idx: &[usize]) -> IBox {
        IBox::new(
            idx.iter()
                .enumerate()
                .map(|(a, &i)| {
                    let w = self.width(a);
                    let lo = self.lower[a] + w * i as f64;
                    let hi = if i + 1 == self.counts[a] { self.upper[a] } else { self.lower[a] + w * (i + 1) as f64 };
                    Interval::new(lo, hi)
                })
                .collect(),
        )
    }

    /// Cell holding `x`. A point on a shared face belongs to the cell above
    /// it; the domain's upper face belongs to the last cell.
    pub fn cell_of_point(&self, x: &[f64]) -> Option<Vec<usize>> {
        if x.len() != self.dim() {
            return None;
        }
        x.iter()
            .enumerate()
            .map(|(a, &v)| {
                if !(self.lower[a] <= v && v <= self.upper[a]) {
                    return None;
                }
                let k = ((v - self.lower[a]) / self.width(a)).floor() as usize;
                Some(k.min(self.counts[a] - 1))
            })
            .collect()
    }

    /// Inclusive index range of cells whose closed box meets `b`, clamped
    /// to the grid. `None` when `b` misses the domain; the flag reports
    /// whether `b` reached outside it.
    pub fn touching_range(&self, b: &IBox) -> Option<(Vec<usize>, Vec<usize>, bool)> {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        let mut clipped = false;
        for (a, iv) in b.0.iter().enumerate() {
            if iv.hi < self.lower[a] || iv.lo > self.upper[a] {
                return None;
            }
            clipped |= iv.lo < self.lower[a] || iv.hi > self.upper[a];
            let w = self.width(a);
            let n = self.counts[a] as f64;
            let l = (((iv.lo - self.lower[a]) / w).ceil() - 1.0).clamp(0.0, n - 1.0);
            let h = ((iv.hi - self.lower[a]) / w).floor().clamp(0.0, n - 1.0);
            lo.push(l as usize);
            hi.push((h as usize).max(l as usize));
        }
        Some((lo, hi, clipped))
    }

    /// Smallest inclusive index range whose cells cover `b`; `None` unless
    /// `b` lies inside the domain.
    pub fn covering_range(&self, b: &IBox) -> Option<(Vec<usize>, Vec<usize>)> {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for (a, iv) in b.0.iter().enumerate() {
            if iv.lo < self.lower[a] || iv.hi > self.upper[a] {
                return None;
            }
            let w = self.width(a);
            let n = self.counts[a] as f64;
            let l = ((iv.lo - self.lower[a]) / w).floor().clamp(0.0, n - 1.0);
            let h = (((iv.hi - self.lower[a]) / w).ceil() - 1.0).clamp(l, n - 1.0);
            lo.push(l as usize);
            hi.push(h as usize);
        }
        Some((lo, hi))
    }
}

/// Soundness direction of a computed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Approx {
    Over,
    Under,
    Exact,
}

impl std::fmt::Display for Approx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Approx::Over => "over",
            Approx::Under => "under",
            Approx::Exact => "exact",
        })
    }
}

/// Finite union of grid cells.
#[derive(Debug, Clone)]
pub struct StateSet {
    geometry: GridGeometry,
    cells: FixedBitSet,
    approx: Approx,
    /// Summed-area table over the bitset, built on first range query.
    prefix: OnceLock<Vec<u32>>,
}

impl PartialEq for StateSet {
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry && self.cells == other.cells && self.approx == other.approx
    }
}

impl StateSet {
    pub fn empty(geometry: GridGeometry, approx: Approx) -> Self {
        let n = geometry.total_cells();
        Self { geometry, cells: FixedBitSet::with_capacity(n), approx, prefix: OnceLock::new() }
    }

    pub fn from_cells<I>(geometry: GridGeometry, cells: I) -> Result<Self, ReachError>
    where
        I: IntoIterator<Item = Vec<usize>>,
    {
        let mut s = Self::empty(geometry, Approx::Exact);
        for c in cells {
            if c.len() != s.geometry.dim() || c.iter().zip(s.geometry.counts()).any(|(&i, &n)| i >= n) {
                return Err(ReachError::Geometry(format!("cell {c:?} outside the grid")));
            }
            s.insert(&c);
        }
        Ok(s)
    }

    /// Cells whose closed box meets `b`.
    pub fn from_box(geometry: GridGeometry, b: &IBox) -> Self {
        let mut s = Self::empty(geometry, Approx::Exact);
        s.insert_box(b);
        s
    }

    /// Cells whose box satisfies `keep`.
    pub fn from_predicate(geometry: GridGeometry, keep: impl Fn(&IBox) -> bool) -> Self {
        let mut s = Self::empty(geometry, Approx::Exact);
        for lin in 0..s.geometry.total_cells() {
            if keep(&s.geometry.cell_box(&s.geometry.unravel(lin))) {
                s.cells.insert(lin);
            }
        }
        s
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn approx(&self) -> Approx {
        self.approx
    }

    pub fn with_approx(mut self, approx: Approx) -> Self {
        self.approx = approx;
        self
    }

    pub fn len(&self) -> usize {
        self.cells.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_clear()
    }

    pub fn volume(&self) -> f64 {
        self.len() as f64 * self.geometry.cell_volume()
    }

    pub fn insert(&mut self, idx: &[usize]) {
        self.insert_linear(self.geometry.linear(idx));
    }

    pub(crate) fn insert_linear(&mut self, lin: usize) {
        self.prefix.take();
        self.cells.insert(lin);
    }

    /// Insert every cell meeting `b`; returns whether `b` reached outside
    /// the domain.
    pub fn insert_box(&mut self, b: &IBox) -> bool {
        let Some((lo, hi, clipped)) = self.geometry.touching_range(b) else {
            return true;
        };
        self.prefix.take();
        let geom = &self.geometry;
        let cells = &mut self.cells;
        for_each_in_range(&lo, &hi, |idx| cells.insert(geom.linear(idx)));
        clipped
    }

    pub fn contains_cell(&self, idx: &[usize]) -> bool {
        self.cells.contains(self.geometry.linear(idx))
    }

    /// True when some set cell's closed box contains `x`.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.meets_box(&IBox::point(x))
    }

    /// Cell indices in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.cells.ones().map(|lin| self.geometry.unravel(lin))
    }

    pub(crate) fn linear_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.ones()
    }

    fn check_same_grid(&self, other: &StateSet) -> Result<(), ReachError> {
        if self.geometry != other.geometry {
            return Err(ReachError::Geometry("sets live on different grids".into()));
        }
        Ok(())
    }

    pub fn union_with(&mut self, other: &StateSet) -> Result<(), ReachError> {
        self.check_same_grid(other)?;
        self.prefix.take();
        self.cells.union_with(&other.cells);
        Ok(())
    }

    pub fn intersect_with(&mut self, other: &StateSet) -> Result<(), ReachError> {
        self.check_same_grid(other)?;
        self.prefix.take();
        self.cells.intersect_with(&other.cells);
        Ok(())
    }

    pub fn difference_with(&mut self, other: &StateSet) -> Result<(), ReachError> {
        self.check_same_grid(other)?;
        self.prefix.take();
        self.cells.difference_with(&other.cells);
        Ok(())
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.geometry == other.geometry && self.cells.is_subset(&other.cells)
    }

    pub fn complement(&self) -> StateSet {
        let mut c = self.clone();
        c.prefix.take();
        c.cells.toggle_range(..);
        c
    }

    fn prefix(&self) -> &[u32] {
        self.prefix.get_or_init(|| {
            let counts = self.geometry.counts();
            let ext: Vec<usize> = counts.iter().map(|c| c + 1).collect();
            let mut table = vec![0u32; ext.iter().product()];
            let ext_linear = |idx: &[usize]| idx.iter().zip(&ext).fold(0, |acc, (&i, &n)| acc * n + i);
            let mut shifted = vec![0; counts.len()];
            for lin in self.cells.ones() {
                for (s, i) in shifted.iter_mut().zip(self.geometry.unravel(lin)) {
                    *s = i + 1;
                }
                table[ext_linear(&shifted)] = 1;
            }
            // cumulative sums along each axis in turn
            let mut stride = 1;
            for axis in (0..ext.len()).rev() {
                let n = ext[axis];
                for lin in 0..table.len() {
                    if (lin / stride) % n != 0 {
                        table[lin] += table[lin - stride];
                    }
                }
                stride *= n;
            }
            table
        })
    }

    /// Number of set cells in the inclusive index range.
    pub fn count_in_range(&self, lo: &[usize], hi: &[usize]) -> usize {
        let table = self.prefix();
        let ext: Vec<usize> = self.geometry.counts().iter().map(|c| c + 1).collect();
        let d = lo.len();
        let mut total: i64 = 0;
        let mut corner = vec![0usize; d];
        for mask in 0..(1usize << d) {
            let mut lower_picks = 0;
            for a in 0..d {
                if mask >> a & 1 == 1 {
                    corner[a] = hi[a] + 1;
                } else {
                    corner[a] = lo[a];
                    lower_picks += 1;
                }
            }
            let lin = corner.iter().zip(&ext).fold(0, |acc, (&i, &n)| acc * n + i);
            let v = table[lin] as i64;
            total += if lower_picks % 2 == 0 { v } else { -v };
        }
        total as usize
    }

    /// Whether some set cell's closed box meets `b`.
    pub fn meets_box(&self, b: &IBox) -> bool {
        match self.geometry.touching_range(b) {
            Some((lo, hi, _)) => self.count_in_range(&lo, &hi) > 0,
            None => false,
        }
    }

    /// Whether `b` lies inside the union of set cells.
    pub fn contains_box(&self, b: &IBox) -> bool {
        match self.geometry.covering_range(b) {
            Some((lo, hi)) => {
                let n: usize = lo.iter().zip(&hi).map(|(l, h)| h - l + 1).product();
                self.count_in_range(&lo, &hi) == n
            }
            None => false,
        }
    }

    /// Bounding box of the set cells.
    pub fn bounding_box(&self) -> Option<IBox> {
        let mut it = self.cells.ones();
        let first = it.next()?;
        let mut b = self.geometry.cell_box(&self.geometry.unravel(first));
        for lin in it {
            b = b.hull(&self.geometry.cell_box(&self.geometry.unravel(lin)));
        }
        Some(b)
    }
}

/// Visit every index in the inclusive range, last axis fastest.
pub(crate) fn for_each_in_range(lo: &[usize], hi: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = lo.to_vec();
    loop {
        f(&idx);
        let mut axis = idx.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if idx[axis] < hi[axis] {
                idx[axis] += 1;
                break;
            }
            idx[axis] = lo[axis];
        }
    }
}
