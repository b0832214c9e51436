//! Closed real intervals and axis-aligned boxes.
//!
//! Every operation returns an enclosure of the exact real result. Results that
//! feed set propagation are widened by [`Interval::outward`] so that floating
//! point rounding in the point integrator never lands a sample just outside an
//! enclosure computed through a different operation order.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

const OUTWARD_REL: f64 = 1e-12;
const OUTWARD_ABS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// Interval spanning both endpoints, in whichever order they come.
    pub fn spanning(a: f64, b: f64) -> Self {
        Self { lo: a.min(b), hi: a.max(b) }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn scale(&self, k: f64) -> Interval {
        Interval::spanning(self.lo * k, self.hi * k)
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            Interval { lo: -self.hi, hi: -self.lo }
        } else {
            Interval { lo: 0.0, hi: self.hi.max(-self.lo) }
        }
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn min(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.min(other.hi) }
    }

    pub fn max(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.max(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Interval {
        Interval { lo: self.lo.clamp(lo, hi), hi: self.hi.clamp(lo, hi) }
    }

    pub fn sqr(&self) -> Interval {
        let a = self.abs();
        Interval { lo: a.lo * a.lo, hi: a.hi * a.hi }
    }

    pub fn sin(&self) -> Interval {
        (*self - Interval::point(std::f64::consts::FRAC_PI_2)).cos()
    }

    pub fn cos(&self) -> Interval {
        use std::f64::consts::{PI, TAU};
        if self.width() >= TAU {
            return Interval { lo: -1.0, hi: 1.0 };
        }
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        // maxima at 2kπ, minima at (2k+1)π
        let k_max = (self.lo / TAU).ceil();
        if k_max * TAU <= self.hi {
            hi = 1.0;
        }
        let k_min = ((self.lo - PI) / TAU).ceil();
        if k_min * TAU + PI <= self.hi {
            lo = -1.0;
        }
        Interval { lo, hi }
    }

    /// Tangent on an interval strictly inside (-π/2, π/2).
    pub fn tan(&self) -> Option<Interval> {
        let half = std::f64::consts::FRAC_PI_2;
        (self.lo > -half && self.hi < half).then(|| Interval { lo: self.lo.tan(), hi: self.hi.tan() })
    }

    /// Widen by a relative plus absolute margin to absorb rounding.
    pub fn outward(&self) -> Interval {
        Interval {
            lo: self.lo - OUTWARD_REL * self.lo.abs() - OUTWARD_ABS,
            hi: self.hi + OUTWARD_REL * self.hi.abs() + OUTWARD_ABS,
        }
    }

    pub fn inflate(&self, r: f64) -> Interval {
        Interval { lo: self.lo - r, hi: self.hi + r }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo + rhs.lo, hi: self.hi + rhs.hi }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo - rhs.hi, hi: self.hi - rhs.lo }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        Interval {
            lo: p.iter().copied().fold(f64::INFINITY, f64::min),
            hi: p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, rhs: f64) -> Interval {
        Interval { lo: self.lo + rhs, hi: self.hi + rhs }
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        self.scale(rhs)
    }
}

/// Axis-aligned box: one interval per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IBox(pub Vec<Interval>);

impl IBox {
    pub fn new(dims: Vec<Interval>) -> Self {
        Self(dims)
    }

    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self(lo.iter().zip(hi).map(|(&l, &h)| Interval::new(l, h)).collect())
    }

    pub fn point(x: &[f64]) -> Self {
        Self(x.iter().map(|&v| Interval::point(v)).collect())
    }

    /// The zero-dimensional box, used for systems without disturbance.
    pub fn empty_dims() -> Self {
        Self(Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn lo(&self) -> Vec<f64> {
        self.0.iter().map(|i| i.lo).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.0.iter().map(|i| i.hi).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(Interval::mid).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.0.iter().zip(x).all(|(i, &v)| i.contains(v))
    }

    pub fn contains_box(&self, other: &IBox) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a.contains_interval(b))
    }

    pub fn hull(&self, other: &IBox) -> IBox {
        IBox(self.0.iter().zip(&other.0).map(|(a, b)| a.hull(b)).collect())
    }

    pub fn intersect(&self, other: &IBox) -> Option<IBox> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(IBox)
    }

    pub fn outward(&self) -> IBox {
        IBox(self.0.iter().map(Interval::outward).collect())
    }

    pub fn is_bounded(&self) -> bool {
        self.0.iter().all(|i| i.lo.is_finite() && i.hi.is_finite() && i.lo <= i.hi)
    }

    /// Regular grid of sample points, `per_dim` points along each axis
    /// (endpoints included; a single point means the center).
    pub fn sample_grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .0
            .iter()
            .map(|iv| {
                if per_dim <= 1 || iv.width() == 0.0 {
                    vec![iv.mid()]
                } else {
                    (0..per_dim)
                        .map(|k| iv.lo + iv.width() * k as f64 / (per_dim - 1) as f64)
                        .collect()
                }
            })
            .collect();
        cartesian(&axes)
    }

    /// Partition into `per_dim` equal sub-boxes along each axis.
    pub fn split_grid(&self, per_dim: usize) -> Vec<IBox> {
        let per_dim = per_dim.max(1);
        let axes: Vec<Vec<Interval>> = self
            .0
            .iter()
            .map(|iv| {
                if iv.width() == 0.0 {
                    return vec![*iv];
                }
                (0..per_dim)
                    .map(|k| {
                        let a = iv.lo + iv.width() * k as f64 / per_dim as f64;
                        let b = if k + 1 == per_dim {
                            iv.hi
                        } else {
                            iv.lo + iv.width() * (k + 1) as f64 / per_dim as f64
                        };
                        Interval::new(a, b)
                    })
                    .collect()
            })
            .collect();
        cartesian(&axes).into_iter().map(IBox).collect()
    }
}

impl fmt::Display for IBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, iv) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, " x ")?;
            }
            write!(f, "{iv}")?;
        }
        write!(f, ")")
    }
}

fn cartesian<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(v.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}
