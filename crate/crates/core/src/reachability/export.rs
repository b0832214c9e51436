//! Line-oriented text export of grid sets.
//!
//! ```text
//! scov-stateset 1
//! dims 2
//! lower -80 -30
//! upper 190 50
//! counts 1350 800
//! approx over
//! clipped false
//! heuristic false
//! cells 2
//! 600 400
//! 601 400
//! ```
//!
//! Lines starting with `#` are comments and may appear anywhere. Each cell
//! line holds one index per dimension; cell `i` along axis `a`
//! spans `lower[a] + i·w[a]` to `lower[a] + (i+1)·w[a]` with
//! `w[a] = (upper[a] - lower[a]) / counts[a]`.

use std::io::{BufRead, Write};

use super::grid::{Approx, GridGeometry, StateSet};
use super::reach::ReachMetadata;
use super::ReachError;
use crate::interval::IBox;

const MAGIC: &str = "scov-stateset 1";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_set<W: Write>(mut out: W, set: &StateSet, meta: &ReachMetadata) -> std::io::Result<()> {
    let g = set.geometry();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "dims {}", g.dim())?;
    writeln!(out, "lower {}", join(g.lower()))?;
    writeln!(out, "upper {}", join(g.upper()))?;
    writeln!(out, "counts {}", join(g.counts()))?;
    writeln!(out, "approx {}", set.approx())?;
    writeln!(out, "clipped {}", meta.clipped)?;
    writeln!(out, "heuristic {}", meta.heuristic)?;
    writeln!(out, "cells {}", set.len())?;
    for c in set.cells() {
        writeln!(out, "{}", join(&c))?;
    }
    Ok(())
}

pub struct ImportedSet {
    pub set: StateSet,
    pub clipped: bool,
    pub heuristic: bool,
}

pub fn read_set<R: BufRead>(input: R) -> Result<ImportedSet, ReachError> {
    let bad = |line: usize, msg: &str| ReachError::Format(format!("line {line}: {msg}"));
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |key: &str| -> Result<(usize, String), ReachError> {
        let (n, l) = loop {
            let (n, l) = lines.next().ok_or_else(|| ReachError::Format(format!("missing `{key}` line")))?;
            let l = l.map_err(|e| ReachError::Format(e.to_string()))?;
            if !l.starts_with('#') {
                break (n, l);
            }
        };
        if key.is_empty() {
            return Ok((n, l));
        }
        match l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) => Ok((n, rest.to_string())),
            None => Err(bad(n, &format!("expected `{key} ...`"))),
        }
    };
    let (n, magic) = next("")?;
    if magic.trim() != MAGIC {
        return Err(bad(n, "not a state-set file"));
    }
    fn nums<T: std::str::FromStr>(s: &str, n: usize) -> Result<Vec<T>, ReachError> {
        s.split_whitespace()
            .map(|t| t.parse().map_err(|_| ReachError::Format(format!("line {n}: bad number `{t}`"))))
            .collect()
    }
    let (n, dims) = next("dims")?;
    let dims: usize = dims.trim().parse().map_err(|_| bad(n, "bad dimension"))?;
    let (n, lo) = next("lower")?;
    let lower: Vec<f64> = nums(&lo, n)?;
    let (n, hi) = next("upper")?;
    let upper: Vec<f64> = nums(&hi, n)?;
    let (n, c) = next("counts")?;
    let counts: Vec<usize> = nums(&c, n)?;
    if lower.len() != dims || upper.len() != dims || counts.len() != dims {
        return Err(bad(n, "header arity does not match `dims`"));
    }
    if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
        return Err(bad(n, "lower bounds must be below upper bounds"));
    }
    let geom = GridGeometry::new(&IBox::from_bounds(&lower, &upper), counts)?;
    let (n, a) = next("approx")?;
    let approx = match a.trim() {
        "over" => Approx::Over,
        "under" => Approx::Under,
        "exact" => Approx::Exact,
        _ => return Err(bad(n, "approx must be over, under or exact")),
    };
    let flag = |n: usize, s: &str| match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(n, "expected true or false")),
    };
    let (n, c) = next("clipped")?;
    let clipped = flag(n, &c)?;
    let (n, h) = next("heuristic")?;
    let heuristic = flag(n, &h)?;
    let (n, k) = next("cells")?;
    let k: usize = k.trim().parse().map_err(|_| bad(n, "bad cell count"))?;
    let mut cells = Vec::with_capacity(k);
    for _ in 0..k {
        let (n, l) = next("")?;
        let idx: Vec<usize> = nums(&l, n)?;
        if idx.len() != dims {
            return Err(bad(n, "cell index arity does not match `dims`"));
        }
        cells.push(idx);
    }
    let set = StateSet::from_cells(geom, cells)?.with_approx(approx);
    Ok(ImportedSet { set, clipped, heuristic })
}
