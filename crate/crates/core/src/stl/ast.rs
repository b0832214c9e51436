use std::fmt;

use serde::{Deserialize, Serialize};

/// Relative time window `[lo, hi]`, `hi` possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    lo: f64,
    hi: f64,
}

impl TimeInterval {
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo.is_finite() && lo >= 0.0 && !hi.is_nan() && lo <= hi).then_some(Self { lo, hi })
    }

    /// `[0, ∞)`, the window used when a temporal operator omits one.
    pub fn unbounded() -> Self {
        Self { lo: 0.0, hi: f64::INFINITY }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }

    /// `I ⊕ t`: the window translated to absolute time `t`.
    pub fn shift(&self, t: f64) -> TimeInterval {
        TimeInterval { lo: self.lo + t, hi: self.hi + t }
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hi.is_infinite() {
            write!(f, "[{},inf)", self.lo)
        } else {
            write!(f, "[{},{}]", self.lo, self.hi)
        }
    }
}

/// `I ⊕ t`.
pub fn shift_interval(interval: TimeInterval, t: f64) -> TimeInterval {
    interval.shift(t)
}

/// Atomic proposition: a registered predicate name with numeric arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub args: Vec<f64>,
}

impl Atom {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), args: Vec::new() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
            write!(f, "({})", args.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StlFormula {
    Atom(Atom),
    Not(Box<StlFormula>),
    And(Box<StlFormula>, Box<StlFormula>),
    Or(Box<StlFormula>, Box<StlFormula>),
    Always(TimeInterval, Box<StlFormula>),
    Eventually(TimeInterval, Box<StlFormula>),
    Until(TimeInterval, Box<StlFormula>, Box<StlFormula>),
}

impl StlFormula {
    pub fn atom(name: &str) -> Self {
        StlFormula::Atom(Atom::new(name))
    }

    pub fn not(f: StlFormula) -> Self {
        StlFormula::Not(Box::new(f))
    }

    pub fn and(a: StlFormula, b: StlFormula) -> Self {
        StlFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: StlFormula, b: StlFormula) -> Self {
        StlFormula::Or(Box::new(a), Box::new(b))
    }

    pub fn always(i: TimeInterval, f: StlFormula) -> Self {
        StlFormula::Always(i, Box::new(f))
    }

    pub fn eventually(i: TimeInterval, f: StlFormula) -> Self {
        StlFormula::Eventually(i, Box::new(f))
    }

    pub fn until(i: TimeInterval, a: StlFormula, b: StlFormula) -> Self {
        StlFormula::Until(i, Box::new(a), Box::new(b))
    }

    /// Length of signal needed past the evaluation time to decide the
    /// formula without truncation; infinite for unbounded operators.
    pub fn horizon(&self) -> f64 {
        match self {
            StlFormula::Atom(_) => 0.0,
            StlFormula::Not(f) => f.horizon(),
            StlFormula::And(a, b) | StlFormula::Or(a, b) => a.horizon().max(b.horizon()),
            StlFormula::Always(i, f) | StlFormula::Eventually(i, f) => i.hi() + f.horizon(),
            StlFormula::Until(i, a, b) => i.hi() + a.horizon().max(b.horizon()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            StlFormula::Atom(_) => 0,
            StlFormula::Not(f) | StlFormula::Always(_, f) | StlFormula::Eventually(_, f) => 1 + f.depth(),
            StlFormula::And(a, b) | StlFormula::Or(a, b) | StlFormula::Until(_, a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            StlFormula::Atom(a) => out.push(a),
            StlFormula::Not(f) | StlFormula::Always(_, f) | StlFormula::Eventually(_, f) => f.collect_atoms(out),
            StlFormula::And(a, b) | StlFormula::Or(a, b) | StlFormula::Until(_, a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }
}

/// Canonical form: binary operators fully parenthesized, windows always
/// written out. `parse` reads it back to the same tree.
impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StlFormula::Atom(a) => write!(f, "{a}"),
            StlFormula::Not(x) => write!(f, "!{x}"),
            StlFormula::And(a, b) => write!(f, "({a} & {b})"),
            StlFormula::Or(a, b) => write!(f, "({a} | {b})"),
            StlFormula::Always(i, x) => write!(f, "G{i} {x}"),
            StlFormula::Eventually(i, x) => write!(f, "F{i} {x}"),
            StlFormula::Until(i, a, b) => write!(f, "({a} U{i} {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_examples() {
        let i = TimeInterval::new(0.0, 5.0).unwrap();
        assert_eq!(shift_interval(i, 2.0), TimeInterval::new(2.0, 7.0).unwrap());
        let u = shift_interval(TimeInterval::unbounded(), 3.0);
        assert_eq!(u.lo(), 3.0);
        assert!(u.hi().is_infinite());
        let j = TimeInterval::new(1.0, 4.0).unwrap();
        assert_eq!(shift_interval(j, 0.0), j);
    }

    #[test]
    fn interval_validation() {
        assert!(TimeInterval::new(2.0, 1.0).is_none());
        assert!(TimeInterval::new(-1.0, 1.0).is_none());
        assert!(TimeInterval::new(1.0, 1.0).is_some());
    }

    #[test]
    fn horizon_nests() {
        let i25 = TimeInterval::new(0.0, 25.0).unwrap();
        let i5 = TimeInterval::new(0.0, 5.0).unwrap();
        let f = StlFormula::and(
            StlFormula::always(i25, StlFormula::eventually(i5, StlFormula::atom("lane_return"))),
            StlFormula::always(i25, StlFormula::atom("collision_free")),
        );
        assert_eq!(f.horizon(), 30.0);
        assert_eq!(f.depth(), 3);
    }

    #[test]
    fn display_is_canonical() {
        let f = StlFormula::always(
            TimeInterval::new(0.0, 25.0).unwrap(),
            StlFormula::or(StlFormula::atom("a"), StlFormula::not(StlFormula::atom("b"))),
        );
        assert_eq!(f.to_string(), "G[0,25] (a | !b)");
        let u = StlFormula::until(TimeInterval::unbounded(), StlFormula::atom("p"), StlFormula::atom("q"));
        assert_eq!(u.to_string(), "(p U[0,inf) q)");
    }
}
