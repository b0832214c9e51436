//! Boolean monitor under sampled semantics.
//!
//! Quantifiers over `t' ∈ I ⊕ t` range over the signal's own sample instants
//! inside the shifted window (clipped to the end of the trace). An empty
//! window makes `G` vacuously true and `F`/`U` false; bounded windows that come
//! up empty, or that reach past the last sample, are counted in
//! [`Diagnostics`] so those blind spots stay visible.
//!
//! Until at `t` holds when some sample `t'` in the window satisfies `ψ` and
//! `φ` holds at every sample in `[t, t')`; `φ` is not required at `t'`.

use serde::{Deserialize, Serialize};

use super::ast::{StlFormula, TimeInterval};
use super::predicate::{Evaluator, PredicateRegistry};
use super::signal::{time_eps, Signal};
use super::StlError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Bounded windows that contained no sample.
    pub vacuous_windows: usize,
    /// Bounded windows that extended past the last sample.
    pub truncated_windows: usize,
    /// Earliest sample whose evaluation hit a vacuous window, if any.
    pub first_vacuous_sample: Option<usize>,
}

impl Diagnostics {
    fn merge(&mut self, other: &Diagnostics) {
        self.vacuous_windows += other.vacuous_windows;
        self.truncated_windows += other.truncated_windows;
        self.first_vacuous_sample = match (self.first_vacuous_sample, other.first_vacuous_sample) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

/// Per-node verdict vectors mirroring the formula tree.
#[derive(Debug, Clone)]
pub struct EvalTree {
    pub verdicts: Vec<bool>,
    pub children: Vec<EvalTree>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub verdicts: Vec<bool>,
    pub diagnostics: Diagnostics,
    pub tree: EvalTree,
}

enum Node {
    Atom(Evaluator, String),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Always(TimeInterval, Box<Node>),
    Eventually(TimeInterval, Box<Node>),
    Until(TimeInterval, Box<Node>, Box<Node>),
}

/// A formula bound to the channel layout of a family of signals.
pub struct Monitor {
    root: Node,
    channels: Vec<String>,
}

impl Monitor {
    pub fn new(formula: &StlFormula, registry: &PredicateRegistry, channels: &[String]) -> Result<Self, StlError> {
        Ok(Self { root: bind(formula, registry, channels)?, channels: channels.to_vec() })
    }

    pub fn evaluate(&self, sig: &Signal) -> Result<Evaluation, StlError> {
        if sig.channels() != self.channels.as_slice() {
            return Err(StlError::InvalidSignal("signal channel layout differs from the bound layout".into()));
        }
        let mut diag = Diagnostics::default();
        let tree = eval(&self.root, sig, &mut diag)?;
        Ok(Evaluation { verdicts: tree.verdicts.clone(), diagnostics: diag, tree })
    }
}

fn bind(f: &StlFormula, registry: &PredicateRegistry, channels: &[String]) -> Result<Node, StlError> {
    let b = |x: &StlFormula| bind(x, registry, channels).map(Box::new);
    Ok(match f {
        StlFormula::Atom(a) => {
            let ev = registry
                .bind(&a.name, &a.args, channels)
                .map_err(|reason| StlError::Bind { predicate: a.name.clone(), reason })?;
            Node::Atom(ev, a.name.clone())
        }
        StlFormula::Not(x) => Node::Not(b(x)?),
        StlFormula::And(x, y) => Node::And(b(x)?, b(y)?),
        StlFormula::Or(x, y) => Node::Or(b(x)?, b(y)?),
        StlFormula::Always(i, x) => Node::Always(*i, b(x)?),
        StlFormula::Eventually(i, x) => Node::Eventually(*i, b(x)?),
        StlFormula::Until(i, x, y) => Node::Until(*i, b(x)?, b(y)?),
    })
}

/// Half-open sample index range `[a, b)` inside `window ⊕ times[k]`.
pub fn window_range(times: &[f64], k: usize, window: &TimeInterval) -> (usize, usize) {
    let lo = times[k] + window.lo();
    let a = times.partition_point(|&x| x < lo - time_eps(lo)).max(k);
    let b = if window.is_bounded() {
        let hi = times[k] + window.hi();
        times.partition_point(|&x| x <= hi + time_eps(hi))
    } else {
        times.len()
    };
    (a, b)
}

fn prefix_counts(v: &[bool]) -> Vec<usize> {
    let mut p = Vec::with_capacity(v.len() + 1);
    p.push(0);
    for &x in v {
        p.push(p.last().unwrap() + x as usize);
    }
    p
}

fn note_window(times: &[f64], k: usize, window: &TimeInterval, a: usize, b: usize, diag: &mut Diagnostics) {
    if !window.is_bounded() {
        return;
    }
    if a >= b {
        diag.vacuous_windows += 1;
        diag.first_vacuous_sample = Some(diag.first_vacuous_sample.map_or(k, |f| f.min(k)));
    }
    let hi = times[k] + window.hi();
    if hi > times[times.len() - 1] + time_eps(hi) {
        diag.truncated_windows += 1;
    }
}

fn eval(node: &Node, sig: &Signal, diag: &mut Diagnostics) -> Result<EvalTree, StlError> {
    let times = sig.times();
    let n = times.len();
    let leaf = |verdicts| EvalTree { verdicts, children: Vec::new() };
    Ok(match node {
        Node::Atom(ev, name) => {
            let mut out = Vec::with_capacity(n);
            for (k, s) in sig.states().iter().enumerate() {
                let mu = ev(s);
                if mu.is_nan() {
                    return Err(StlError::NonFinite { predicate: name.clone(), sample: k });
                }
                out.push(mu >= 0.0);
            }
            leaf(out)
        }
        Node::Not(x) => {
            let c = eval(x, sig, diag)?;
            EvalTree { verdicts: c.verdicts.iter().map(|v| !v).collect(), children: vec![c] }
        }
        Node::And(x, y) | Node::Or(x, y) => {
            let a = eval(x, sig, diag)?;
            let b = eval(y, sig, diag)?;
            let is_and = matches!(node, Node::And(..));
            let verdicts = a
                .verdicts
                .iter()
                .zip(&b.verdicts)
                .map(|(&p, &q)| if is_and { p && q } else { p || q })
                .collect();
            EvalTree { verdicts, children: vec![a, b] }
        }
        Node::Always(w, x) | Node::Eventually(w, x) => {
            let c = eval(x, sig, diag)?;
            let trues = prefix_counts(&c.verdicts);
            let always = matches!(node, Node::Always(..));
            let mut local = Diagnostics::default();
            let verdicts = (0..n)
                .map(|k| {
                    let (a, b) = window_range(times, k, w);
                    note_window(times, k, w, a, b, &mut local);
                    if a >= b {
                        return always;
                    }
                    let hits = trues[b] - trues[a];
                    if always {
                        hits == b - a
                    } else {
                        hits > 0
                    }
                })
                .collect();
            diag.merge(&local);
            EvalTree { verdicts, children: vec![c] }
        }
        Node::Until(w, x, y) => {
            let hold = eval(x, sig, diag)?;
            let goal = eval(y, sig, diag)?;
            // next_false[k]: first index >= k where the held formula fails
            let mut next_false = vec![n; n + 1];
            for k in (0..n).rev() {
                next_false[k] = if hold.verdicts[k] { next_false[k + 1] } else { k };
            }
            let goals = prefix_counts(&goal.verdicts);
            let mut local = Diagnostics::default();
            let verdicts = (0..n)
                .map(|k| {
                    let (a, b) = window_range(times, k, w);
                    note_window(times, k, w, a, b, &mut local);
                    let b = b.min(next_false[k] + 1);
                    a < b && goals[b] - goals[a] > 0
                })
                .collect();
            diag.merge(&local);
            EvalTree { verdicts, children: vec![hold, goal] }
        }
    })
}

/// Verdict of `formula` at every sample instant.
pub fn monitor_trace(sig: &Signal, formula: &StlFormula, registry: &PredicateRegistry) -> Result<Evaluation, StlError> {
    Monitor::new(formula, registry, sig.channels())?.evaluate(sig)
}

/// `(s, t) ⊨ φ`, with `t` one of the signal's sample instants.
pub fn satisfies(sig: &Signal, t: f64, formula: &StlFormula, registry: &PredicateRegistry) -> Result<bool, StlError> {
    let k = sig.sample_index(t)?;
    Ok(monitor_trace(sig, formula, registry)?.verdicts[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse;

    fn registry() -> PredicateRegistry {
        let mut r = PredicateRegistry::empty();
        r.register_channel_threshold("p", "p", 0.0);
        r.register_channel_threshold("q", "q", 0.0);
        r
    }

    /// Channels p, q with ±1 values, samples at 0, 1, 2, ...
    fn pq_signal(p: &[bool], q: &[bool]) -> Signal {
        let b = |x: bool| if x { 1.0 } else { -1.0 };
        Signal::new(
            vec!["p".into(), "q".into()],
            (0..p.len()).map(|k| k as f64).collect(),
            p.iter().zip(q).map(|(&a, &c)| vec![b(a), b(c)]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_true_always() {
        let s = pq_signal(&[true; 4], &[false; 4]);
        assert!(satisfies(&s, 0.0, &parse("G p", &registry()).unwrap(), &registry()).unwrap());
    }

    #[test]
    fn until_examples() {
        // p on [0,3), q at 3
        let s = pq_signal(&[true, true, true, false, false, false], &[false, false, false, true, false, false]);
        let r = registry();
        assert!(satisfies(&s, 0.0, &parse("p U[0,5] q", &r).unwrap(), &r).unwrap());
        assert!(!satisfies(&s, 0.0, &parse("p U[0,2] q", &r).unwrap(), &r).unwrap());
    }

    #[test]
    fn single_sample_and_negation() {
        let s = pq_signal(&[true], &[false]);
        let r = registry();
        assert_eq!(monitor_trace(&s, &parse("p", &r).unwrap(), &r).unwrap().verdicts, vec![true]);
        let s = pq_signal(&[true, false, true, true], &[false, true, false, true]);
        let f = parse("F[1,2] (p & q)", &r).unwrap();
        let a = monitor_trace(&s, &f, &r).unwrap().verdicts;
        let b = monitor_trace(&s, &StlFormula::not(f), &r).unwrap().verdicts;
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn vacuous_and_truncated_windows_are_flagged() {
        // samples at 0,1,2: window [0.2,0.8] never contains a sample
        let s = pq_signal(&[false, false, false], &[false, false, false]);
        let r = registry();
        let ev = monitor_trace(&s, &parse("G[0.2,0.8] p", &r).unwrap(), &r).unwrap();
        assert_eq!(ev.verdicts, vec![true, true, true]);
        assert_eq!(ev.diagnostics.vacuous_windows, 3);
        assert_eq!(ev.diagnostics.first_vacuous_sample, Some(0));
        let ev = monitor_trace(&s, &parse("F[0.2,0.8] p", &r).unwrap(), &r).unwrap();
        assert_eq!(ev.verdicts, vec![false, false, false]);
        let ev = monitor_trace(&s, &parse("G[0,1] !p", &r).unwrap(), &r).unwrap();
        assert_eq!(ev.diagnostics.truncated_windows, 1);
        assert_eq!(ev.diagnostics.vacuous_windows, 0);
    }

    #[test]
    fn errors() {
        let s = pq_signal(&[true, true], &[true, true]);
        let r = registry();
        let f = parse("p", &r).unwrap();
        assert!(matches!(satisfies(&s, 5.0, &f, &r), Err(StlError::TimeOutOfDomain { .. })));
        let r2 = PredicateRegistry::with_builtins();
        let g = parse("collision_free", &r2).unwrap();
        assert!(matches!(monitor_trace(&s, &g, &r2), Err(StlError::Bind { .. })));
    }

    proptest::proptest! {
        #[test]
        fn duality_and_de_morgan(
            p in proptest::collection::vec(proptest::bool::ANY, 1..30),
            q in proptest::collection::vec(proptest::bool::ANY, 30),
            lo in 0u8..5, len in 0u8..8,
        ) {
            let s = pq_signal(&p, &q[..p.len()]);
            let r = registry();
            let v = |f: &str| monitor_trace(&s, &parse(f, &r).unwrap(), &r).unwrap().verdicts;
            let (a, b) = (lo, lo + len);
            proptest::prop_assert_eq!(v(&format!("G[{a},{b}] p")), v(&format!("!F[{a},{b}] !p")));
            proptest::prop_assert_eq!(v(&format!("F[{a},{b}] p")), v(&format!("!G[{a},{b}] !p")));
            proptest::prop_assert_eq!(v("!(p | q)"), v("!p & !q"));
            proptest::prop_assert_eq!(v("!(p & q)"), v("!p | !q"));
            proptest::prop_assert_eq!(v(&format!("F[{a},{b}] q")), v(&format!("(p | !p) U[{a},{b}] q")));
        }
    }
}
