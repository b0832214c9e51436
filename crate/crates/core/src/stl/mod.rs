//! Signal temporal logic: formulas, parsing, predicates and the sampled
//! Boolean monitor.

pub mod ast;
pub mod monitor;
pub mod parser;
pub mod predicate;
pub mod signal;

pub use ast::{shift_interval, Atom, StlFormula, TimeInterval};
pub use monitor::{monitor_trace, satisfies, window_range, Diagnostics, EvalTree, Evaluation, Monitor};
pub use parser::{parse, ParseError, ParseErrorKind};
pub use predicate::{Evaluator, PredicateDef, PredicateRegistry};
pub use signal::{time_eps, Signal};

#[derive(Debug, thiserror::Error)]
pub enum StlError {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("time {t} outside signal domain [{first}, {last}]")]
    TimeOutOfDomain { t: f64, first: f64, last: f64 },
    #[error("time {0} is not a sample instant")]
    NotSampled(f64),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("cannot bind predicate `{predicate}`: {reason}")]
    Bind { predicate: String, reason: String },
    #[error("predicate `{predicate}` is NaN at sample {sample}")]
    NonFinite { predicate: String, sample: usize },
}
