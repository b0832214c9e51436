//! Reachable sets over a uniform state grid.

pub mod export;
pub mod grid;
pub mod ics;
pub mod models;
pub mod reach;

pub use grid::{Approx, GridGeometry, StateSet};
pub use ics::{
    find_evasion, ics_check, ics_check_box, ics_check_with, ics_map, unsafe_backward_set, HalfSpace, IcsOptions, IcsReport,
    IcsVerdict, Region,
};
pub use models::{model_by_name, DynamicalSystem, Flow, MODEL_NAMES};
pub use reach::{reach, reach_with, Direction, QuantD, QuantU, ReachMetadata, ReachMode, ReachOptions, ReachResult, ReachSpec};

#[derive(Debug, thiserror::Error)]
pub enum ReachError {
    #[error("grid: {0}")]
    Geometry(String),
    #[error("model: {0}")]
    Model(String),
    #[error("reach spec: {0}")]
    Spec(String),
    #[error("{0}")]
    OutOfDomain(String),
    #[error("set file: {0}")]
    Format(String),
}
