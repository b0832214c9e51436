//! Deterministic 2D traffic simulator producing signals for monitoring.

mod episode;
mod policy;
mod sim;

pub use episode::{
    AccelProfile, AgentConfig, Behavior, Binding, EgoConfig, EgoModel, EpisodeConfig, Footprint, Lane, SimDomain,
    MAX_AGENTS, MAX_SAMPLES,
};
pub use policy::{
    Action, BlackBox, ControlLaw, Controller, ObsBox, Observation, Policy, PolicyKind, TermRealization,
};
pub use sim::{aabb_clearance, agent_displacement, channel_names, roll_out, Episode, Termination, FAR};

use crate::stl::StlError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("policy `{0}` is opaque and exposes no output envelope")]
    Opaque(String),
    #[error("scenario binding failed: {0}")]
    Binding(String),
    #[error("invalid episode configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Signal(#[from] StlError),
}
