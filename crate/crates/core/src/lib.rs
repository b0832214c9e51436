pub mod interval;
pub mod scenario_space;
pub mod stl;
pub mod reachability;
pub mod traffic_sim;
pub mod verification;
pub mod coverage;
pub mod config;
