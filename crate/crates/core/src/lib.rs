//! Renewable-aware inter-datacenter VM migration over elastic optical
//! networks.

pub mod energy;
pub mod exact;
pub mod experiment;
pub mod heuristics;
pub mod spectrum;
pub mod topology;
pub mod workload;
