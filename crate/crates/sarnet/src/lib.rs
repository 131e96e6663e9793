//! Diffusion-set partitioning and SAR (Susceptible–Attacked–Removed)
//! interference-epidemic analysis for rooted sensor networks.
//!
//! The crate is organised around four building blocks:
//!
//! * [`graph`] — rooted network representation, hop depths, diffusion-set
//!   partitioning, interference counting and node removal.
//! * [`dynamics`] — the compartmental SAR model: parameters, attack rates,
//!   right-hand side evaluation and fixed-step Euler integration.
//! * [`stability`] — disease-free equilibrium structure, next-generation
//!   matrix and the basic reproduction number R0.
//! * [`cost`] — per-state unit-cost tables and average cost-of-infection
//!   curves over trajectories.
//!
//! [`scenario`] and [`report`] tie the blocks together for the `sarnet`
//! command-line tool: scenario files describe a parameterised run plus
//! optional parameter transforms, and `report` turns runs into CSV time
//! series, stability reports and a plain-text summary.

#![forbid(unsafe_code)]

pub mod cost;
pub mod dynamics;
pub mod graph;
pub mod report;
pub mod scenario;
pub mod stability;

pub use dynamics::{SarParameters, SarState, Trajectory};
pub use graph::{DepthMap, DiffusionPartition, EpidemicState, Network, NodeId};
pub use scenario::{Scenario, Transform};
pub use stability::StabilityReport;

// Everything is immutable after construction; sweeps may fan out across
// threads freely.
const _: () = {
    const fn assert_shareable<T: Send + Sync>() {}
    assert_shareable::<Network>();
    assert_shareable::<DiffusionPartition>();
    assert_shareable::<SarParameters>();
    assert_shareable::<Trajectory>();
    assert_shareable::<StabilityReport>();
    assert_shareable::<cost::CostTable>();
    assert_shareable::<Scenario>();
};
