//! Discrete-time models of resilient systems.
//!
//! Every module here is pure computation over owned state and an explicit
//! random source, so the crate is `no_std` and only needs `alloc`. IO, file
//! formats and the command line live in the `resbench` crate.
//!
//! - [`envmodel`]: fault-load generators and replica corruption.
//! - [`voting`]: majority adjudication.
//! - [`rds`]: statically redundant cells and the overshoot/undershoot regions.
//! - [`ards`]: the distance-to-failure controller that resizes a cell at run time.
//! - [`anvp`]: ranked version pools with adaptive active-set size.
//! - [`fusion`]: the monitor/analyse/plan/execute loop with planner selection and plan fusion.
//! - [`fso`]: nested organisations resolving role requests by escalation.
//! - [`taxonomy`]: behaviour/dynamicity coordinates, contracts and the resilience advisor.

#![no_std]

extern crate alloc;

pub mod anvp;
pub mod ards;
pub mod envmodel;
mod error;
pub mod fso;
pub mod fusion;
pub mod rds;
pub mod taxonomy;
pub mod voting;

pub use error::{Error, Result};

/// Value carried by one replica or emitted by one version.
pub type Value = i64;

/// Random source used by every simulation loop.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the deterministic random source for a run.
pub fn sim_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
