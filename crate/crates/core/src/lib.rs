//! Online fog network formation with min-max latency task distribution.
//!
//! An initial fog node receives a Poisson stream of task packets and can
//! compute them locally, offload them to a remote cloud, or offload them to
//! neighboring fog nodes that announce themselves one at a time. This crate
//! provides:
//!
//! - [`queueing`]: M/D/1 transmission and computation latency models.
//! - [`distribution`]: the offline min-max task distribution solver.
//! - [`formation`]: two-phase threshold selection and the gamma-update loop,
//!   plus a secretary-style baseline.
//! - [`analysis`]: formation-probability bounds and competitive-ratio bounds.
//! - [`scenario`]: experiment configuration, seeded arrivals and replication.

pub mod analysis;
pub mod distribution;
pub mod error;
pub mod formation;
pub mod queueing;
pub mod scenario;

pub use error::{AnalysisError, FormationError, ModelError, QueueError, SolveError};
