//! Pinching-antenna ISAC simulation and a heterogeneous-graph actor-critic
//! optimizer for joint antenna positioning, TDMA allocation and power control.
//!
//! The crate is layered bottom-up:
//!
//! - [`geometry`]: waveguides, deployments and the antenna spacing projection.
//! - [`channel`]: near-field LoS channel coefficients and coherent gains.
//! - [`metrics`]: communication rate, sensing SNR, energy and feasibility.
//! - [`env`]: the episodic decision process with graph-structured state.
//! - [`neural`]: a small matrix tape for reverse-mode gradients plus layers.
//! - [`agent`]: the graph actor-critic trainer and its baselines.
//! - [`exp`]: configuration, experiment orchestration and reports.

pub mod agent;
pub mod channel;
pub mod env;
pub mod error;
pub mod exp;
pub mod geometry;
pub mod metrics;
pub mod neural;

pub use error::{Error, Result};
