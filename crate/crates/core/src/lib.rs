//! Simulator and analysis toolkit for consensus-based distributed stochastic
//! optimization over a fixed communication graph.
//!
//! The crate implements a family of synchronous decentralized SGD update
//! rules (CDSGD, i-CDSGD, g-CDSGD and their Nesterov-momentum variants)
//! together with the spectral, Lyapunov and convergence machinery needed to
//! check their consensus and optimality bounds on desk-scale objectives.
//!
//! Modules:
//! - [`topology`]: communication graphs, doubly stochastic interaction
//!   matrices and their spectra.
//! - [`objectives`]: per-agent losses with exact and minibatch gradients plus
//!   the smoothness/strong-convexity constants the bounds consume.
//! - [`partition`]: reproducible balanced/unbalanced/class-biased data splits.
//! - [`algorithms`]: the update rules as pure state transitions.
//! - [`analysis`]: Lyapunov values/gradients, closed-form bounds, contraction
//!   constants and brute-force oracles.
//! - [`harness`]: experiment configuration, trajectory recording, metric
//!   export and the CLI entry points.

pub mod algorithms;
pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod objectives;
pub mod partition;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
