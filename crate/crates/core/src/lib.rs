//! Solver and verifier for average-reward continuous-time Markov decision
//! processes on finite (or truncated countable) state spaces.
//!
//! The crate is `no_std` with `alloc`. Everything here is a pure function of
//! its inputs; file formats, the command line and thread pools live in the
//! `ctmdp` companion crate.
//!
//! Layout:
//! - [`model`]: state/action/rate/reward tables, validation, generator
//!   application and truncation of countable models.
//! - [`lyapunov`]: drift, bound and stochastic-monotonicity checks.
//! - [`discounted`]: uniformization and the discounted value iteration.
//! - [`average`]: vanishing-discount gain extraction and a brute-force oracle.
//! - [`verify`]: optimality-inequality certificates and martingale diagnostics.
//! - [`simulate`]: exact event-driven simulation of the controlled process.
//! - [`builtins`]: parametric queueing and population models.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod average;
pub mod builtins;
pub mod discounted;
mod error;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use model::{CtmdpModel, StationaryPolicy};
