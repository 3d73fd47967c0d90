//! Exact simulation and verification of port-based teleportation (PBT).
//!
//! The crate models a PBT protocol as a resource state shared between Alice
//! (`A`) and Bob's ports (`B1..BN`) together with Alice's POVM on the input
//! `a` and `A`. On top of the exact simulator it provides audits of the
//! structural facts that bound PBT success probability:
//!
//! - [`engine`]: branch simulation, port marginals, the port-state mixture
//!   decomposition and input-independence of success branches.
//! - [`no_cloning`]: the unitary-plus-pointer form of an operation and the
//!   consequences forced on any operation that leaves its input intact.
//! - [`primed`]: the Pauli-twirled protocol whose port marginals are
//!   maximally mixed.
//! - [`signaling`]: the superdense-coding chain that pins Bob's guessing
//!   probability, and the resulting bound `N / (4^n + N - 1)`.
//! - [`optimizer`]: a first-order SDP solver that maximizes success
//!   probability over Alice's measurement (and optionally the resource).

pub mod engine;
pub mod error;
pub mod io;
pub mod no_cloning;
pub mod optimizer;
pub mod pauli;
pub mod primed;
pub mod report;
pub mod signaling;
pub mod tensor;
pub mod tolerances;

pub use error::{Error, Result};
