//! Simulation and verification laboratory for a wait-free binary consensus
//! protocol built on two monotone arrays of shared bits.
//!
//! Processes race their preferred value along one of two bit arrays; a process
//! decides once it observes that the rival array has fallen a full round
//! behind. The crate provides:
//!
//! * an operation-level interpreter for the protocol with full traces and a
//!   trace validator ([`protocol`]),
//! * exhaustive interleaving exploration for small process counts
//!   ([`protocol::explore`]),
//! * a discrete-event scheduler that delays each operation by random noise,
//!   with per-operation halting failures and bounded adversarial delay
//!   ([`noise`]),
//! * a uniprocessor quantum/priority scheduler and an exhaustive pre-emption
//!   adversary search ([`hybrid`]),
//! * a space-bounded variant that falls back to a pluggable backup protocol
//!   after a fixed number of rounds ([`bounded`]),
//! * analytical helpers for the underlying "race between independent delays"
//!   abstraction ([`race`]),
//! * a deterministic experiment harness with a CLI, seed-stream derivation and
//!   CSV emission ([`harness`]).
//!
//! Everything downstream of a master seed is deterministic: per-trial RNG
//! streams are derived from `(master_seed, stream_index)` so results never
//! depend on thread count or scheduling of the host machine.

pub mod bounded;
pub mod error;
pub mod harness;
pub mod hybrid;
pub mod noise;
pub mod protocol;
pub mod race;

pub use error::{Error, Result};
