//! Experiment plumbing: seed derivation, CSV experiment drivers, and the
//! command-line front end.

pub mod cli;
pub mod figure;
pub mod rng;

pub use rng::{derive_stream, mix_tag, SimRng};
