//! Noisy scheduling: every operation of every process is delayed by an
//! adversarial component (bounded by `M`), a random component drawn from a
//! per-operation-type distribution, and — with some probability per
//! operation — a halting failure that removes the process outright.
//!
//! Operation `j` of process `i` completes at
//! `start_i + sum_{k=1..j} (delta_{ik} + X_{ik})`, or never, if any of the
//! first `j` halt rolls failed. A trial executes operations globally in
//! completion-time order (ties broken by pid, then per-process sequence
//! number), which makes a trial a pure function of its RNG stream.

pub mod dist;
pub mod model;
pub mod sweep;
pub mod trial;

pub use dist::DelayDistribution;
pub use model::{DeltaPolicy, NoiseModel, OpTime, StartOffsets};
pub use sweep::{inputs_for, run_sweep, InputsPolicy, SweepRow, SWEEP_CSV_HEADER};
pub use trial::{run_noisy_trial, DecidedVia, EventKey, TrialOutcome, TrialResult};
