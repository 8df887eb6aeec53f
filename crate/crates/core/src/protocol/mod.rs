//! The consensus protocol itself: shared registers, per-process state
//! machine, deterministic replay, trace validation and exhaustive
//! interleaving exploration.
//!
//! A process with preference `p` repeats four operations per round `r`:
//!
//! 1. read `a0[r]`
//! 2. read `a1[r]` — if exactly one of the two values read was 1, adopt
//!    that side as the new preference
//! 3. write 1 to `a_p[r]`
//! 4. read `a_{1-p}[r-1]` — if 0, decide `p`; otherwise advance to round
//!    `r+1`
//!
//! Index 0 of both arrays is a virtual slot that always reads 1, so nobody
//! decides in round 1. The four operations are always executed in full and
//! in order; no short-circuiting ("we already read this") is applied, and
//! correctness depends on that.

pub mod explore;
pub mod process;
pub mod registers;
pub mod replay;
pub mod trace;
pub mod validate;

pub(crate) mod checks;

pub use explore::{explore_all_schedules, ExplorationReport, ExplorationViolation};
pub use process::{
    apply_next_op, init_process, init_processes, init_roster, OpKind, Pid, ProcessState, Step,
    StepEffect,
};
pub use registers::RegisterFile;
pub use replay::{run_with_schedule, schedule_from_text, schedule_to_text, ReplayOutcome};
pub use trace::{DecisionRecord, OpRecord, Trace};
pub use validate::{validate_trace, Check, ValidationReport, Violation};
