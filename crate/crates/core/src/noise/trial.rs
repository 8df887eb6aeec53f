//! Event-driven execution of one run under a noise model.
//!
//! Each process is one pending event in a priority queue: the completion
//! time of its next operation. Popping the earliest event executes that
//! operation against the shared registers and schedules the process's
//! next one. Ties are broken by process id, then by scheduling order, so
//! a run is a pure function of (inputs, model, generator state).

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::bounded::BackupProtocol;
use crate::error::{Error, Result};
use crate::harness::rng::SimRng;
use crate::noise::model::{NoiseModel, OpTime};
use crate::protocol::process::{apply_next_op, init_processes, Pid};
use crate::protocol::registers::RegisterFile;
use crate::protocol::trace::{DecisionRecord, OpRecord, Trace};

/// Ordering key for pending operations: earliest time first, then lowest
/// process id, then scheduling order. The last two make the order total
/// even when completion times collide exactly.
#[derive(Debug, Clone, Copy)]
pub struct EventKey {
    pub time: f64,
    pub pid: Pid,
    pub seq: u64,
}

impl Ord for EventKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.pid.cmp(&other.pid))
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for EventKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for EventKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for EventKey {}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialOutcome {
    /// At least one process decided and every process either decided or
    /// halted.
    Decided,
    /// Every process halted before deciding.
    AllHalted,
    /// The operation budget ran out with undecided, unhalted processes
    /// remaining.
    NonTerminated,
}

/// Which path produced a process's decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecidedVia {
    /// The racing-bits protocol itself.
    Lean,
    /// The backup decider of a round-bounded run.
    Backup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub outcome: TrialOutcome,
    /// Value of the earliest decision, if any.
    pub value: Option<bool>,
    pub first_decision_round: Option<u32>,
    pub last_decision_round: Option<u32>,
    pub ops_per_process: Vec<u64>,
    pub total_ops: u64,
    /// Number of processes that halted without deciding.
    pub halted: u32,
    pub decided_values: Vec<Option<bool>>,
    pub decided_via: Vec<Option<DecidedVia>>,
    /// Highest register slot any operation touched.
    pub max_register_index: u32,
    /// Times the backup decider broke its contract by returning nothing.
    pub backup_contract_violations: u32,
}

/// Round-bounded mode: processes that outgrow `r_max` register slots stop
/// running the protocol and ask the backup decider instead.
pub(crate) struct BoundedHook<'a> {
    pub r_max: u32,
    pub backup: &'a mut dyn BackupProtocol,
}

/// Run one noisy trial from a fresh generator seeded with `seed`.
///
/// `op_cap` bounds the total number of executed operations across all
/// processes. The trace, if kept, records every operation with its
/// simulated completion time.
pub fn run_noisy_trial(
    inputs: &[bool],
    model: &NoiseModel,
    seed: u64,
    op_cap: u64,
    keep_trace: bool,
) -> Result<(TrialResult, Option<Trace>)> {
    let mut rng = SimRng::seed_from_u64(seed);
    run_event_loop(inputs, model, &mut rng, op_cap, keep_trace, None)
}

/// The engine behind [`run_noisy_trial`] and the round-bounded runner.
///
/// Draw order is part of the determinism contract: all start offsets in
/// pid order, then each operation's draws (halt roll, then delay) in event
/// order. With a hook, a process whose round outgrows `r_max` is handed to
/// the backup immediately after the operation that pushed it over; the
/// backup decision is charged at that operation's completion time and the
/// register file itself is truncated at `r_max` slots per side.
pub(crate) fn run_event_loop(
    inputs: &[bool],
    model: &NoiseModel,
    rng: &mut SimRng,
    op_cap: u64,
    keep_trace: bool,
    mut hook: Option<BoundedHook<'_>>,
) -> Result<(TrialResult, Option<Trace>)> {
    if op_cap == 0 {
        return Err(Error::config("op_cap must be positive"));
    }
    if let Some(h) = &hook {
        if h.r_max == 0 {
            return Err(Error::config("the register bound must be at least 1"));
        }
    }
    let mut procs = init_processes(inputs)?;
    let n = procs.len();
    model.validate(n)?;

    let mut regs = match &hook {
        Some(h) => RegisterFile::bounded(h.r_max),
        None => RegisterFile::unbounded(),
    };
    let mut trace = if keep_trace {
        Some(Trace::new(inputs))
    } else {
        None
    };

    let mut heap: BinaryHeap<Reverse<EventKey>> = BinaryHeap::new();
    let mut seq: u64 = 0;
    let mut halted: u32 = 0;
    let mut total_ops: u64 = 0;
    let mut decisions: Vec<Option<DecisionRecord>> = vec![None; n];
    let mut decided_via: Vec<Option<DecidedVia>> = vec![None; n];
    let mut first_value: Option<bool> = None;
    let mut backup_contract_violations: u32 = 0;

    let starts: Vec<f64> = (0..n).map(|pid| model.start_time(pid, rng)).collect();
    for (pid, &start) in starts.iter().enumerate() {
        let kind = procs[pid].next_op_kind();
        match model.next_op_time(start, kind, pid, 1, rng) {
            OpTime::At(time) => {
                seq += 1;
                heap.push(Reverse(EventKey { time, pid, seq }));
            }
            OpTime::Halt => {
                procs[pid].halted = true;
                halted += 1;
            }
        }
    }

    while let Some(Reverse(ev)) = heap.pop() {
        let pid = ev.pid;
        let round = procs[pid].round;
        let effect = apply_next_op(&mut procs[pid], &mut regs)?;
        total_ops += 1;
        if let Some(tr) = trace.as_mut() {
            tr.ops.push(OpRecord {
                op_index: total_ops,
                pid,
                round,
                kind: effect.kind,
                side: effect.side,
                index: effect.index,
                value: effect.value,
                time: ev.time,
            });
        }
        if let Some(value) = effect.decision {
            let rec = DecisionRecord {
                pid,
                round: procs[pid].round,
                value,
                ops_executed: procs[pid].ops_executed,
            };
            decisions[pid] = Some(rec);
            decided_via[pid] = Some(DecidedVia::Lean);
            first_value.get_or_insert(value);
            if let Some(tr) = trace.as_mut() {
                tr.decisions.push(rec);
            }
            continue;
        }
        if let Some(h) = hook.as_mut() {
            if procs[pid].round > h.r_max {
                match h.backup.propose(pid, procs[pid].preference) {
                    Some(value) => {
                        procs[pid].decided = Some(value);
                        let rec = DecisionRecord {
                            pid,
                            round: procs[pid].round,
                            value,
                            ops_executed: procs[pid].ops_executed,
                        };
                        decisions[pid] = Some(rec);
                        decided_via[pid] = Some(DecidedVia::Backup);
                        first_value.get_or_insert(value);
                    }
                    None => {
                        backup_contract_violations += 1;
                        procs[pid].halted = true;
                        halted += 1;
                    }
                }
                continue;
            }
        }
        if total_ops >= op_cap {
            break;
        }
        let kind = procs[pid].next_op_kind();
        let j = procs[pid].ops_executed + 1;
        match model.next_op_time(ev.time, kind, pid, j, rng) {
            OpTime::At(time) => {
                seq += 1;
                heap.push(Reverse(EventKey { time, pid, seq }));
            }
            OpTime::Halt => {
                procs[pid].halted = true;
                halted += 1;
            }
        }
    }

    let any_decided = decisions.iter().any(Option::is_some);
    let outcome = if procs.iter().any(|p| p.is_active()) {
        TrialOutcome::NonTerminated
    } else if any_decided {
        TrialOutcome::Decided
    } else {
        TrialOutcome::AllHalted
    };
    let result = TrialResult {
        outcome,
        value: first_value,
        first_decision_round: decisions.iter().flatten().map(|d| d.round).min(),
        last_decision_round: decisions.iter().flatten().map(|d| d.round).max(),
        ops_per_process: procs.iter().map(|p| p.ops_executed).collect(),
        total_ops,
        halted,
        decided_values: decisions.iter().map(|d| d.map(|r| r.value)).collect(),
        decided_via,
        max_register_index: regs.max_index_touched(),
        backup_contract_violations,
    };
    Ok((result, trace))
}
