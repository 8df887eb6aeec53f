use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::protocol::checks::{decision_violations, write_violations};
use crate::protocol::process::{apply_next_op, init_processes, Pid, ProcessState, Step};
use crate::protocol::registers::RegisterFile;
use crate::protocol::validate::Check;

/// A safety violation found during exploration, with a schedule that
/// reaches it (the DFS prefix, ending at the offending operation; DFS
/// branches in pid order, so this is the lexicographically least witness).
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationViolation {
    pub check: Check,
    pub message: String,
    pub schedule: Vec<Pid>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExplorationReport {
    /// Distinct states reached (after canonicalization).
    pub states_visited: u64,
    /// Deepest DFS stack seen.
    pub max_frontier: usize,
    /// Distinct states in which every process has decided.
    pub terminal_states: u64,
    /// Distinct leaf states where undecided processes remain but all of
    /// them have exhausted the per-process op budget. These are possible
    /// non-terminating executions, not safety violations.
    pub open_branches: u64,
    pub violations: Vec<ExplorationViolation>,
    pub violations_total: u64,
}

impl ExplorationReport {
    pub fn passed(&self) -> bool {
        self.violations_total == 0
    }
}

const MAX_RECORDED_VIOLATIONS: usize = 32;

/// Exhaustively explore every interleaving of the protocol for the given
/// inputs, checking agreement, validity, the round-structure invariant and
/// decision exclusion in every reachable state.
///
/// States are canonicalized as (per-process tuples, register contents), so
/// each reachable state is expanded once; soundness of that pruning rests
/// on all checked properties being state-local (registers are monotone and
/// decisions are permanent). Limited to 4 processes and 24 ops per process.
pub fn explore_all_schedules(
    inputs: &[bool],
    per_process_op_cap: u32,
) -> Result<ExplorationReport> {
    if inputs.is_empty() || inputs.len() > 4 {
        return Err(Error::config(
            "exhaustive exploration supports 1 to 4 processes",
        ));
    }
    if per_process_op_cap == 0 || per_process_op_cap > 24 {
        return Err(Error::config("per-process op cap must be in 1..=24"));
    }
    let procs = init_processes(inputs)?;
    let regs = RegisterFile::unbounded();
    let mut ctx = Ctx {
        inputs: inputs.to_vec(),
        cap: per_process_op_cap,
        visited: HashSet::new(),
        path: Vec::new(),
        report: ExplorationReport::default(),
    };
    ctx.visited.insert(state_key(&procs, &regs));
    dfs(&mut ctx, &procs, &regs, 1);
    Ok(ctx.report)
}

struct Ctx {
    inputs: Vec<bool>,
    cap: u32,
    visited: HashSet<StateKey>,
    path: Vec<Pid>,
    report: ExplorationReport,
}

impl Ctx {
    fn record(&mut self, found: Vec<(Check, String)>) {
        for (check, message) in found {
            self.report.violations_total += 1;
            if self.report.violations.len() < MAX_RECORDED_VIOLATIONS {
                self.report.violations.push(ExplorationViolation {
                    check,
                    message,
                    schedule: self.path.clone(),
                });
            }
        }
    }
}

#[derive(PartialEq, Eq, Hash)]
struct StateKey {
    procs: Vec<(bool, u32, u8, u8)>,
    a0: Vec<bool>,
    a1: Vec<bool>,
}

fn state_key(procs: &[ProcessState], regs: &RegisterFile) -> StateKey {
    StateKey {
        procs: procs
            .iter()
            .map(|p| {
                let step = match p.step {
                    Step::ReadA0 => 0u8,
                    Step::ReadA1 { saw_a0: false } => 1,
                    Step::ReadA1 { saw_a0: true } => 2,
                    Step::WritePref => 3,
                    Step::ReadBehind => 4,
                };
                let decided = match p.decided {
                    None => 0u8,
                    Some(false) => 1,
                    Some(true) => 2,
                };
                (p.preference, p.round, step, decided)
            })
            .collect(),
        a0: regs.bits(false).to_vec(),
        a1: regs.bits(true).to_vec(),
    }
}

fn ops_so_far(p: &ProcessState) -> u32 {
    if p.decided.is_some() {
        4 * p.round
    } else {
        4 * (p.round - 1) + p.step.ordinal()
    }
}

fn dfs(ctx: &mut Ctx, procs: &[ProcessState], regs: &RegisterFile, depth: usize) {
    ctx.report.states_visited += 1;
    if depth > ctx.report.max_frontier {
        ctx.report.max_frontier = depth;
    }

    if procs.iter().all(|p| p.decided.is_some()) {
        ctx.report.terminal_states += 1;
        return;
    }
    let runnable: Vec<Pid> = procs
        .iter()
        .filter(|p| p.is_active() && ops_so_far(p) < ctx.cap)
        .map(|p| p.id)
        .collect();
    if runnable.is_empty() {
        ctx.report.open_branches += 1;
        return;
    }

    for pid in runnable {
        let mut procs2 = procs.to_vec();
        let mut regs2 = regs.clone();
        ctx.path.push(pid);
        if procs2[pid].step == Step::WritePref {
            let found = write_violations(
                &ctx.inputs,
                &procs2,
                &regs2,
                procs2[pid].preference,
                procs2[pid].round,
            );
            ctx.record(found);
        }
        let effect = apply_next_op(&mut procs2[pid], &mut regs2)
            .expect("explored processes are active by construction");
        if let Some(value) = effect.decision {
            let round = procs2[pid].round;
            let found = decision_violations(&ctx.inputs, &procs2, pid, value, round, &regs2);
            ctx.record(found);
        }
        if ctx.visited.insert(state_key(&procs2, &regs2)) {
            dfs(ctx, &procs2, &regs2, depth + 1);
        }
        ctx.path.pop();
    }
}
