use crate::error::{Error, Result};
use crate::protocol::process::{apply_next_op, init_processes, Pid};
use crate::protocol::registers::RegisterFile;
use crate::protocol::trace::{DecisionRecord, OpRecord, Trace};

/// Result of a schedule-driven run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    /// Per-process decision, indexed by pid.
    pub decisions: Vec<Option<DecisionRecord>>,
    pub ops_per_process: Vec<u64>,
    /// True when the schedule or op budget ran out with undecided processes.
    pub non_terminated: bool,
}

/// Execute operations in exactly the order given by `schedule` (a list of
/// process ids). Entries naming an already-decided process are skipped
/// without consuming an operation, so replaying a recorded schedule past a
/// decision still works. Runs until the schedule is exhausted, `op_cap`
/// operations have executed, or everyone has decided.
///
/// Deterministic: the same inputs and schedule always produce an identical
/// trace. Simulated time is the global operation index.
pub fn run_with_schedule(
    inputs: &[bool],
    schedule: &[Pid],
    op_cap: u64,
) -> Result<(ReplayOutcome, Trace)> {
    if op_cap == 0 {
        return Err(Error::config("op_cap must be positive"));
    }
    let mut procs = init_processes(inputs)?;
    let n = procs.len();
    if let Some(&bad) = schedule.iter().find(|&&pid| pid >= n) {
        return Err(Error::config(format!(
            "schedule references process {bad} but only {n} processes exist"
        )));
    }

    let mut regs = RegisterFile::unbounded();
    let mut trace = Trace::new(inputs);
    let mut decisions: Vec<Option<DecisionRecord>> = vec![None; n];
    let mut undecided = n;
    let mut ops: u64 = 0;

    for &pid in schedule {
        if undecided == 0 || ops == op_cap {
            break;
        }
        if procs[pid].decided.is_some() {
            continue; // skip-and-continue policy
        }
        let round = procs[pid].round;
        let effect = apply_next_op(&mut procs[pid], &mut regs)?;
        ops += 1;
        trace.ops.push(OpRecord {
            op_index: ops,
            pid,
            round,
            kind: effect.kind,
            side: effect.side,
            index: effect.index,
            value: effect.value,
            time: ops as f64,
        });
        if let Some(value) = effect.decision {
            let rec = DecisionRecord {
                pid,
                round: procs[pid].round,
                value,
                ops_executed: procs[pid].ops_executed,
            };
            decisions[pid] = Some(rec);
            trace.decisions.push(rec);
            undecided -= 1;
        }
    }

    let outcome = ReplayOutcome {
        decisions,
        ops_per_process: procs.iter().map(|p| p.ops_executed).collect(),
        non_terminated: undecided > 0,
    };
    Ok((outcome, trace))
}

/// One pid per line; blank lines and `#` comments ignored.
pub fn schedule_to_text(schedule: &[Pid]) -> String {
    let mut s = String::new();
    for pid in schedule {
        s.push_str(&pid.to_string());
        s.push('\n');
    }
    s
}

pub fn schedule_from_text(text: &str) -> Result<Vec<Pid>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let pid: Pid = line
            .parse()
            .map_err(|_| Error::config(format!("bad schedule line {}: {line:?}", lineno + 1)))?;
        out.push(pid);
    }
    Ok(out)
}

/// Round-robin schedule over `n` processes, `cycles` full turns.
pub fn round_robin(n: usize, cycles: usize) -> Vec<Pid> {
    (0..cycles).flat_map(|_| 0..n).collect()
}
