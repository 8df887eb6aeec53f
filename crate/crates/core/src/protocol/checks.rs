//! State-local safety checks shared by the exhaustive explorers.
//!
//! Because register bits are monotone and decided processes never change,
//! every trace-level property the validator checks has an equivalent
//! formulation on (process states, registers) at each step. That is what
//! makes exploration with visited-state deduplication sound: it is enough
//! to check each reachable state once.

use crate::protocol::process::ProcessState;
use crate::protocol::registers::RegisterFile;
use crate::protocol::validate::Check;

/// Checks to run when a process is about to set `a_side[index]`
/// (`regs` not yet updated).
pub(crate) fn write_violations(
    inputs: &[bool],
    procs: &[ProcessState],
    regs: &RegisterFile,
    side: bool,
    index: u32,
) -> Vec<(Check, String)> {
    let mut out = Vec::new();
    let name = if side { "a1" } else { "a0" };
    if index == 1 {
        if !inputs.contains(&side) {
            out.push((
                Check::RoundStructure,
                format!("{name}[1] set but {} is nobody's input", side as u8),
            ));
        }
    } else if !regs.peek(side, index - 1) {
        out.push((
            Check::RoundStructure,
            format!("{name}[{index}] set before {name}[{}]", index - 1),
        ));
    }
    for p in procs {
        if p.decided == Some(!side) && p.round == index {
            out.push((
                Check::DecisionExclusion,
                format!(
                    "{name}[{index}] written although process {} decided {} at round {index}",
                    p.id, !side as u8
                ),
            ));
        }
    }
    out
}

/// Checks to run right after `deciding_pid` decided `value` at `round`
/// (`procs` already reflects the decision).
pub(crate) fn decision_violations(
    inputs: &[bool],
    procs: &[ProcessState],
    deciding_pid: usize,
    value: bool,
    round: u32,
    regs: &RegisterFile,
) -> Vec<(Check, String)> {
    let mut out = Vec::new();
    if !inputs.contains(&value) {
        out.push((
            Check::Validity,
            format!(
                "process {deciding_pid} decided {} which is nobody's input",
                value as u8
            ),
        ));
    }
    if regs.peek(!value, round) {
        out.push((
            Check::DecisionExclusion,
            format!(
                "process {deciding_pid} decided {} at round {round} but the rival bit is set",
                value as u8
            ),
        ));
    }
    for p in procs {
        if p.id == deciding_pid {
            continue;
        }
        if let Some(v) = p.decided {
            if v != value {
                out.push((
                    Check::Agreement,
                    format!(
                        "process {deciding_pid} decided {} but process {} decided {}",
                        value as u8, p.id, v as u8
                    ),
                ));
            }
            if p.round.abs_diff(round) > 1 {
                out.push((
                    Check::DecisionExclusion,
                    format!(
                        "decision rounds {round} (process {deciding_pid}) and {} (process {}) \
                         are more than one apart",
                        p.round, p.id
                    ),
                ));
            }
        }
    }
    out
}
