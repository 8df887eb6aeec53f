use std::collections::HashMap;
use std::fmt;

use crate::protocol::process::OpKind;
use crate::protocol::trace::Trace;

/// Which safety property a violation falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    /// All decisions carry the same value.
    Agreement,
    /// With unanimous inputs, every decision equals that input.
    Validity,
    /// A round-r bit may be set only if r = 1 and the side is some
    /// process's input, or r > 1 and the round-(r-1) bit was already set.
    /// Also covers write monotonicity (writes only ever store 1).
    RoundStructure,
    /// Once some process decides b at round r, no write to the rival array
    /// at index r may appear anywhere in the trace, and all decisions land
    /// within one round of each other.
    DecisionExclusion,
    /// A read did not return the value of the latest preceding write.
    ReplayConsistency,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Check::Agreement => "agreement",
            Check::Validity => "validity",
            Check::RoundStructure => "round-structure",
            Check::DecisionExclusion => "decision-exclusion",
            Check::ReplayConsistency => "replay-consistency",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: Check,
    pub message: String,
    /// Global op index the violation is attached to, where applicable.
    pub op_index: Option<u64>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op_index {
            Some(i) => write!(f, "[{}] op {}: {}", self.check, i, self.message),
            None => write!(f, "[{}] {}", self.check, self.message),
        }
    }
}

/// Outcome of validating a trace. Violations are collected, never thrown:
/// a malformed trace produces report entries, not errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub ops_checked: u64,
    pub decisions_checked: u64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-examine a trace against every safety property.
///
/// The register history is rebuilt from the write records alone, so a trace
/// whose reads disagree with interleaving semantics is reported under
/// `ReplayConsistency` rather than silently believed.
pub fn validate_trace(trace: &Trace) -> ValidationReport {
    let mut violations = Vec::new();
    let mut regs: [HashMap<u32, u64>; 2] = [HashMap::new(), HashMap::new()]; // index -> op set at
    let side_name = |side: bool| if side { "a1" } else { "a0" };

    // Pass over ops: replay consistency + the fixed four-op round pattern.
    for op in &trace.ops {
        match op.kind {
            OpKind::Read => {
                let expected = op.index == 0 || regs[op.side as usize].contains_key(&op.index);
                if op.value != expected {
                    violations.push(Violation {
                        check: Check::ReplayConsistency,
                        message: format!(
                            "read of {}[{}] by process {} returned {} but register holds {}",
                            side_name(op.side),
                            op.index,
                            op.pid,
                            op.value as u8,
                            expected as u8
                        ),
                        op_index: Some(op.op_index),
                    });
                }
            }
            OpKind::Write => {
                if !op.value {
                    violations.push(Violation {
                        check: Check::RoundStructure,
                        message: format!(
                            "write of 0 to {}[{}] (bits are monotone)",
                            side_name(op.side),
                            op.index
                        ),
                        op_index: Some(op.op_index),
                    });
                }
                if op.index == 1 {
                    if !trace.inputs.contains(&op.side) {
                        violations.push(Violation {
                            check: Check::RoundStructure,
                            message: format!(
                                "{}[1] set but {} is nobody's input",
                                side_name(op.side),
                                op.side as u8
                            ),
                            op_index: Some(op.op_index),
                        });
                    }
                } else if !regs[op.side as usize].contains_key(&(op.index - 1)) {
                    violations.push(Violation {
                        check: Check::RoundStructure,
                        message: format!(
                            "{}[{}] set before {}[{}]",
                            side_name(op.side),
                            op.index,
                            side_name(op.side),
                            op.index - 1
                        ),
                        op_index: Some(op.op_index),
                    });
                }
                regs[op.side as usize].entry(op.index).or_insert(op.op_index);
            }
        }
    }

    // Agreement.
    if let Some(first) = trace.decisions.first() {
        for d in &trace.decisions[1..] {
            if d.value != first.value {
                violations.push(Violation {
                    check: Check::Agreement,
                    message: format!(
                        "process {} decided {} but process {} decided {}",
                        first.pid, first.value as u8, d.pid, d.value as u8
                    ),
                    op_index: None,
                });
            }
        }
    }

    // Validity (unanimous inputs only; mixed inputs allow either value).
    if let Some(&b) = trace.inputs.first() {
        if trace.inputs.iter().all(|&x| x == b) {
            for d in &trace.decisions {
                if d.value != b {
                    violations.push(Violation {
                        check: Check::Validity,
                        message: format!(
                            "unanimous input {} but process {} decided {}",
                            b as u8, d.pid, d.value as u8
                        ),
                        op_index: None,
                    });
                }
            }
        }
    }

    // Decision exclusion: no rival write at the decision round, ever; and
    // all decisions within one round of the earliest.
    for d in &trace.decisions {
        if let Some(&write_op) = regs[(!d.value) as usize].get(&d.round) {
            violations.push(Violation {
                check: Check::DecisionExclusion,
                message: format!(
                    "process {} decided {} at round {} but {}[{}] was written",
                    d.pid,
                    d.value as u8,
                    d.round,
                    side_name(!d.value),
                    d.round
                ),
                op_index: Some(write_op),
            });
        }
    }
    if let Some(min) = trace.decisions.iter().map(|d| d.round).min() {
        for d in &trace.decisions {
            if d.round > min + 1 {
                violations.push(Violation {
                    check: Check::DecisionExclusion,
                    message: format!(
                        "decision rounds spread too far: {} decided at round {}, earliest was {}",
                        d.pid, d.round, min
                    ),
                    op_index: None,
                });
            }
        }
    }

    ValidationReport {
        violations,
        ops_checked: trace.ops.len() as u64,
        decisions_checked: trace.decisions.len() as u64,
    }
}
