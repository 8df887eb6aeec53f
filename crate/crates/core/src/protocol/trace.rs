use serde::{Deserialize, Serialize};

use crate::protocol::process::{OpKind, Pid};

/// One shared-memory operation as it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    /// 1-based global sequence number.
    pub op_index: u64,
    pub pid: Pid,
    /// Protocol round the process was in when it executed this op.
    pub round: u32,
    pub kind: OpKind,
    /// Which array (`false` = a0, `true` = a1).
    pub side: bool,
    pub index: u32,
    /// Value read, or value written (always `true` for writes).
    pub value: bool,
    /// Simulated time. Schedule-driven runs use the global op index.
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub pid: Pid,
    pub round: u32,
    pub value: bool,
    pub ops_executed: u64,
}

/// Complete record of one execution: inputs, every operation in global
/// order, and the decisions in the order they happened.
///
/// Reads in a valid trace return the value of the latest preceding write to
/// the same location (interleaving semantics, no caching); the validator
/// re-checks that rather than trusting it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub inputs: Vec<bool>,
    pub ops: Vec<OpRecord>,
    pub decisions: Vec<DecisionRecord>,
}

impl Trace {
    pub fn new(inputs: &[bool]) -> Self {
        Trace {
            inputs: inputs.to_vec(),
            ops: Vec::new(),
            decisions: Vec::new(),
        }
    }
}
