use crate::error::{Error, Result};
use crate::protocol::registers::RegisterFile;

pub type Pid = usize;

/// Which of the four intra-round operations runs next.
///
/// `ReadA1` carries the value read from `a0[r]` in the preceding step; the
/// preference rule is applied only once both round-`r` reads are in hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    ReadA0,
    ReadA1 { saw_a0: bool },
    WritePref,
    ReadBehind,
}

impl Step {
    /// Position within the round, 0..=3.
    pub fn ordinal(self) -> u32 {
        match self {
            Step::ReadA0 => 0,
            Step::ReadA1 { .. } => 1,
            Step::WritePref => 2,
            Step::ReadBehind => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum OpKind {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessState {
    pub id: Pid,
    pub input: bool,
    pub preference: bool,
    pub round: u32,
    pub step: Step,
    pub decided: Option<bool>,
    pub ops_executed: u64,
    pub halted: bool,
}

impl ProcessState {
    pub fn is_active(&self) -> bool {
        self.decided.is_none() && !self.halted
    }

    /// Operation kind of the next step (three reads, one write per round).
    pub fn next_op_kind(&self) -> OpKind {
        match self.step {
            Step::WritePref => OpKind::Write,
            _ => OpKind::Read,
        }
    }
}

/// Fresh process: preference = input, round 1, about to read `a0[1]`.
pub fn init_process(id: Pid, input: bool) -> ProcessState {
    ProcessState {
        id,
        input,
        preference: input,
        round: 1,
        step: Step::ReadA0,
        decided: None,
        ops_executed: 0,
        halted: false,
    }
}

/// Processes 0..n with the given input bits. At least one is required.
pub fn init_processes(inputs: &[bool]) -> Result<Vec<ProcessState>> {
    if inputs.is_empty() {
        return Err(Error::config("at least one process is required"));
    }
    Ok(inputs
        .iter()
        .enumerate()
        .map(|(id, &b)| init_process(id, b))
        .collect())
}

/// Explicit (id, input) pairs; ids must be unique.
pub fn init_roster(pairs: &[(Pid, bool)]) -> Result<Vec<ProcessState>> {
    if pairs.is_empty() {
        return Err(Error::config("at least one process is required"));
    }
    let mut seen = std::collections::HashSet::new();
    for &(id, _) in pairs {
        if !seen.insert(id) {
            return Err(Error::config(format!("duplicate process id {id}")));
        }
    }
    Ok(pairs.iter().map(|&(id, b)| init_process(id, b)).collect())
}

/// What a single operation did: which register access, and whether the
/// process decided as a result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEffect {
    pub kind: OpKind,
    pub side: bool,
    pub index: u32,
    pub value: bool,
    pub decision: Option<bool>,
}

/// Execute the process's next operation against the shared registers.
///
/// Stepping a decided or halted process is a harness bug and reports a
/// logic error rather than doing anything.
pub fn apply_next_op(p: &mut ProcessState, regs: &mut RegisterFile) -> Result<StepEffect> {
    if p.decided.is_some() {
        return Err(Error::logic(format!("process {} already decided", p.id)));
    }
    if p.halted {
        return Err(Error::logic(format!("process {} has halted", p.id)));
    }
    let effect = match p.step {
        Step::ReadA0 => {
            let v = regs.read(false, p.round);
            p.step = Step::ReadA1 { saw_a0: v };
            StepEffect {
                kind: OpKind::Read,
                side: false,
                index: p.round,
                value: v,
                decision: None,
            }
        }
        Step::ReadA1 { saw_a0 } => {
            let v = regs.read(true, p.round);
            // Adopt a side only if exactly one of the two round-r bits was
            // seen set. Both-zero and both-one leave the preference alone.
            if saw_a0 != v {
                p.preference = v;
            }
            p.step = Step::WritePref;
            StepEffect {
                kind: OpKind::Read,
                side: true,
                index: p.round,
                value: v,
                decision: None,
            }
        }
        Step::WritePref => {
            regs.write_one(p.preference, p.round);
            let side = p.preference;
            let index = p.round;
            p.step = Step::ReadBehind;
            StepEffect {
                kind: OpKind::Write,
                side,
                index,
                value: true,
                decision: None,
            }
        }
        Step::ReadBehind => {
            let side = !p.preference;
            let index = p.round - 1;
            let v = regs.read(side, index);
            let decision = if v {
                p.round += 1;
                p.step = Step::ReadA0;
                None
            } else {
                p.decided = Some(p.preference);
                Some(p.preference)
            };
            StepEffect {
                kind: OpKind::Read,
                side,
                index,
                value: v,
                decision,
            }
        }
    };
    p.ops_executed += 1;
    Ok(effect)
}
