//! Priority-scheduler executions: scripted replay and exhaustive search.
//!
//! Models a uniprocessor running the protocol's processes under a strict
//! priority scheduler with a round-robin quantum inside each priority
//! level. The processor switch rules are:
//!
//! * a strictly higher-priority process preempts the runner the moment it
//!   arrives (arrival times are adversary-chosen);
//! * an equal-priority process can take over only when the runner's
//!   quantum is exhausted;
//! * a lower-priority process runs only once everything above it has
//!   decided and exited.
//!
//! A resumed process always gets a fresh quantum. A process's *first*
//! activation may start with part of its quantum already consumed — it
//! was doing unrelated work when the quantum started ticking — which
//! `initial_quantum_used` captures per process.
//!
//! The interest of this model: with a quantum of at least 8 operations
//! (two protocol rounds) and fresh first quanta, every legal execution
//! decides within 12 operations per process, and the search proves the
//! exact worst case instead of trusting the argument. The search also
//! shows the fine print matters: see the staggered-start test at the
//! bottom for a pair of part-consumed first quanta that reintroduce
//! lockstep and break the bound.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::protocol::checks::{decision_violations, write_violations};
use crate::protocol::process::{apply_next_op, init_processes, Pid, ProcessState, Step};
use crate::protocol::registers::RegisterFile;
use crate::protocol::replay::ReplayOutcome;
use crate::protocol::trace::{DecisionRecord, OpRecord, Trace};
use crate::protocol::validate::Check;

/// Scheduler parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HybridConfig {
    /// Per-process priority; only the order matters, higher wins.
    pub priorities: Vec<i32>,
    /// Operations per quantum.
    pub quantum: u32,
    /// Operations already consumed from each process's first quantum when
    /// it executes its first protocol operation. Must be < `quantum`.
    pub initial_quantum_used: Vec<u32>,
    /// Total operation budget across all processes (scripted runs).
    pub op_cap: u64,
}

impl HybridConfig {
    /// Fresh-quanta configuration: every process starts at the beginning
    /// of a quantum.
    pub fn fresh(priorities: Vec<i32>, quantum: u32) -> Self {
        let n = priorities.len();
        HybridConfig {
            priorities,
            quantum,
            initial_quantum_used: vec![0; n],
            op_cap: 100_000,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.priorities.len() != n {
            return Err(Error::config("priorities must cover all processes"));
        }
        if self.initial_quantum_used.len() != n {
            return Err(Error::config(
                "initial quantum usage must cover all processes",
            ));
        }
        if self.quantum == 0 {
            return Err(Error::config("quantum must be at least 1"));
        }
        if let Some(bad) = self.initial_quantum_used.iter().find(|&&u| u >= self.quantum) {
            return Err(Error::config(format!(
                "initial quantum usage {bad} leaves no budget (quantum {})",
                self.quantum
            )));
        }
        if self.op_cap == 0 {
            return Err(Error::config("op_cap must be positive"));
        }
        Ok(())
    }

    /// Ops the process may run in its first activation before an
    /// equal-priority switch becomes legal.
    fn first_budget(&self, pid: Pid) -> u32 {
        self.quantum - self.initial_quantum_used[pid]
    }
}

/// `ops` consecutive operations by `pid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub pid: Pid,
    pub ops: u32,
}

impl Segment {
    pub fn new(pid: Pid, ops: u32) -> Self {
        Segment { pid, ops }
    }
}

struct Stint {
    pid: Pid,
    len: u64,
    /// Ops until the first legal equal-priority switch point.
    start_budget: u64,
    exited: bool,
}

/// Replay a script of segments under the scheduler rules, rejecting any
/// switch the scheduler could not have made.
///
/// Adjacent segments naming the same process merge into one stint.
/// Segments naming an already-decided process are skipped. A process that
/// decides mid-segment keeps the decision and drops the segment
/// remainder. Simulated time is the global operation index.
pub fn run_hybrid_trial(
    inputs: &[bool],
    config: &HybridConfig,
    script: &[Segment],
) -> Result<(ReplayOutcome, Trace)> {
    let n = inputs.len();
    config.validate(n)?;
    let mut procs = init_processes(inputs)?;
    let quantum = u64::from(config.quantum);
    let pri = &config.priorities;

    let mut regs = RegisterFile::unbounded();
    let mut trace = Trace::new(inputs);
    let mut decisions: Vec<Option<DecisionRecord>> = vec![None; n];
    let mut started = vec![false; n];
    let mut cur: Option<Stint> = None;
    let mut total_ops: u64 = 0;

    'script: for (index, seg) in script.iter().enumerate() {
        let pid = seg.pid;
        if pid >= n {
            return Err(Error::config(format!(
                "segment {index} references process {pid} but only {n} processes exist"
            )));
        }
        if seg.ops == 0 {
            return Err(Error::config(format!("segment {index} has zero ops")));
        }
        if procs[pid].decided.is_some() {
            continue;
        }

        let continues = matches!(&cur, Some(st) if st.pid == pid && !st.exited);
        if !continues {
            check_switch(cur.as_ref(), pid, pri, quantum, index)?;
            for r in 0..n {
                if r != pid && started[r] && procs[r].is_active() && pri[r] > pri[pid] {
                    return Err(Error::Strategy {
                        index,
                        reason: format!(
                            "process {pid} cannot run while higher-priority process {r} is active"
                        ),
                    });
                }
            }
            let first = !started[pid];
            started[pid] = true;
            let start_budget = if first {
                u64::from(config.first_budget(pid))
            } else {
                quantum
            };
            cur = Some(Stint {
                pid,
                len: 0,
                start_budget,
                exited: false,
            });
        }

        let stint = cur.as_mut().expect("stint was just ensured");
        for _ in 0..seg.ops {
            if total_ops >= config.op_cap {
                break 'script;
            }
            let round = procs[pid].round;
            let effect = apply_next_op(&mut procs[pid], &mut regs)?;
            total_ops += 1;
            stint.len += 1;
            trace.ops.push(OpRecord {
                op_index: total_ops,
                pid,
                round,
                kind: effect.kind,
                side: effect.side,
                index: effect.index,
                value: effect.value,
                time: total_ops as f64,
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
                stint.exited = true;
                break;
            }
        }
    }

    let outcome = ReplayOutcome {
        decisions,
        ops_per_process: procs.iter().map(|p| p.ops_executed).collect(),
        non_terminated: procs.iter().any(|p| p.is_active()),
    };
    Ok((outcome, trace))
}

fn check_switch(
    prev: Option<&Stint>,
    next: Pid,
    pri: &[i32],
    quantum: u64,
    index: usize,
) -> Result<()> {
    let Some(st) = prev else {
        return Ok(()); // first stint of the run
    };
    if st.exited {
        return Ok(()); // free scheduling decision after an exit
    }
    let (pp, pq) = (pri[st.pid], pri[next]);
    if pq > pp {
        return Ok(()); // preemptive arrival
    }
    if pq < pp {
        return Err(Error::Strategy {
            index,
            reason: format!(
                "process {next} has lower priority than the still-active process {}",
                st.pid
            ),
        });
    }
    // equal priority: only at a quantum boundary
    if st.len < st.start_budget || (st.len - st.start_budget) % quantum != 0 {
        return Err(Error::Strategy {
            index,
            reason: format!(
                "equal-priority switch from process {} after {} ops, but its quantum \
                 boundaries fall at {} + k*{quantum}",
                st.pid, st.len, st.start_budget
            ),
        });
    }
    Ok(())
}

/// A concrete execution found by the search: which inputs, which
/// priorities, and the operation-level pid sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub inputs: Vec<bool>,
    pub priorities: Vec<i32>,
    pub ops: Vec<Pid>,
}

impl Witness {
    /// Run-length encode the op sequence into a replayable script.
    pub fn to_segments(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = Vec::new();
        for &pid in &self.ops {
            match out.last_mut() {
                Some(seg) if seg.pid == pid => seg.ops += 1,
                _ => out.push(Segment::new(pid, 1)),
            }
        }
        out
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inputs: String = self.inputs.iter().map(|&b| if b { '1' } else { '0' }).collect();
        write!(f, "inputs {inputs} priorities {:?} script", self.priorities)?;
        for seg in self.to_segments() {
            write!(f, " P{}x{}", seg.pid, seg.ops)?;
        }
        Ok(())
    }
}

/// What an exhaustive search over one scheduler configuration found.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchReport {
    pub n: usize,
    pub quantum: u32,
    /// Priority assignments covered (1 for a single-config search).
    pub priority_assignments: u64,
    pub states_visited: u64,
    /// Most operations any process had executed at its decision.
    pub max_ops_to_decide: u64,
    pub max_witness: Option<Witness>,
    /// Was a state reached with both round-1 bits set and nobody decided?
    pub both_round1_bits_before_decision: bool,
    pub both_bits_witness: Option<Witness>,
    /// Branches abandoned because a process would pass `depth_cap` ops
    /// undecided. Zero means the cap provably bounds every execution.
    pub capped_branches: u64,
    /// Suspension windows that closed without an exit or an 8-op burst
    /// (only counted when chain tracking is on).
    pub chain_violations: u64,
    pub chain_witness: Option<Witness>,
    pub safety_violations: u64,
    pub safety_samples: Vec<String>,
    /// Per input vector, the worst ops-to-decide over all branches.
    pub per_input: Vec<(Vec<bool>, u64)>,
}

impl SearchReport {
    pub fn passed(&self) -> bool {
        self.safety_violations == 0
    }

    fn absorb(&mut self, other: SearchReport) {
        self.states_visited += other.states_visited;
        self.priority_assignments += other.priority_assignments;
        self.capped_branches += other.capped_branches;
        self.chain_violations += other.chain_violations;
        self.safety_violations += other.safety_violations;
        for msg in other.safety_samples {
            if self.safety_samples.len() < MAX_SAFETY_SAMPLES {
                self.safety_samples.push(msg);
            }
        }
        if other.max_ops_to_decide > self.max_ops_to_decide {
            self.max_ops_to_decide = other.max_ops_to_decide;
            self.max_witness = other.max_witness;
        }
        if other.both_round1_bits_before_decision && !self.both_round1_bits_before_decision {
            self.both_round1_bits_before_decision = true;
            self.both_bits_witness = other.both_bits_witness;
        }
        if self.chain_witness.is_none() {
            self.chain_witness = other.chain_witness;
        }
        if self.per_input.is_empty() {
            self.per_input = other.per_input;
        } else {
            for (mine, theirs) in self.per_input.iter_mut().zip(other.per_input) {
                mine.1 = mine.1.max(theirs.1);
            }
        }
    }
}

impl fmt::Display for SearchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "search n={} quantum={} priority_assignments={} states={}",
            self.n, self.quantum, self.priority_assignments, self.states_visited
        )?;
        for (inputs, max) in &self.per_input {
            let bits: String = inputs.iter().map(|&b| if b { '1' } else { '0' }).collect();
            writeln!(f, "  inputs {bits}: max ops to decide {max}")?;
        }
        writeln!(f, "  max ops to decide: {}", self.max_ops_to_decide)?;
        if let Some(w) = &self.max_witness {
            writeln!(f, "  worst case: {w}")?;
        }
        writeln!(
            f,
            "  both round-1 bits before any decision: {}",
            self.both_round1_bits_before_decision
        )?;
        if let Some(w) = &self.both_bits_witness {
            writeln!(f, "  both-bits case: {w}")?;
        }
        writeln!(f, "  capped branches: {}", self.capped_branches)?;
        writeln!(f, "  safety violations: {}", self.safety_violations)?;
        Ok(())
    }
}

const MAX_SAFETY_SAMPLES: usize = 8;
/// Burst length that counts as "a full quantum's worth of progress" for
/// chain tracking: two complete protocol rounds.
const CHAIN_BURST: u32 = 8;

/// Exhaustively explore every legal scheduler execution of `config` over
/// every input vector, recording the worst number of own-operations any
/// process needs to decide, whether both round-1 bits can be set before
/// any decision, and any safety violations along the way.
///
/// `depth_cap` bounds each process's operations; branches that would
/// exceed it are counted in `capped_branches`, so a zero there makes the
/// reported maximum exhaustive. `track_chain` additionally verifies that
/// every suspended process stays off the CPU until another process exits
/// or runs 8 consecutive operations.
pub fn search_worst_case(
    config: &HybridConfig,
    depth_cap: u32,
    track_chain: bool,
) -> Result<SearchReport> {
    let n = config.priorities.len();
    if n == 0 || n > 4 {
        return Err(Error::config(
            "the scheduler search supports 1 to 4 processes",
        ));
    }
    config.validate(n)?;
    if depth_cap == 0 || depth_cap > 24 {
        return Err(Error::config("depth cap must be in 1..=24"));
    }

    let mut report = SearchReport {
        n,
        quantum: config.quantum,
        priority_assignments: 1,
        ..SearchReport::default()
    };
    for mask in 0..(1usize << n) {
        let inputs: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let procs = init_processes(&inputs)?;
        let sched = SchedState {
            runner: None,
            budget: 0,
            burst: 0,
            started: vec![false; n],
            chain: vec![0; n],
        };
        let mut ctx = SearchCtx {
            inputs: &inputs,
            config,
            depth_cap: u64::from(depth_cap),
            track_chain,
            visited: HashSet::new(),
            path: Vec::new(),
            states_visited: 0,
            max_ops: 0,
            max_path: None,
            both_bits_path: None,
            capped: 0,
            chain_violations: 0,
            chain_path: None,
            safety_total: 0,
            safety_samples: Vec::new(),
        };
        let regs = RegisterFile::unbounded();
        ctx.visited.insert(state_key(&procs, &regs, &sched, track_chain));
        dfs(&mut ctx, &procs, &regs, &sched);

        report.states_visited += ctx.states_visited;
        report.capped_branches += ctx.capped;
        report.chain_violations += ctx.chain_violations;
        report.safety_violations += ctx.safety_total;
        for msg in ctx.safety_samples {
            if report.safety_samples.len() < MAX_SAFETY_SAMPLES {
                report.safety_samples.push(msg);
            }
        }
        report.per_input.push((inputs.clone(), ctx.max_ops));
        if ctx.max_ops > report.max_ops_to_decide {
            report.max_ops_to_decide = ctx.max_ops;
            report.max_witness = ctx.max_path.map(|ops| Witness {
                inputs: inputs.clone(),
                priorities: config.priorities.clone(),
                ops,
            });
        }
        if let Some(ops) = ctx.both_bits_path {
            report.both_round1_bits_before_decision = true;
            if report.both_bits_witness.is_none() {
                report.both_bits_witness = Some(Witness {
                    inputs: inputs.clone(),
                    priorities: config.priorities.clone(),
                    ops,
                });
            }
        }
        if let Some(ops) = ctx.chain_path {
            if report.chain_witness.is_none() {
                report.chain_witness = Some(Witness {
                    inputs,
                    priorities: config.priorities.clone(),
                    ops,
                });
            }
        }
    }
    Ok(report)
}

/// Search every priority assignment (as weak orderings of n processes)
/// with fresh first quanta, merging the per-assignment reports. This is
/// the configuration family under which the 12-operation bound holds;
/// part-consumed first quanta are searchable individually via
/// [`search_worst_case`] but can break the bound (see the module tests).
pub fn search_all_priorities(
    n: usize,
    quantum: u32,
    depth_cap: u32,
    track_chain: bool,
) -> Result<SearchReport> {
    if n == 0 || n > 4 {
        return Err(Error::config(
            "the scheduler search supports 1 to 4 processes",
        ));
    }
    let mut merged = SearchReport {
        n,
        quantum,
        ..SearchReport::default()
    };
    for priorities in weak_orderings(n) {
        let config = HybridConfig::fresh(priorities, quantum);
        let report = search_worst_case(&config, depth_cap, track_chain)?;
        merged.absorb(report);
    }
    Ok(merged)
}

/// All weak orderings of n processes as dense priority vectors,
/// deduplicated and sorted (3 for n=2, 13 for n=3, 75 for n=4).
fn weak_orderings(n: usize) -> Vec<Vec<i32>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let total = (n as u64).pow(n as u32);
    for code in 0..total {
        let mut v = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            v.push((c % n as u64) as i32);
            c /= n as u64;
        }
        let mut levels: Vec<i32> = v.clone();
        levels.sort_unstable();
        levels.dedup();
        let norm: Vec<i32> = v
            .iter()
            .map(|x| levels.binary_search(x).unwrap() as i32)
            .collect();
        if seen.insert(norm.clone()) {
            out.push(norm);
        }
    }
    out.sort();
    out
}

#[derive(Clone)]
struct SchedState {
    runner: Option<Pid>,
    /// Ops left before the runner's next quantum boundary.
    budget: u32,
    /// Consecutive ops of the current stint.
    burst: u32,
    started: Vec<bool>,
    /// 0 = not suspended, 1 = suspended, 2 = suspended but the window
    /// already contains a big burst or an exit.
    chain: Vec<u8>,
}

struct SearchCtx<'a> {
    inputs: &'a [bool],
    config: &'a HybridConfig,
    depth_cap: u64,
    track_chain: bool,
    visited: HashSet<HybridKey>,
    path: Vec<Pid>,
    states_visited: u64,
    max_ops: u64,
    max_path: Option<Vec<Pid>>,
    both_bits_path: Option<Vec<Pid>>,
    capped: u64,
    chain_violations: u64,
    chain_path: Option<Vec<Pid>>,
    safety_total: u64,
    safety_samples: Vec<String>,
}

#[derive(PartialEq, Eq, Hash)]
struct HybridKey {
    procs: Vec<(bool, u32, u8, u8)>,
    a0: Vec<bool>,
    a1: Vec<bool>,
    runner: u8,
    budget: u32,
    started: u8,
    burst8: u8,
    chain: u8,
}

fn state_key(
    procs: &[ProcessState],
    regs: &RegisterFile,
    sched: &SchedState,
    track_chain: bool,
) -> HybridKey {
    HybridKey {
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
        runner: sched.runner.map_or(u8::MAX, |p| p as u8),
        budget: sched.budget,
        started: sched
            .started
            .iter()
            .enumerate()
            .fold(0u8, |m, (i, &s)| m | (u8::from(s) << i)),
        burst8: if track_chain {
            sched.burst.min(CHAIN_BURST) as u8
        } else {
            0
        },
        chain: if track_chain {
            sched
                .chain
                .iter()
                .enumerate()
                .fold(0u8, |m, (i, &c)| m | (c << (2 * i)))
        } else {
            0
        },
    }
}

impl SearchCtx<'_> {
    fn record_safety(&mut self, found: Vec<(Check, String)>) {
        for (check, message) in found {
            self.safety_total += 1;
            if self.safety_samples.len() < MAX_SAFETY_SAMPLES {
                self.safety_samples.push(format!("{check}: {message}"));
            }
        }
    }

    /// Make `q` the runner; handles suspension of the old runner, chain
    /// resume checks, and fresh-quantum bookkeeping.
    fn activate(&mut self, sched: &mut SchedState, q: Pid, procs: &[ProcessState]) {
        if self.track_chain {
            if let Some(p) = sched.runner {
                if procs[p].is_active() && p != q {
                    sched.chain[p] = 1;
                }
            }
            if sched.chain[q] == 1 {
                self.chain_violations += 1;
                if self.chain_path.is_none() {
                    self.chain_path = Some(self.path.clone());
                }
            }
            sched.chain[q] = 0;
        }
        let first = !sched.started[q];
        sched.started[q] = true;
        sched.runner = Some(q);
        sched.budget = if first {
            self.config.first_budget(q)
        } else {
            self.config.quantum
        };
        sched.burst = 0;
    }
}

fn dfs(ctx: &mut SearchCtx<'_>, procs: &[ProcessState], regs: &RegisterFile, sched: &SchedState) {
    ctx.states_visited += 1;
    if procs.iter().all(|p| p.decided.is_some()) {
        return;
    }
    let pri = &ctx.config.priorities;

    match sched.runner {
        Some(p) if procs[p].is_active() => {
            // the runner keeps running (re-granted at a boundary if needed)
            if procs[p].ops_executed < ctx.depth_cap {
                let mut procs2 = procs.to_vec();
                let mut regs2 = regs.clone();
                let mut sched2 = sched.clone();
                ctx.path.push(p);
                exec_op(ctx, &mut procs2, &mut regs2, &mut sched2, p);
                descend(ctx, &procs2, &regs2, &sched2);
                ctx.path.pop();
            } else {
                ctx.capped += 1;
            }
            // a strictly higher-priority process arrives and preempts
            for q in 0..procs.len() {
                if !sched.started[q] && pri[q] > pri[p] {
                    let mut sched2 = sched.clone();
                    ctx.activate(&mut sched2, q, procs);
                    descend(ctx, procs, regs, &sched2);
                }
            }
            // an equal-priority process takes over at a quantum boundary
            if sched.budget == 0 {
                for q in 0..procs.len() {
                    if q != p && procs[q].is_active() && pri[q] == pri[p] {
                        if procs[q].ops_executed >= ctx.depth_cap {
                            ctx.capped += 1;
                            continue;
                        }
                        let mut sched2 = sched.clone();
                        ctx.activate(&mut sched2, q, procs);
                        descend(ctx, procs, regs, &sched2);
                    }
                }
            }
        }
        _ => {
            // free scheduling point: initial state or just after an exit.
            // Anyone not outranked by a started active process may run
            // (unstarted processes "arrive" the moment they are picked).
            let floor = procs
                .iter()
                .filter(|r| sched.started[r.id] && r.is_active())
                .map(|r| pri[r.id])
                .max();
            for q in 0..procs.len() {
                if !procs[q].is_active() {
                    continue;
                }
                if let Some(f) = floor {
                    if pri[q] < f {
                        continue;
                    }
                }
                if procs[q].ops_executed >= ctx.depth_cap {
                    ctx.capped += 1;
                    continue;
                }
                let mut sched2 = sched.clone();
                ctx.activate(&mut sched2, q, procs);
                descend(ctx, procs, regs, &sched2);
            }
        }
    }
}

fn descend(ctx: &mut SearchCtx<'_>, procs: &[ProcessState], regs: &RegisterFile, sched: &SchedState) {
    if ctx
        .visited
        .insert(state_key(procs, regs, sched, ctx.track_chain))
    {
        dfs(ctx, procs, regs, sched);
    }
}

fn exec_op(
    ctx: &mut SearchCtx<'_>,
    procs: &mut [ProcessState],
    regs: &mut RegisterFile,
    sched: &mut SchedState,
    p: Pid,
) {
    if sched.budget == 0 {
        // quantum boundary, scheduler re-grants the processor
        sched.budget = ctx.config.quantum;
    }
    if procs[p].step == Step::WritePref {
        let found = write_violations(ctx.inputs, procs, regs, procs[p].preference, procs[p].round);
        ctx.record_safety(found);
    }
    let effect = apply_next_op(&mut procs[p], regs)
        .expect("searched processes are active by construction");
    sched.budget -= 1;
    sched.burst = sched.burst.saturating_add(1);

    if ctx.track_chain && sched.burst >= CHAIN_BURST {
        for c in sched.chain.iter_mut() {
            if *c == 1 {
                *c = 2;
            }
        }
    }
    if let Some(value) = effect.decision {
        let round = procs[p].round;
        let found = decision_violations(ctx.inputs, procs, p, value, round, regs);
        ctx.record_safety(found);
        if procs[p].ops_executed > ctx.max_ops {
            ctx.max_ops = procs[p].ops_executed;
            ctx.max_path = Some(ctx.path.clone());
        }
        if ctx.track_chain {
            for c in sched.chain.iter_mut() {
                if *c == 1 {
                    *c = 2;
                }
            }
        }
        sched.runner = None;
        sched.burst = 0;
    }
    if regs.peek(false, 1)
        && regs.peek(true, 1)
        && procs.iter().all(|r| r.decided.is_none())
        && ctx.both_bits_path.is_none()
    {
        ctx.both_bits_path = Some(ctx.path.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::validate::validate_trace;

    fn config(priorities: Vec<i32>, quantum: u32, used: Vec<u32>) -> HybridConfig {
        HybridConfig {
            priorities,
            quantum,
            initial_quantum_used: used,
            op_cap: 10_000,
        }
    }

    #[test]
    fn config_validation() {
        let bad = run_hybrid_trial(&[false], &config(vec![0, 0], 8, vec![0]), &[]);
        assert!(bad.is_err());
        let bad = run_hybrid_trial(&[false], &config(vec![0], 8, vec![8]), &[]);
        assert!(bad.is_err());
        let bad = run_hybrid_trial(&[false], &config(vec![0], 0, vec![0]), &[]);
        assert!(bad.is_err());
        let bad = run_hybrid_trial(
            &[false],
            &config(vec![0], 8, vec![0]),
            &[Segment::new(0, 0)],
        );
        assert!(bad.is_err());
        let bad = run_hybrid_trial(
            &[false],
            &config(vec![0], 8, vec![0]),
            &[Segment::new(1, 1)],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn solo_script_decides_in_eight_ops_and_drops_the_remainder() {
        let (out, trace) = run_hybrid_trial(
            &[true],
            &config(vec![0], 8, vec![0]),
            &[Segment::new(0, 12)],
        )
        .unwrap();
        let d = out.decisions[0].unwrap();
        assert_eq!((d.value, d.round, d.ops_executed), (true, 2, 8));
        assert_eq!(trace.ops.len(), 8);
        assert!(!out.non_terminated);
        assert!(validate_trace(&trace).passed());
    }

    // A high-priority process arrives after the low-priority one has done
    // only its two reads. It runs alone and decides its own input in 8
    // ops; the resumed process adopts that value but is blocked one extra
    // round by its own round-1 write, deciding on its 12th op. This is
    // the scheduler worst case realized as a concrete script.
    #[test]
    fn preemption_before_the_write_costs_the_laggard_twelve_ops() {
        let cfg = config(vec![0, 1], 8, vec![0, 0]);
        let script = [Segment::new(0, 2), Segment::new(1, 10), Segment::new(0, 12)];
        let (out, trace) = run_hybrid_trial(&[false, true], &cfg, &script).unwrap();
        let d1 = out.decisions[1].unwrap();
        assert_eq!((d1.value, d1.round, d1.ops_executed), (true, 2, 8));
        let d0 = out.decisions[0].unwrap();
        assert_eq!((d0.value, d0.round, d0.ops_executed), (true, 3, 12));
        assert_eq!(out.ops_per_process, vec![12, 8]);
        assert!(validate_trace(&trace).passed());
    }

    // The same 12-op worst case through equal priorities: process 0's
    // first quantum has only 2 ops left, so the boundary after its two
    // reads is legal.
    #[test]
    fn equal_priorities_with_spent_first_quantum_also_cost_twelve_ops() {
        let cfg = config(vec![0, 0], 8, vec![6, 0]);
        let script = [Segment::new(0, 2), Segment::new(1, 8), Segment::new(0, 10)];
        let (out, trace) = run_hybrid_trial(&[false, true], &cfg, &script).unwrap();
        assert_eq!(out.decisions[1].unwrap().ops_executed, 8);
        let d0 = out.decisions[0].unwrap();
        assert_eq!((d0.value, d0.round, d0.ops_executed), (true, 3, 12));
        assert!(validate_trace(&trace).passed());
    }

    #[test]
    fn equal_priority_switch_off_the_quantum_boundary_is_rejected() {
        let cfg = config(vec![0, 0], 8, vec![0, 0]);
        let err = run_hybrid_trial(
            &[false, true],
            &cfg,
            &[Segment::new(0, 3), Segment::new(1, 1)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Strategy { index: 1, .. }), "{err}");

        // with 6 of 8 already used, the boundary sits at 2 ops, not 3
        let cfg = config(vec![0, 0], 8, vec![6, 0]);
        let err = run_hybrid_trial(
            &[false, true],
            &cfg,
            &[Segment::new(0, 3), Segment::new(1, 1)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Strategy { index: 1, .. }), "{err}");
    }

    #[test]
    fn lower_priority_cannot_run_while_higher_is_active() {
        let cfg = config(vec![1, 0], 8, vec![0, 0]);
        let err = run_hybrid_trial(
            &[false, true],
            &cfg,
            &[Segment::new(0, 2), Segment::new(1, 1)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Strategy { index: 1, .. }), "{err}");
    }

    #[test]
    fn adjacent_segments_merge_into_one_stint() {
        // 2+3 ops by process 0 form one 5-op stint; with a 2-op first
        // budget the next boundary is at 10, so the switch at 5 is illegal
        let cfg = config(vec![0, 0], 8, vec![6, 0]);
        let err = run_hybrid_trial(
            &[false, true],
            &cfg,
            &[Segment::new(0, 2), Segment::new(0, 3), Segment::new(1, 1)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Strategy { index: 2, .. }), "{err}");
    }

    #[test]
    fn segments_for_decided_processes_are_skipped() {
        let cfg = config(vec![0, 1], 8, vec![0, 0]);
        let script = [
            Segment::new(0, 2),
            Segment::new(1, 10), // decides at 8, remainder dropped
            Segment::new(1, 5),  // skipped: already decided
            Segment::new(0, 12),
        ];
        let (out, _) = run_hybrid_trial(&[false, true], &cfg, &script).unwrap();
        assert_eq!(out.ops_per_process, vec![12, 8]);
        assert!(!out.non_terminated);
    }

    #[test]
    fn weak_ordering_counts_match_the_ordered_partition_numbers() {
        assert_eq!(weak_orderings(1).len(), 1);
        assert_eq!(weak_orderings(2).len(), 3);
        assert_eq!(weak_orderings(3).len(), 13);
        assert_eq!(weak_orderings(4).len(), 75);
    }

    #[test]
    fn search_rejects_out_of_range_parameters() {
        let cfg = HybridConfig::fresh(vec![0, 0], 8);
        assert!(search_worst_case(&cfg, 0, false).is_err());
        assert!(search_worst_case(&cfg, 25, false).is_err());
        assert!(search_all_priorities(0, 8, 12, false).is_err());
        assert!(search_all_priorities(5, 8, 12, false).is_err());
        let bad = HybridConfig::fresh(vec![0; 5], 8);
        assert!(search_worst_case(&bad, 12, false).is_err());
        let mut bad = HybridConfig::fresh(vec![0, 0], 8);
        bad.initial_quantum_used = vec![9, 0];
        assert!(search_worst_case(&bad, 12, false).is_err());
    }

    #[test]
    fn solo_search_tops_out_at_eight_ops() {
        let report = search_all_priorities(1, 8, 12, false).unwrap();
        assert_eq!(report.max_ops_to_decide, 8);
        assert_eq!(report.priority_assignments, 1);
        assert_eq!(report.capped_branches, 0);
        assert!(!report.both_round1_bits_before_decision);
        assert!(report.passed());
    }

    #[test]
    fn equal_priorities_with_fresh_quanta_decide_in_eight() {
        // nobody can be interrupted before finishing two rounds, so the
        // first runner decides at 8 and everyone else adopts its value
        let cfg = HybridConfig::fresh(vec![0, 0], 8);
        let report = search_worst_case(&cfg, 12, false).unwrap();
        assert!(report.passed(), "{:?}", report.safety_samples);
        assert_eq!(report.max_ops_to_decide, 8);
        assert_eq!(report.capped_branches, 0);
        assert!(!report.both_round1_bits_before_decision);
    }

    #[test]
    fn pair_search_over_all_priorities_finds_exactly_twelve_ops() {
        let report = search_all_priorities(2, 8, 12, false).unwrap();
        assert!(report.passed(), "{:?}", report.safety_samples);
        assert_eq!(report.priority_assignments, 3);
        assert_eq!(report.max_ops_to_decide, 12);
        assert_eq!(report.capped_branches, 0);
        assert!(!report.both_round1_bits_before_decision);
        // unanimous inputs decide in 8; split inputs need the full 12
        for (inputs, max) in &report.per_input {
            let expected = if inputs[0] == inputs[1] { 8 } else { 12 };
            assert_eq!(*max, expected, "inputs {inputs:?}");
        }
    }

    #[test]
    fn a_single_spent_first_quantum_still_respects_the_bound() {
        let cfg = config(vec![0, 0], 8, vec![6, 0]);
        let report = search_worst_case(&cfg, 12, false).unwrap();
        assert!(report.passed());
        assert_eq!(report.max_ops_to_decide, 12);
        assert_eq!(report.capped_branches, 0);
        assert!(!report.both_round1_bits_before_decision);
    }

    // Two equal-priority processes that both start the protocol
    // mid-quantum can end their first bursts out of phase: one with its
    // round-1 write pending, the other just past its round-2 reads. From
    // there alternating full quanta keep each process's read-behind
    // blocked by a bit the other wrote a quantum earlier — a livelock the
    // quantum mechanism was supposed to exclude, and processes blow past
    // 12 ops undecided. The guarantee genuinely needs fresh quanta for
    // every process that takes over the processor.
    #[test]
    fn staggered_spent_quanta_break_the_bound_and_admit_livelock() {
        let cfg = config(vec![0, 0], 8, vec![6, 2]);
        let report = search_worst_case(&cfg, 16, false).unwrap();
        assert!(report.passed()); // safety holds even though liveness fails
        assert!(report.both_round1_bits_before_decision);
        assert!(report.both_bits_witness.is_some());
        assert!(
            report.capped_branches > 0,
            "livelock branches should hit the cap"
        );
    }

    #[test]
    fn quantum_two_exposes_both_round_one_bits_and_livelock() {
        let report = search_all_priorities(2, 2, 12, false).unwrap();
        assert!(report.passed());
        assert!(report.both_round1_bits_before_decision);
        assert!(report.both_bits_witness.is_some());
        // alternating full quanta is legal here and never decides, so
        // some branches die at the op cap
        assert!(report.capped_branches > 0);
    }

    #[test]
    fn suspension_windows_contain_an_exit_or_a_full_burst_under_fresh_quanta() {
        let report = search_all_priorities(2, 8, 12, true).unwrap();
        assert_eq!(report.chain_violations, 0);

        // ... but not once first quanta are part-consumed
        let cfg = config(vec![0, 0], 8, vec![6, 2]);
        let report = search_worst_case(&cfg, 16, true).unwrap();
        assert!(report.chain_violations > 0);
        assert!(report.chain_witness.is_some());
    }

    // The worst-case path reported by the search must itself be a legal
    // script: replaying it through the independent legality checker
    // reproduces the same worst decision cost.
    #[test]
    fn search_witness_replays_as_a_legal_script() {
        let report = search_all_priorities(2, 8, 12, false).unwrap();
        let w = report.max_witness.as_ref().expect("a worst-case witness");
        let cfg = HybridConfig::fresh(w.priorities.clone(), 8);
        let (out, trace) = run_hybrid_trial(&w.inputs, &cfg, &w.to_segments()).unwrap();
        let worst = out
            .decisions
            .iter()
            .flatten()
            .map(|d| d.ops_executed)
            .max()
            .unwrap();
        assert_eq!(worst, report.max_ops_to_decide);
        assert!(validate_trace(&trace).passed());
    }

    #[test]
    fn search_is_deterministic() {
        let a = search_all_priorities(2, 8, 12, false).unwrap();
        let b = search_all_priorities(2, 8, 12, false).unwrap();
        assert_eq!(a, b);
        assert!(format!("{a}").contains("max ops to decide: 12"));
    }

    // ~13s over ~18M states: run explicitly with --ignored when needed
    #[test]
    #[ignore]
    fn four_process_search_still_tops_out_at_twelve() {
        let report = search_all_priorities(4, 8, 12, false).unwrap();
        assert!(report.passed(), "{:?}", report.safety_samples);
        assert_eq!(report.priority_assignments, 75);
        assert_eq!(report.max_ops_to_decide, 12);
        assert_eq!(report.capped_branches, 0);
        assert!(!report.both_round1_bits_before_decision);
    }
}
