//! Round-bounded runs with a backup decider.
//!
//! The racing-bits protocol needs one register slot per round and can, in
//! principle, race forever. The bounded variant truncates the register
//! file at `r_max` slots per side; a process that outgrows them abandons
//! the race and asks a backup decider for a value instead. With `r_max`
//! chosen a few multiples of log2(n), the backup almost never fires under
//! realistic timing noise, so its (presumably expensive) cost is paid only
//! on the rare slow runs while the register footprint stays fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::rng::{derive_stream, mix_tag, SimRng};
use crate::noise::dist::DelayDistribution;
use crate::noise::model::NoiseModel;
use crate::noise::sweep::{inputs_for, InputsPolicy, SweepRow, TrialTally};
use crate::noise::trial::{run_event_loop, BoundedHook, DecidedVia, TrialOutcome, TrialResult};
use crate::protocol::process::{apply_next_op, init_processes, Pid};
use crate::protocol::registers::RegisterFile;
use crate::protocol::trace::{DecisionRecord, OpRecord, Trace};

use rand::SeedableRng;
use rayon::prelude::*;

/// The decider of last resort for processes that exhaust the bounded
/// register file.
///
/// Implementations must behave like a consensus object: every call
/// returns the same `Some` value, and that value was proposed by some
/// caller. Returning `None` breaks the contract; the harness counts it
/// and halts the calling process.
pub trait BackupProtocol {
    fn propose(&mut self, pid: Pid, preference: bool) -> Option<bool>;
}

/// Stand-in for a real (slow, wait-free) consensus object: the first
/// proposal wins and everyone sees it.
#[derive(Debug, Default, Clone)]
pub struct OracleBackup {
    value: Option<bool>,
}

impl OracleBackup {
    pub fn new() -> Self {
        OracleBackup::default()
    }

    /// The agreed value, once someone has proposed.
    pub fn value(&self) -> Option<bool> {
        self.value
    }
}

impl BackupProtocol for OracleBackup {
    fn propose(&mut self, _pid: Pid, preference: bool) -> Option<bool> {
        if self.value.is_none() {
            self.value = Some(preference);
        }
        self.value
    }
}

/// Register budget for `n` processes: `t_scale * c_exponent * ceil(log2 n)`
/// rounds, and at least 2 so the fast unanimous path always fits.
///
/// `c_exponent` plays the role of a per-factor-of-two tail exponent: each
/// extra multiple of `ceil(log2 n)` rounds multiplies the probability of
/// ever reaching the backup by another vanishing factor under i.i.d.
/// noise, so modest scales already make backup entry rare.
pub fn compute_rmax(n: usize, t_scale: u32, c_exponent: u32) -> Result<u32> {
    if n < 2 {
        return Err(Error::config("the round bound is defined for n >= 2"));
    }
    if t_scale == 0 || c_exponent == 0 {
        return Err(Error::config("scale factors must be positive"));
    }
    let ceil_log2 = u64::from(usize::BITS - (n - 1).leading_zeros());
    let r = u64::from(t_scale) * u64::from(c_exponent) * ceil_log2;
    let r = u32::try_from(r).map_err(|_| Error::config("round bound overflows u32"))?;
    Ok(r.max(2))
}

/// What drives the interleaving of a bounded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CombinedScheduler {
    Noisy(NoiseModel),
    /// Fixed schedule of process ids, replayed slot by slot.
    Scripted(Vec<Pid>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedConfig {
    /// Register slots per side; processes entering round `r_max + 1` go
    /// to the backup.
    pub r_max: u32,
    pub scheduler: CombinedScheduler,
    /// Total operation budget across all processes.
    pub op_cap: u64,
}

/// One bounded run. Noisy runs draw from a generator seeded with `seed`;
/// scripted runs are already fully determined and ignore it.
///
/// The trace, if kept, records the protocol portion of the run only;
/// backup decisions appear in the returned [`TrialResult`], flagged
/// [`DecidedVia::Backup`].
pub fn run_combined(
    inputs: &[bool],
    config: &CombinedConfig,
    backup: &mut dyn BackupProtocol,
    seed: u64,
    keep_trace: bool,
) -> Result<(TrialResult, Option<Trace>)> {
    match &config.scheduler {
        CombinedScheduler::Noisy(model) => {
            let mut rng = SimRng::seed_from_u64(seed);
            run_event_loop(
                inputs,
                model,
                &mut rng,
                config.op_cap,
                keep_trace,
                Some(BoundedHook {
                    r_max: config.r_max,
                    backup,
                }),
            )
        }
        CombinedScheduler::Scripted(schedule) => run_scripted(
            inputs,
            config.r_max,
            schedule,
            config.op_cap,
            backup,
            keep_trace,
        ),
    }
}

/// Schedule-driven bounded run. Slots naming a decided or halted process
/// are skipped; a process due for the backup spends its next slot on the
/// handoff instead of a register operation. Simulated time is the global
/// executed-op index, as in the unbounded replayer.
fn run_scripted(
    inputs: &[bool],
    r_max: u32,
    schedule: &[Pid],
    op_cap: u64,
    backup: &mut dyn BackupProtocol,
    keep_trace: bool,
) -> Result<(TrialResult, Option<Trace>)> {
    if op_cap == 0 {
        return Err(Error::config("op_cap must be positive"));
    }
    if r_max == 0 {
        return Err(Error::config("the register bound must be at least 1"));
    }
    let mut procs = init_processes(inputs)?;
    let n = procs.len();
    if let Some(&bad) = schedule.iter().find(|&&pid| pid >= n) {
        return Err(Error::config(format!(
            "schedule references process {bad} but only {n} processes exist"
        )));
    }

    let mut regs = RegisterFile::bounded(r_max);
    let mut trace = if keep_trace {
        Some(Trace::new(inputs))
    } else {
        None
    };
    let mut decisions: Vec<Option<DecisionRecord>> = vec![None; n];
    let mut decided_via: Vec<Option<DecidedVia>> = vec![None; n];
    let mut first_value: Option<bool> = None;
    let mut halted: u32 = 0;
    let mut total_ops: u64 = 0;
    let mut backup_contract_violations: u32 = 0;

    for &pid in schedule {
        if !procs[pid].is_active() {
            continue;
        }
        if procs[pid].round > r_max {
            match backup.propose(pid, procs[pid].preference) {
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
        if total_ops >= op_cap {
            break;
        }
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
                time: total_ops as f64,
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

pub const COMBINED_CSV_HEADER: &str = "distribution,n,trials,mean_first_round,mean_last_round,\
mean_ops,halted_fraction,nonterminated_fraction,backup_fraction";

/// A sweep row plus the fraction of processes that decided through the
/// backup path.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedSweepRow {
    pub base: SweepRow,
    pub backup_fraction: f64,
}

impl CombinedSweepRow {
    pub fn csv_line(&self) -> String {
        format!("{},{}", self.base.csv_line(), self.backup_fraction)
    }
}

/// Noisy bounded sweep: like the unbounded sweep, but each trial runs
/// against `r_max = compute_rmax(n, t_scale, c_exponent)` slots and a
/// fresh first-proposal-wins backup.
#[allow(clippy::too_many_arguments)]
pub fn run_combined_sweep<F>(
    dists: &[DelayDistribution],
    ns: &[usize],
    trials: u64,
    policy: &InputsPolicy,
    master_seed: u64,
    op_cap: u64,
    t_scale: u32,
    c_exponent: u32,
    make_model: F,
) -> Result<Vec<CombinedSweepRow>>
where
    F: Fn(&DelayDistribution) -> NoiseModel + Sync,
{
    if trials == 0 {
        return Err(Error::config("trials must be positive"));
    }
    if dists.is_empty() || ns.is_empty() {
        return Err(Error::config("need at least one distribution and one n"));
    }
    let mut rows = Vec::with_capacity(dists.len() * ns.len());
    for dist in dists {
        for &n in ns {
            let label = dist.to_string();
            let inputs = inputs_for(policy, n)?;
            let model = make_model(dist);
            model.validate(n)?;
            let r_max = compute_rmax(n, t_scale, c_exponent)?;
            let row_master = mix_tag(master_seed, &format!("combined|{label}|n={n}|rmax={r_max}"));
            let tally = (0..trials)
                .into_par_iter()
                .try_fold(TrialTally::default, |mut tally, trial| {
                    let mut rng = derive_stream(row_master, trial);
                    let mut backup = OracleBackup::new();
                    let (res, _) = run_event_loop(
                        &inputs,
                        &model,
                        &mut rng,
                        op_cap,
                        false,
                        Some(BoundedHook {
                            r_max,
                            backup: &mut backup,
                        }),
                    )?;
                    tally.absorb(&res);
                    Ok::<_, Error>(tally)
                })
                .try_reduce(TrialTally::default, |a, b| Ok(a.merge(b)))?;
            let backup_fraction =
                tally.backup_decisions as f64 / (trials * n as u64) as f64;
            rows.push(CombinedSweepRow {
                base: tally.into_row(label, n, trials),
                backup_fraction,
            });
        }
    }
    Ok(rows)
}
