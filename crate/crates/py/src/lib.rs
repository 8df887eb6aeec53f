//! Python bindings for the racelab core crate.
//!
//! Distributions are passed as their label strings (`"exp:1"`,
//! `"uniform:0,2"`, ...), seeds as integers; everything is as deterministic
//! as the underlying Rust APIs. Errors surface as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use racelab::bounded::{
    compute_rmax as rmax_impl, run_combined, CombinedConfig, CombinedScheduler, OracleBackup,
};
use racelab::hybrid;
use racelab::noise::{DelayDistribution, DeltaPolicy, NoiseModel};
use racelab::protocol::{explore_all_schedules, run_with_schedule, validate_trace};
use racelab::race;

fn value_err(e: racelab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_dist(label: &str) -> PyResult<DelayDistribution> {
    label.parse().map_err(value_err)
}

fn model_from(dist: &str, max_delay: f64, failure_rate: f64) -> PyResult<NoiseModel> {
    let mut model = NoiseModel::iid(parse_dist(dist)?);
    model.failure_rate = failure_rate;
    if max_delay > 0.0 {
        model.max_adversary_delay = max_delay;
        model.delta = DeltaPolicy::ConstantMax;
    }
    Ok(model)
}

/// Outcome of a single protocol run, noisy or bounded.
#[pyclass(get_all, frozen, skip_from_py_object)]
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub outcome: String,
    pub value: Option<bool>,
    pub first_decision_round: Option<u32>,
    pub last_decision_round: Option<u32>,
    pub ops_per_process: Vec<u64>,
    pub total_ops: u64,
    pub halted: u32,
    pub decided_values: Vec<Option<bool>>,
    /// `"lean"`, `"backup"`, or `None` per process.
    pub decided_via: Vec<Option<String>>,
    pub max_register_index: u32,
    pub backup_contract_violations: u32,
}

impl From<racelab::noise::TrialResult> for TrialResult {
    fn from(r: racelab::noise::TrialResult) -> Self {
        TrialResult {
            outcome: format!("{:?}", r.outcome).to_lowercase(),
            value: r.value,
            first_decision_round: r.first_decision_round,
            last_decision_round: r.last_decision_round,
            ops_per_process: r.ops_per_process,
            total_ops: r.total_ops,
            halted: r.halted,
            decided_values: r.decided_values,
            decided_via: r
                .decided_via
                .iter()
                .map(|v| v.map(|via| format!("{via:?}").to_lowercase()))
                .collect(),
            max_register_index: r.max_register_index,
            backup_contract_violations: r.backup_contract_violations,
        }
    }
}

/// Result of replaying an explicit schedule, with validator findings.
#[pyclass(get_all, frozen, skip_from_py_object)]
#[derive(Debug, Clone)]
pub struct Replay {
    pub decided_values: Vec<Option<bool>>,
    pub decided_rounds: Vec<Option<u32>>,
    pub ops_per_process: Vec<u64>,
    pub non_terminated: bool,
    pub total_ops: u64,
    /// Human-readable trace-validation violations; empty means the run is
    /// consistent with interleaving semantics and all safety checks.
    pub violations: Vec<String>,
}

#[pyclass(get_all, frozen, skip_from_py_object)]
#[derive(Debug, Clone)]
pub struct ExplorationReport {
    pub states_visited: u64,
    pub max_frontier: usize,
    pub terminal_states: u64,
    pub open_branches: u64,
    pub violations_total: u64,
    pub passed: bool,
}

#[pyclass(get_all, frozen, skip_from_py_object)]
#[derive(Debug, Clone)]
pub struct SearchReport {
    pub n: usize,
    pub quantum: u32,
    pub priority_assignments: u64,
    pub states_visited: u64,
    pub max_ops_to_decide: u64,
    pub capped_branches: u64,
    pub safety_violations: u64,
    pub passed: bool,
    /// Full pretty-printed report, witness schedules included.
    pub text: String,
}

#[pyclass(get_all, frozen, skip_from_py_object)]
#[derive(Debug, Clone)]
pub struct RaceRun {
    /// `"winner"`, `"all_dead"`, or `"cap_hit"`.
    pub outcome: String,
    pub winner: Option<usize>,
    pub round: Option<u32>,
    /// `completion[pid][r]`: when `pid` finished round `r` (row 0 = start
    /// offsets, infinity = halted).
    pub completion: Vec<Vec<f64>>,
}

#[pyclass(get_all, frozen, skip_from_py_object)]
#[derive(Debug, Clone)]
pub struct RaceEstimate {
    pub trials: u64,
    pub round_cap: u32,
    pub mean: f64,
    pub median: f64,
    pub cap_hits: u64,
    pub all_dead: u64,
    pub histogram: Vec<u64>,
}

/// Draw `count` samples from a delay distribution given by label.
#[pyfunction]
fn sample_delay(dist: &str, count: usize, seed: u64) -> PyResult<Vec<f64>> {
    let d = parse_dist(dist)?;
    let mut rng = racelab::harness::derive_stream(seed, 0);
    Ok((0..count).map(|_| d.sample(&mut rng)).collect())
}

/// One run under i.i.d. per-operation noise.
///
/// `max_delay` > 0 turns on a constant adversarial delay of that size per
/// operation; `failure_rate` is the chance each operation halts its
/// process forever.
#[pyfunction]
#[pyo3(signature = (inputs, dist="exp:1", seed=0, op_cap=4096, max_delay=0.0, failure_rate=0.0))]
fn run_noisy_trial(
    inputs: Vec<bool>,
    dist: &str,
    seed: u64,
    op_cap: u64,
    max_delay: f64,
    failure_rate: f64,
) -> PyResult<TrialResult> {
    let model = model_from(dist, max_delay, failure_rate)?;
    let (result, _) =
        racelab::noise::run_noisy_trial(&inputs, &model, seed, op_cap, false).map_err(value_err)?;
    Ok(result.into())
}

/// Replay an explicit schedule (list of process ids) and validate the
/// resulting trace.
#[pyfunction]
#[pyo3(signature = (inputs, schedule, op_cap=10_000))]
fn run_schedule(inputs: Vec<bool>, schedule: Vec<usize>, op_cap: u64) -> PyResult<Replay> {
    let (outcome, trace) = run_with_schedule(&inputs, &schedule, op_cap).map_err(value_err)?;
    let report = validate_trace(&trace);
    Ok(Replay {
        decided_values: outcome.decisions.iter().map(|d| d.map(|r| r.value)).collect(),
        decided_rounds: outcome.decisions.iter().map(|d| d.map(|r| r.round)).collect(),
        ops_per_process: outcome.ops_per_process,
        non_terminated: outcome.non_terminated,
        total_ops: trace.ops.len() as u64,
        violations: report.violations.iter().map(|v| v.to_string()).collect(),
    })
}

/// Exhaustively explore every interleaving for the given inputs, checking
/// all safety properties in every reachable state.
#[pyfunction]
#[pyo3(signature = (inputs, op_cap=16))]
fn explore(inputs: Vec<bool>, op_cap: u32) -> PyResult<ExplorationReport> {
    let rep = explore_all_schedules(&inputs, op_cap).map_err(value_err)?;
    Ok(ExplorationReport {
        states_visited: rep.states_visited,
        max_frontier: rep.max_frontier,
        terminal_states: rep.terminal_states,
        open_branches: rep.open_branches,
        violations_total: rep.violations_total,
        passed: rep.passed(),
    })
}

/// Exhaustive worst-case search over every priority assignment of the
/// quantum/priority scheduler, fresh quanta.
#[pyfunction]
#[pyo3(signature = (n=2, quantum=8, depth_cap=16))]
fn search_preemption_worst_case(n: usize, quantum: u32, depth_cap: u32) -> PyResult<SearchReport> {
    let rep = hybrid::search_all_priorities(n, quantum, depth_cap, false).map_err(value_err)?;
    Ok(SearchReport {
        n: rep.n,
        quantum: rep.quantum,
        priority_assignments: rep.priority_assignments,
        states_visited: rep.states_visited,
        max_ops_to_decide: rep.max_ops_to_decide,
        capped_branches: rep.capped_branches,
        safety_violations: rep.safety_violations,
        passed: rep.passed(),
        text: rep.to_string(),
    })
}

/// Register budget (rounds per side) for a bounded run over `n` processes.
#[pyfunction]
#[pyo3(signature = (n, t_scale=10, c_exponent=4))]
fn compute_rmax(n: usize, t_scale: u32, c_exponent: u32) -> PyResult<u32> {
    rmax_impl(n, t_scale, c_exponent).map_err(value_err)
}

/// One noisy run against a bounded register file: processes that outgrow
/// `r_max` rounds defer to a first-proposal-wins backup decider.
#[pyfunction]
#[pyo3(signature = (inputs, r_max, dist="exp:1", seed=0, op_cap=4096, max_delay=0.0, failure_rate=0.0))]
fn run_bounded_trial(
    inputs: Vec<bool>,
    r_max: u32,
    dist: &str,
    seed: u64,
    op_cap: u64,
    max_delay: f64,
    failure_rate: f64,
) -> PyResult<TrialResult> {
    let config = CombinedConfig {
        r_max,
        scheduler: CombinedScheduler::Noisy(model_from(dist, max_delay, failure_rate)?),
        op_cap,
    };
    let mut backup = OracleBackup::new();
    let (result, _) =
        run_combined(&inputs, &config, &mut backup, seed, false).map_err(value_err)?;
    Ok(result.into())
}

/// Probability that exactly one of the coordinates succeeds, where entry
/// `i` fails with probability `q[i]`, plus its analytic floor
/// `-x ln x` at `x = prod(q)`.
#[pyfunction]
fn exactly_one_probability(q: Vec<f64>) -> PyResult<(f64, f64)> {
    race::exactly_one_probability(&q).map_err(value_err)
}

/// Monte-Carlo fraction of two-camp races won outright within `c` rounds
/// of lead, per the closed form returned by `lower_bound_closed_form`.
#[pyfunction]
fn lower_bound_fraction(n: usize, trials: u64, seed: u64) -> PyResult<f64> {
    race::lower_bound_fraction(n, trials, seed).map_err(value_err)
}

#[pyfunction]
fn lower_bound_closed_form(n: usize) -> PyResult<f64> {
    race::lower_bound_closed_form(n).map_err(value_err)
}

/// Best-threshold probability that a unique leader emerges from `n`
/// i.i.d. first-round delays; returns `(threshold, probability)`.
#[pyfunction]
#[pyo3(signature = (dist, n, trials=10_000, grid=256, seed=0))]
fn unique_leader_probability(
    dist: &str,
    n: usize,
    trials: u64,
    grid: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    race::unique_leader_probability(&parse_dist(dist)?, n, trials, grid, seed).map_err(value_err)
}

/// Simulate one round-race to a lead of `c` rounds and return the full
/// completion table along with the outcome.
#[pyfunction]
#[pyo3(signature = (n, c=2, dist="exp:1", round_cap=10_000, seed=0, failure_rate=0.0))]
fn simulate_race(
    n: usize,
    c: u32,
    dist: &str,
    round_cap: u32,
    seed: u64,
    failure_rate: f64,
) -> PyResult<RaceRun> {
    let mut config = race::RaceConfig::iid(n, c, parse_dist(dist)?, round_cap);
    config.failure_rate = failure_rate;
    let run = race::simulate_race(&config, seed).map_err(value_err)?;
    let (outcome, winner, round) = match run.outcome {
        race::RaceOutcome::Winner { pid, round } => ("winner", Some(pid), Some(round)),
        race::RaceOutcome::AllDead { round } => ("all_dead", None, Some(round)),
        race::RaceOutcome::CapHit => ("cap_hit", None, None),
    };
    Ok(RaceRun {
        outcome: outcome.to_string(),
        winner,
        round,
        completion: run.completion,
    })
}

/// Monte-Carlo estimate of the deciding round of the round-race.
#[pyfunction]
#[pyo3(signature = (n, c=2, dist="exp:1", trials=1000, round_cap=10_000, seed=0))]
fn estimate_race_rounds(
    n: usize,
    c: u32,
    dist: &str,
    trials: u64,
    round_cap: u32,
    seed: u64,
) -> PyResult<RaceEstimate> {
    let config = race::RaceConfig::iid(n, c, parse_dist(dist)?, round_cap);
    let est = race::estimate_expected_r(&config, trials, seed).map_err(value_err)?;
    Ok(RaceEstimate {
        trials: est.trials,
        round_cap: est.round_cap,
        mean: est.mean,
        median: est.median,
        cap_hits: est.cap_hits,
        all_dead: est.all_dead,
        histogram: est.histogram,
    })
}

/// Aggregate protocol sweep over distributions and process counts,
/// returned as CSV. Matches the CLI `sweep` command byte-for-byte when
/// given the same seed, trials, and op cap.
#[pyfunction]
#[pyo3(signature = (dists, ns, trials=1000, seed=0, op_cap=4096))]
fn sweep_csv(
    dists: Vec<String>,
    ns: Vec<usize>,
    trials: u64,
    seed: u64,
    op_cap: u64,
) -> PyResult<String> {
    let dists: Vec<DelayDistribution> = dists
        .iter()
        .map(|s| parse_dist(s))
        .collect::<PyResult<_>>()?;
    let mut rows = Vec::new();
    for &n in &ns {
        rows.extend(
            racelab::noise::run_sweep(
                &dists,
                &[n],
                trials,
                &racelab::noise::InputsPolicy::HalfHalf,
                seed,
                op_cap,
                |d| NoiseModel::iid(d.clone()),
            )
            .map_err(value_err)?,
        );
    }
    rows.sort_by(|a, b| a.distribution.cmp(&b.distribution).then(a.n.cmp(&b.n)));
    let mut csv = String::from(racelab::noise::SWEEP_CSV_HEADER);
    csv.push('\n');
    for row in rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    Ok(csv)
}

#[pymodule]
fn racelab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TrialResult>()?;
    m.add_class::<Replay>()?;
    m.add_class::<ExplorationReport>()?;
    m.add_class::<SearchReport>()?;
    m.add_class::<RaceRun>()?;
    m.add_class::<RaceEstimate>()?;
    m.add_function(wrap_pyfunction!(sample_delay, m)?)?;
    m.add_function(wrap_pyfunction!(run_noisy_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(explore, m)?)?;
    m.add_function(wrap_pyfunction!(search_preemption_worst_case, m)?)?;
    m.add_function(wrap_pyfunction!(compute_rmax, m)?)?;
    m.add_function(wrap_pyfunction!(run_bounded_trial, m)?)?;
    m.add_function(wrap_pyfunction!(exactly_one_probability, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(unique_leader_probability, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_race, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_race_rounds, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    Ok(())
}
