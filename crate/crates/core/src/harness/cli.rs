//! Command-line front end.
//!
//! Every invocation parses into an [`ExperimentSpec`], a fully
//! serializable value: that value, not the argv, is the unit of
//! reproducibility, and re-running it reproduces the output
//! byte-for-byte. `--jobs` only resizes the worker pool; it never changes
//! an emitted byte.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a
//! verification-style command (`verify`, `lemmas`, or a `hybrid` search)
//! found a property violation.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounded::{
    run_combined, run_combined_sweep, CombinedConfig, CombinedScheduler, OracleBackup,
    COMBINED_CSV_HEADER,
};
use crate::error::{Error, Result};
use crate::harness::figure::{
    figure_rows, plot_script, plot_script_path, rows_to_csv, survey_op_cap, FIGURE_NS,
    PAPER_SCALE_TRIALS,
};
use crate::harness::rng::{mix_tag, SimRng};
use crate::hybrid::search_all_priorities;
use crate::noise::dist::DelayDistribution;
use crate::noise::model::{DeltaPolicy, NoiseModel};
use crate::noise::sweep::{inputs_for, run_sweep, InputsPolicy};
use crate::noise::trial::{run_noisy_trial, DecidedVia, TrialResult};
use crate::protocol::replay::{run_with_schedule, schedule_from_text};
use crate::protocol::trace::Trace;
use crate::protocol::validate::validate_trace;
use crate::race::{
    estimate_expected_r, exactly_one_probability, lower_bound_closed_form, lower_bound_fraction,
    unique_leader_probability, RaceConfig, RaceSweepRow, RACE_CSV_HEADER,
};
use rand::Rng;
use rand::SeedableRng;

/// One fully described experiment; everything an invocation does is a
/// pure function of this value.
#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(
    name = "racelab",
    version,
    about = "Simulation and verification laboratory for a racing-bits consensus protocol"
)]
pub struct ExperimentSpec {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for trial batches; 0 uses the library default.
    /// Never changes any emitted byte.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Write output to this file instead of stdout. The sweep command
    /// also drops a `<out>.plot.py` chart script next to its CSV.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Include the full operation trace in JSON output where applicable.
    #[arg(long, global = true)]
    pub keep_traces: bool,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Command {
    /// Run one noisy trial and print it as JSON.
    Trial(TrialArgs),
    /// Average many noisy trials into CSV rows; without --dist and --n,
    /// runs the full survey grid (all standard distributions, field
    /// sizes 2..1024).
    Sweep(SweepArgs),
    /// Replay a schedule, or rerun a seeded noisy trial, and re-check
    /// every recorded operation against the safety properties.
    Verify(VerifyArgs),
    /// Exhaustively search preemptive schedules for the worst
    /// operations-to-decision count.
    Hybrid(HybridArgs),
    /// Race per-round completion times and summarize deciding rounds.
    Race(RaceArgs),
    /// Check the closed-form probability helpers against simulation.
    Lemmas(LemmasArgs),
    /// Run the register-bounded protocol with its backup decider.
    Combined(CombinedArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialArgs {
    /// Number of processes.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Delay distribution, as name:params (e.g. exp:1, uniform:0,2,
    /// twopoint:1,2,0.5, normal:1,0.2,0,2, geometric:0.5). Default exp:1.
    #[arg(long)]
    pub dist: Option<DelayDistribution>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Input bits, e.g. 0110, or "half-half".
    #[arg(long, default_value = "half-half")]
    pub inputs: String,
    /// Adversarial stall bound; > 0 stalls every op by exactly this much.
    #[arg(long = "M", default_value_t = 0.0)]
    pub max_delay: f64,
    /// Per-op probability that a process halts forever.
    #[arg(long, default_value_t = 0.0)]
    pub failure_rate: f64,
    /// Total operation budget; 0 picks a generous default.
    #[arg(long, default_value_t = 0)]
    pub op_cap: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Field sizes, comma separated (default: the survey grid 2..1024).
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Distribution(s); repeat the flag for several. Default: the
    /// standard set.
    #[arg(long)]
    pub dist: Vec<DelayDistribution>,
    /// Trials per (distribution, n) point.
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "half-half")]
    pub inputs: String,
    #[arg(long = "M", default_value_t = 0.0)]
    pub max_delay: f64,
    #[arg(long, default_value_t = 0.0)]
    pub failure_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub op_cap: u64,
    /// Use the archival trial count (10000) instead of --trials.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value = "half-half")]
    pub inputs: String,
    /// Validate a stored trace (JSON, bare or as the `trace` field of a
    /// trial dump) instead of producing a fresh one.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Schedule to replay: a file of one pid per line, or the same text
    /// inline. Without it, a noisy trial is rerun from --seed instead.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub dist: Option<DelayDistribution>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "M", default_value_t = 0.0)]
    pub max_delay: f64,
    #[arg(long, default_value_t = 0.0)]
    pub failure_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub op_cap: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridArgs {
    /// Number of processes (1..=4).
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Operations per uninterrupted quantum.
    #[arg(long, default_value_t = 8)]
    pub quantum: u32,
    /// Per-process operation budget of the search (1..=24).
    #[arg(long, default_value_t = 16)]
    pub depth_cap: u32,
    /// Also track the suspension-window progress property.
    #[arg(long)]
    pub track_chain: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceArgs {
    /// Field sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 8, 64, 512])]
    pub n: Vec<usize>,
    /// Per-round delay distribution. Default exp:1.
    #[arg(long)]
    pub dist: Option<DelayDistribution>,
    /// Rounds of clear lead required to win.
    #[arg(long, default_value_t = 2)]
    pub c: u32,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub round_cap: u32,
    #[arg(long = "M", default_value_t = 0.0)]
    pub max_delay: f64,
    /// Per-round probability that a process halts forever.
    #[arg(long, default_value_t = 0.0)]
    pub failure_rate: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmasArgs {
    /// Samples per check.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Field size for the two-camp fraction check (even, >= 2).
    #[arg(long, default_value_t = 64)]
    pub n: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedArgs {
    /// Field sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 8])]
    pub n: Vec<usize>,
    /// Delay distribution. Default exp:1.
    #[arg(long)]
    pub dist: Option<DelayDistribution>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Register slots per side; overrides the computed budget and
    /// switches to a single-configuration JSON summary (needs exactly
    /// one --n value).
    #[arg(long)]
    pub rmax: Option<u32>,
    #[arg(long = "M", default_value_t = 0.0)]
    pub max_delay: f64,
    #[arg(long, default_value_t = 0.0)]
    pub failure_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub op_cap: u64,
}

/// How a command finished; usage/config problems arrive as errors instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    /// A checked property failed; the process exits with code 2.
    VerificationFailed,
}

/// Parse an argv (including the program name) into a spec; all parse
/// problems, including --help, surface as usage errors here. The binary
/// entry point treats help specially before calling this.
pub fn parse_cli<I, T>(argv: I) -> Result<ExperimentSpec>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    ExperimentSpec::try_parse_from(argv).map_err(|e| Error::usage(e.to_string()))
}

/// Full program behavior: parse, run, map to an exit code.
pub fn main_with_args<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let spec = match ExperimentSpec::try_parse_from(argv) {
        Ok(spec) => spec,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(&spec) {
        Ok(RunStatus::Success) => 0,
        Ok(RunStatus::VerificationFailed) => 2,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

/// Execute a spec. With `--jobs` set, trial batches run on a private
/// worker pool of that size.
pub fn run(spec: &ExperimentSpec) -> Result<RunStatus> {
    if spec.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
        pool.install(|| dispatch(spec))
    } else {
        dispatch(spec)
    }
}

fn dispatch(spec: &ExperimentSpec) -> Result<RunStatus> {
    match &spec.command {
        Command::Trial(args) => cmd_trial(spec, args),
        Command::Sweep(args) => cmd_sweep(spec, args),
        Command::Verify(args) => cmd_verify(spec, args),
        Command::Hybrid(args) => cmd_hybrid(spec, args),
        Command::Race(args) => cmd_race(spec, args),
        Command::Lemmas(args) => cmd_lemmas(spec, args),
        Command::Combined(args) => cmd_combined(spec, args),
    }
}

fn default_dist(dist: &Option<DelayDistribution>) -> DelayDistribution {
    dist.clone()
        .unwrap_or(DelayDistribution::Exponential { mean: 1.0 })
}

fn model_from(dist: &DelayDistribution, max_delay: f64, failure_rate: f64) -> NoiseModel {
    let mut model = NoiseModel::iid(dist.clone());
    if max_delay > 0.0 {
        model.max_adversary_delay = max_delay;
        model.delta = DeltaPolicy::ConstantMax;
    }
    model.failure_rate = failure_rate;
    model
}

/// `"half-half"`, or a bit string such as `0110` of length `n`.
fn parse_inputs(text: &str, n: usize) -> Result<Vec<bool>> {
    if text == "half-half" {
        return inputs_for(&InputsPolicy::HalfHalf, n);
    }
    if text.len() != n || !text.chars().all(|c| c == '0' || c == '1') {
        return Err(Error::usage(format!(
            "inputs must be \"half-half\" or {n} bits of 0/1, got {text:?}"
        )));
    }
    Ok(text.chars().map(|c| c == '1').collect())
}

fn pick_op_cap(flag: u64, n: usize) -> u64 {
    if flag > 0 {
        flag
    } else {
        survey_op_cap(n)
    }
}

/// Write to `--out` if given, else stdout.
fn emit(spec: &ExperimentSpec, content: &str) -> Result<()> {
    match &spec.out {
        Some(path) => {
            fs::write(path, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// CSV goes wherever `emit` sends it; a chart script rides along only
/// when the CSV landed in a file it can name.
fn emit_csv_with_plot(spec: &ExperimentSpec, csv: &str) -> Result<()> {
    emit(spec, csv)?;
    if let Some(path) = &spec.out {
        let csv_name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        fs::write(plot_script_path(path), plot_script(&csv_name))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrialDump<'a> {
    inputs: Vec<bool>,
    seed: u64,
    model: &'a NoiseModel,
    result: &'a TrialResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<&'a Trace>,
}

fn cmd_trial(spec: &ExperimentSpec, args: &TrialArgs) -> Result<RunStatus> {
    let inputs = parse_inputs(&args.inputs, args.n)?;
    let model = model_from(&default_dist(&args.dist), args.max_delay, args.failure_rate);
    model.validate(args.n)?;
    let (result, trace) = run_noisy_trial(
        &inputs,
        &model,
        args.seed,
        pick_op_cap(args.op_cap, args.n),
        spec.keep_traces,
    )?;
    let dump = TrialDump {
        inputs,
        seed: args.seed,
        model: &model,
        result: &result,
        trace: trace.as_ref(),
    };
    let mut text = serde_json::to_string_pretty(&dump)
        .map_err(|e| Error::logic(format!("cannot serialize trial: {e}")))?;
    text.push('\n');
    emit(spec, &text)?;
    Ok(RunStatus::Success)
}

fn cmd_sweep(spec: &ExperimentSpec, args: &SweepArgs) -> Result<RunStatus> {
    let trials = if args.paper_scale {
        PAPER_SCALE_TRIALS
    } else {
        args.trials
    };
    let stock_survey = args.dist.is_empty()
        && args.n.is_empty()
        && args.inputs == "half-half"
        && args.max_delay == 0.0
        && args.failure_rate == 0.0
        && args.op_cap == 0;
    let rows = if stock_survey {
        figure_rows(args.seed, trials)?
    } else {
        let dists = if args.dist.is_empty() {
            DelayDistribution::standard_set()
        } else {
            args.dist.clone()
        };
        let ns: Vec<usize> = if args.n.is_empty() {
            FIGURE_NS.to_vec()
        } else {
            args.n.clone()
        };
        let policy = if args.inputs == "half-half" {
            InputsPolicy::HalfHalf
        } else {
            let widths: std::collections::BTreeSet<usize> = ns.iter().copied().collect();
            if widths.len() != 1 {
                return Err(Error::usage(
                    "explicit input bits need a single --n value",
                ));
            }
            InputsPolicy::Explicit(parse_inputs(&args.inputs, ns[0])?)
        };
        let mut rows = Vec::new();
        for &n in &ns {
            rows.extend(run_sweep(
                &dists,
                &[n],
                trials,
                &policy,
                args.seed,
                pick_op_cap(args.op_cap, n),
                |d| model_from(d, args.max_delay, args.failure_rate),
            )?);
        }
        rows.sort_by(|a, b| a.distribution.cmp(&b.distribution).then(a.n.cmp(&b.n)));
        rows
    };
    emit_csv_with_plot(spec, &rows_to_csv(&rows))?;
    Ok(RunStatus::Success)
}

fn load_stored_trace(path: &std::path::Path) -> Result<Trace> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::usage(format!("{} is not JSON: {e}", path.display())))?;
    let trace_value = match value.get("trace") {
        Some(inner) if !inner.is_null() => inner,
        _ => &value,
    };
    serde_json::from_value(trace_value.clone())
        .map_err(|e| Error::usage(format!("{} holds no trace: {e}", path.display())))
}

fn cmd_verify(spec: &ExperimentSpec, args: &VerifyArgs) -> Result<RunStatus> {
    if let Some(path) = &args.trace {
        let trace = load_stored_trace(path)?;
        return finish_verify(spec, trace, format!("stored trace {}", path.display()));
    }
    let inputs = parse_inputs(&args.inputs, args.n)?;
    let op_cap = pick_op_cap(args.op_cap, args.n);
    let (trace, origin) = match &args.schedule {
        Some(sched_arg) => {
            let text = if std::path::Path::new(sched_arg).exists() {
                fs::read_to_string(sched_arg)?
            } else {
                sched_arg.clone()
            };
            let schedule = schedule_from_text(&text)?;
            let (_, trace) = run_with_schedule(&inputs, &schedule, op_cap)?;
            (trace, format!("schedule of {} slots", schedule.len()))
        }
        None => {
            let model = model_from(&default_dist(&args.dist), args.max_delay, args.failure_rate);
            model.validate(args.n)?;
            let (_, trace) = run_noisy_trial(&inputs, &model, args.seed, op_cap, true)?;
            (
                trace.ok_or_else(|| Error::logic("trial did not keep its trace"))?,
                format!("noisy trial, seed {}", args.seed),
            )
        }
    };
    finish_verify(spec, trace, origin)
}

fn finish_verify(spec: &ExperimentSpec, trace: Trace, origin: String) -> Result<RunStatus> {
    let report = validate_trace(&trace);
    let mut text = String::new();
    writeln!(
        text,
        "verified {} ops, {} decisions ({origin})",
        report.ops_checked, report.decisions_checked
    )
    .ok();
    for violation in &report.violations {
        writeln!(text, "VIOLATION {violation}").ok();
    }
    let status = if report.passed() {
        writeln!(text, "verification: PASS").ok();
        RunStatus::Success
    } else {
        writeln!(
            text,
            "verification: FAIL ({} violations)",
            report.violations.len()
        )
        .ok();
        RunStatus::VerificationFailed
    };
    emit(spec, &text)?;
    Ok(status)
}

fn cmd_hybrid(spec: &ExperimentSpec, args: &HybridArgs) -> Result<RunStatus> {
    let report = search_all_priorities(args.n, args.quantum, args.depth_cap, args.track_chain)?;
    let passed = report.passed();
    emit(spec, &format!("{report}"))?;
    Ok(if passed {
        RunStatus::Success
    } else {
        RunStatus::VerificationFailed
    })
}

fn cmd_race(spec: &ExperimentSpec, args: &RaceArgs) -> Result<RunStatus> {
    let dist = default_dist(&args.dist);
    let label = dist.to_string();
    let mut csv = String::from(RACE_CSV_HEADER);
    csv.push('\n');
    for &n in &args.n {
        let mut config = RaceConfig::iid(n, args.c, dist.clone(), args.round_cap);
        if args.max_delay > 0.0 {
            config.max_delay = args.max_delay;
            config.delta = DeltaPolicy::ConstantMax;
        }
        config.failure_rate = args.failure_rate;
        let row_master = mix_tag(args.seed, &format!("race|{label}|n={n}|c={}", args.c));
        let est = estimate_expected_r(&config, args.trials, row_master)?;
        let k2 = (2.0 * est.median).round() as u32;
        let k4 = (4.0 * est.median).round() as u32;
        let row = RaceSweepRow {
            n,
            c: args.c,
            distribution: label.clone(),
            trials: args.trials,
            mean_r: est.mean,
            median_r: est.median,
            cap_hits: est.cap_hits,
            p_tail_2x: est.tail_prob(k2),
            p_tail_4x: est.tail_prob(k4),
        };
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    emit(spec, &csv)?;
    Ok(RunStatus::Success)
}

fn cmd_lemmas(spec: &ExperimentSpec, args: &LemmasArgs) -> Result<RunStatus> {
    if args.trials == 0 {
        return Err(Error::usage("lemma checks need at least one trial"));
    }
    let mut text = String::new();
    let mut all_ok = true;
    let mut check = |line: String, ok: bool, text: &mut String| {
        writeln!(text, "LEMMA {}: {}", line, if ok { "PASS" } else { "FAIL" }).ok();
        all_ok &= ok;
    };

    // Exactly-one floor: the closed form must clear its lower bound on
    // random probability vectors.
    let mut rng = SimRng::seed_from_u64(mix_tag(args.seed, "lemmas|exactly-one"));
    let mut min_slack = f64::INFINITY;
    let mut floor_ok = true;
    for _ in 0..args.trials {
        let len = 1 + (rng.random_range(0..20u32) as usize);
        let q: Vec<f64> = (0..len).map(|_| 1.0 - rng.random_range(0.0..1.0)).collect();
        let (p, bound) = exactly_one_probability(&q)?;
        min_slack = min_slack.min(p - bound);
        floor_ok &= p >= bound;
    }
    check(
        format!(
            "exactly-one probability >= -x ln x on {} random vectors (min slack {min_slack:.3e})",
            args.trials
        ),
        floor_ok,
        &mut text,
    );

    // Unique-leader floor: a uniform field of 16 keeps a single leader
    // past the best threshold at least a fifth of the time.
    let dist = DelayDistribution::uniform(0.0, 2.0)?;
    let (best_t, p_unique) =
        unique_leader_probability(&dist, 16, args.trials.max(10_000), 256, args.seed)?;
    check(
        format!("unique leader for uniform:0,2 n=16 (p {p_unique:.4} at t {best_t:.4}, floor 0.19)"),
        p_unique >= 0.19,
        &mut text,
    );

    // Two-camp fraction against its closed form.
    let closed = lower_bound_closed_form(args.n)?;
    let fraction = lower_bound_fraction(args.n, args.trials.max(10_000), args.seed)?;
    let tol = if args.trials >= 100_000 { 0.03 } else { 0.05 };
    check(
        format!(
            "two-camp fast fraction n={} ({fraction:.4} vs closed form {closed:.4}, tol {tol})",
            args.n
        ),
        (fraction - closed).abs() <= tol,
        &mut text,
    );

    let status = if all_ok {
        RunStatus::Success
    } else {
        RunStatus::VerificationFailed
    };
    emit(spec, &text)?;
    Ok(status)
}

#[derive(Debug, Serialize)]
struct CombinedSummary {
    n: usize,
    r_max: u32,
    trials: u64,
    backup_decisions: u64,
    backup_fraction: f64,
    agreement_violations: u64,
    max_register_index: u32,
    nonterminated_trials: u64,
}

fn cmd_combined(spec: &ExperimentSpec, args: &CombinedArgs) -> Result<RunStatus> {
    let dist = default_dist(&args.dist);
    match args.rmax {
        Some(r_max) => {
            if args.n.len() != 1 {
                return Err(Error::usage("--rmax needs exactly one --n value"));
            }
            let n = args.n[0];
            let inputs = inputs_for(&InputsPolicy::HalfHalf, n)?;
            let model = model_from(&dist, args.max_delay, args.failure_rate);
            model.validate(n)?;
            let config = CombinedConfig {
                r_max,
                scheduler: CombinedScheduler::Noisy(model),
                op_cap: pick_op_cap(args.op_cap, n),
            };
            let mut summary = CombinedSummary {
                n,
                r_max,
                trials: args.trials,
                backup_decisions: 0,
                backup_fraction: 0.0,
                agreement_violations: 0,
                max_register_index: 0,
                nonterminated_trials: 0,
            };
            for trial in 0..args.trials {
                let seed = mix_tag(args.seed, &format!("combined|{trial}"));
                let mut backup = OracleBackup::new();
                let (result, _) = run_combined(&inputs, &config, &mut backup, seed, false)?;
                summary.backup_decisions += result
                    .decided_via
                    .iter()
                    .filter(|v| **v == Some(DecidedVia::Backup))
                    .count() as u64;
                let mut values = result.decided_values.iter().flatten();
                if let Some(first) = values.next() {
                    if values.any(|v| v != first) {
                        summary.agreement_violations += 1;
                    }
                }
                summary.max_register_index =
                    summary.max_register_index.max(result.max_register_index);
                if result.outcome == crate::noise::trial::TrialOutcome::NonTerminated {
                    summary.nonterminated_trials += 1;
                }
            }
            summary.backup_fraction =
                summary.backup_decisions as f64 / (args.trials * n as u64) as f64;
            let mut text = serde_json::to_string_pretty(&summary)
                .map_err(|e| Error::logic(format!("cannot serialize summary: {e}")))?;
            text.push('\n');
            emit(spec, &text)?;
            Ok(if summary.agreement_violations == 0 {
                RunStatus::Success
            } else {
                RunStatus::VerificationFailed
            })
        }
        None => {
            let max_n = args.n.iter().copied().max().unwrap_or(2);
            let rows = run_combined_sweep(
                &[dist],
                &args.n,
                args.trials,
                &InputsPolicy::HalfHalf,
                args.seed,
                pick_op_cap(args.op_cap, max_n),
                10,
                4,
                |d| model_from(d, args.max_delay, args.failure_rate),
            )?;
            let mut csv = String::from(COMBINED_CSV_HEADER);
            csv.push('\n');
            for row in &rows {
                csv.push_str(&row.csv_line());
                csv.push('\n');
            }
            emit(spec, &csv)?;
            Ok(RunStatus::Success)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<ExperimentSpec> {
        parse_cli(std::iter::once("racelab").chain(args.iter().copied()))
    }

    #[test]
    fn documented_invocations_parse() {
        let spec = parse(&[
            "sweep", "--dist", "exp:1", "--n", "2,8,64,512", "--trials", "2000", "--seed", "42",
            "--out", "r.csv",
        ])
        .unwrap();
        match &spec.command {
            Command::Sweep(s) => {
                assert_eq!(s.n, vec![2, 8, 64, 512]);
                assert_eq!(s.trials, 2000);
                assert_eq!(s.seed, 42);
                assert_eq!(s.dist.len(), 1);
                assert_eq!(spec.out.as_deref(), Some(std::path::Path::new("r.csv")));
            }
            other => panic!("wrong command {other:?}"),
        }

        let spec = parse(&["trial", "--dist", "normal:1,0.2,0,2", "--n", "10", "--seed", "7"])
            .unwrap();
        match &spec.command {
            Command::Trial(t) => {
                assert_eq!(t.n, 10);
                assert_eq!(t.seed, 7);
                assert_eq!(
                    t.dist,
                    Some(DelayDistribution::truncated_normal(1.0, 0.2, 0.0, 2.0).unwrap())
                );
            }
            other => panic!("wrong command {other:?}"),
        }
    }

    #[test]
    fn unknown_distributions_are_usage_errors_with_the_token() {
        let err = parse(&["sweep", "--dist", "bogus:1"]).unwrap_err();
        let text = err.to_string();
        assert!(matches!(err, Error::Usage(_)), "got {err:?}");
        assert!(text.contains("bogus"), "missing token in: {text}");
    }

    #[test]
    fn specs_survive_a_serde_round_trip() {
        let spec = parse(&[
            "race", "--n", "2,8", "--c", "3", "--trials", "500", "--round-cap", "100",
            "--jobs", "2",
        ])
        .unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn inputs_parse_as_bits_or_half_half() {
        assert_eq!(parse_inputs("half-half", 4).unwrap(), vec![false, false, true, true]);
        assert_eq!(parse_inputs("0110", 4).unwrap(), vec![false, true, true, false]);
        assert!(parse_inputs("011", 4).is_err());
        assert!(parse_inputs("01x0", 4).is_err());
    }

    #[test]
    fn help_and_version_exit_cleanly() {
        assert_eq!(main_with_args(["racelab", "--help"]), 0);
        assert_eq!(main_with_args(["racelab", "--version"]), 0);
        assert_eq!(main_with_args(["racelab", "frobnicate"]), 1);
    }

    #[test]
    fn a_passing_verification_runs_end_to_end() {
        let spec = parse(&["verify", "--n", "2", "--inputs", "11", "--dist", "exp:1"]).unwrap();
        assert_eq!(run(&spec).unwrap(), RunStatus::Success);
    }

    #[test]
    fn hybrid_command_reports_success_for_the_stock_search() {
        let spec = parse(&["hybrid", "--n", "2", "--quantum", "8", "--depth-cap", "14"]).unwrap();
        assert_eq!(run(&spec).unwrap(), RunStatus::Success);
    }

    #[test]
    fn lemma_checks_pass_at_desk_scale() {
        let spec = parse(&["lemmas", "--trials", "2000", "--n", "16", "--seed", "5"]).unwrap();
        assert_eq!(run(&spec).unwrap(), RunStatus::Success);
    }
}
