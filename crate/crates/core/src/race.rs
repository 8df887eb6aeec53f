//! Round-level race abstraction over the bit-writing protocol.
//!
//! The full event-loop simulation tracks every read and write. For
//! questions about *how many rounds* contention lasts, only the times at
//! which each process completes whole rounds matter: a process that gets
//! far enough ahead of every rival in wall-clock time runs unopposed, its
//! round bits are already in place when the others arrive, and the field
//! collapses behind it. This module races the per-round completion times
//! directly:
//!
//! ```text
//! finish(i, 0) = start offset of process i
//! finish(i, r) = finish(i, r-1) + delta(i, r) + X(i, r)   [or infinity]
//! ```
//!
//! where `X(i, r)` is random round noise, `delta` is a bounded
//! adversarial stall, and each round independently halts the process
//! forever (time infinity) with the configured failure probability. The
//! race is decided at the first round `R` where some process has finished
//! round `R + c` strictly before every rival finished round `R` — a lead
//! of `c` full rounds. With `c = 2` this is exactly the cushion after
//! which a front-runner of the bit-writing protocol decides and drags
//! every trailing process to the same value, so the winning round here is
//! a faithful proxy for the protocol's first decision round.
//!
//! Alongside the simulator live small Monte-Carlo and closed-form helpers
//! for the quantities that drive the expected length of the race: the
//! probability that exactly one of a set of independent events occurs,
//! the probability that one sampler beats the rest of the field past a
//! single threshold, and the fraction of symmetric two-camp fields in
//! which both camps keep a full-speed representative.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::harness::rng::{derive_stream, mix_tag, SimRng};
use crate::noise::dist::DelayDistribution;
use crate::noise::model::{DeltaPolicy, StartOffsets};
use crate::protocol::process::Pid;

/// How the random part of one round's duration is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RoundDelay {
    /// One draw per round.
    PerRound(DelayDistribution),
    /// A round costs three read draws plus one write draw, matching the
    /// operation footprint of one protocol round (two forward reads, the
    /// preference write, and the read behind).
    OpSum {
        read: DelayDistribution,
        write: DelayDistribution,
    },
}

impl RoundDelay {
    fn validate(&self) -> Result<()> {
        match self {
            RoundDelay::PerRound(d) => d.validate(),
            RoundDelay::OpSum { read, write } => {
                read.validate()?;
                write.validate()
            }
        }
    }

    /// Draw one round's noise. For `OpSum` the three read draws come
    /// before the write draw; the order is part of the determinism
    /// contract.
    fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            RoundDelay::PerRound(d) => d.sample(rng),
            RoundDelay::OpSum { read, write } => {
                read.sample(rng) + read.sample(rng) + read.sample(rng) + write.sample(rng)
            }
        }
    }
}

impl fmt::Display for RoundDelay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoundDelay::PerRound(d) => write!(f, "{d}"),
            RoundDelay::OpSum { read, write } => write!(f, "opsum:3x{read}+{write}"),
        }
    }
}

/// Parameters of one race.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceConfig {
    /// Field size.
    pub n: usize,
    /// Rounds of clear lead required to win; 2 matches the protocol.
    pub c: u32,
    pub round_delay: RoundDelay,
    /// Adversarial stall before each round, bounded by `max_delay`.
    pub delta: DeltaPolicy,
    pub max_delay: f64,
    pub start: StartOffsets,
    /// Per-round probability that a process halts forever.
    pub failure_rate: f64,
    /// Give up (`CapHit`) once the winning round would exceed this.
    pub round_cap: u32,
}

impl RaceConfig {
    /// Same noise for every process, no stalls, no failures, default
    /// start jitter.
    pub fn iid(n: usize, c: u32, dist: DelayDistribution, round_cap: u32) -> Self {
        RaceConfig {
            n,
            c,
            round_delay: RoundDelay::PerRound(dist),
            delta: DeltaPolicy::Zero,
            max_delay: 0.0,
            start: StartOffsets::default(),
            failure_rate: 0.0,
            round_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("a race needs at least one process"));
        }
        if self.c == 0 {
            return Err(Error::config("required lead c must be >= 1"));
        }
        if self.round_cap == 0 || self.round_cap > 10_000_000 {
            return Err(Error::config("round cap must be in [1, 1e7]"));
        }
        if self.c > 1_000_000 {
            return Err(Error::config("required lead c must be <= 1e6"));
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return Err(Error::config("failure rate must be in [0,1]"));
        }
        if !self.max_delay.is_finite() || self.max_delay < 0.0 {
            return Err(Error::config("max adversary delay must be finite and >= 0"));
        }
        self.round_delay.validate()?;
        self.delta.validate(self.n, self.max_delay)?;
        self.start.validate(self.n)
    }
}

/// How a race ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RaceOutcome {
    /// `pid` finished round `round + c` before any rival finished `round`.
    Winner { pid: Pid, round: u32 },
    /// First round whose `+ c` horizon no process survived to.
    AllDead { round: u32 },
    /// No winner by `round_cap`.
    CapHit,
}

impl RaceOutcome {
    /// The round charged to this trial in aggregates; a capped trial is
    /// charged conservatively at the cap itself.
    pub fn effective_round(&self, cap: u32) -> u32 {
        match self {
            RaceOutcome::Winner { round, .. } | RaceOutcome::AllDead { round } => *round,
            RaceOutcome::CapHit => cap,
        }
    }
}

/// One simulated race with its full completion-time table, so the
/// outcome can be re-checked from the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct RaceRun {
    pub outcome: RaceOutcome,
    /// `completion[pid][r]` is when `pid` finished round `r`; row 0 holds
    /// the start offsets, halted rounds are infinity. Rows extend just
    /// far enough past the deciding round to evaluate the lead predicate.
    pub completion: Vec<Vec<f64>>,
}

/// Race once under `config`, deterministically in `seed`.
pub fn simulate_race(config: &RaceConfig, seed: u64) -> Result<RaceRun> {
    config.validate()?;
    let mut rng = SimRng::seed_from_u64(seed);
    Ok(run_race(config, &mut rng))
}

/// Core loop: grow the completion table lazily and scan candidate rounds
/// in order, so the returned round is the least one satisfying the
/// predicate. Per round and process the draw order is: halt roll (only
/// if failures are on), then round noise; a halted process draws nothing.
fn run_race(cfg: &RaceConfig, rng: &mut SimRng) -> RaceRun {
    let n = cfg.n;
    let mut completion: Vec<Vec<f64>> = (0..n).map(|p| vec![cfg.start.draw(p, rng)]).collect();
    let mut alive = vec![true; n];
    let mut generated: u32 = 0;
    for r in 1..=cfg.round_cap {
        let horizon = r + cfg.c;
        while generated < horizon {
            let next_round = generated + 1;
            for (pid, row) in completion.iter_mut().enumerate() {
                let time = if !alive[pid] {
                    f64::INFINITY
                } else if cfg.failure_rate > 0.0 && rng.random_bool(cfg.failure_rate) {
                    alive[pid] = false;
                    f64::INFINITY
                } else {
                    row[generated as usize]
                        + cfg.delta.amount(pid, u64::from(next_round), cfg.max_delay)
                        + cfg.round_delay.sample(rng)
                };
                row.push(time);
            }
            generated = next_round;
        }
        for pid in 0..n {
            let lead_time = completion[pid][horizon as usize];
            if lead_time.is_finite()
                && (0..n).all(|q| q == pid || lead_time < completion[q][r as usize])
            {
                return RaceRun {
                    outcome: RaceOutcome::Winner { pid, round: r },
                    completion,
                };
            }
        }
        if completion.iter().all(|row| row[horizon as usize].is_infinite()) {
            return RaceRun {
                outcome: RaceOutcome::AllDead { round: r },
                completion,
            };
        }
    }
    RaceRun {
        outcome: RaceOutcome::CapHit,
        completion,
    }
}

/// Aggregate of many independent races of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceEstimate {
    pub trials: u64,
    pub round_cap: u32,
    /// Mean deciding round, capped trials charged at the cap.
    pub mean: f64,
    /// Empirical median (midpoint of the two central order statistics
    /// when `trials` is even).
    pub median: f64,
    pub cap_hits: u64,
    pub all_dead: u64,
    /// `histogram[r]` = number of trials whose race ended at round `r`;
    /// index 0 is unused.
    pub histogram: Vec<u64>,
}

impl RaceEstimate {
    /// Empirical `P[deciding round > k]`.
    pub fn tail_prob(&self, k: u32) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let from = (k as usize + 1).min(self.histogram.len());
        let above: u64 = self.histogram[from..].iter().sum();
        above as f64 / self.trials as f64
    }

    fn from_histogram(histogram: Vec<u64>, cap: u32, cap_hits: u64, all_dead: u64) -> Self {
        let trials: u64 = histogram.iter().sum();
        let weighted: u64 = histogram
            .iter()
            .enumerate()
            .map(|(r, &count)| r as u64 * count)
            .sum();
        let mean = weighted as f64 / trials as f64;
        let rank_of = |rank: u64| -> f64 {
            // 1-based order statistic out of `trials`.
            let mut seen = 0u64;
            for (r, &count) in histogram.iter().enumerate() {
                seen += count;
                if seen >= rank {
                    return r as f64;
                }
            }
            cap as f64
        };
        let median = if trials % 2 == 1 {
            rank_of(trials / 2 + 1)
        } else {
            (rank_of(trials / 2) + rank_of(trials / 2 + 1)) / 2.0
        };
        RaceEstimate {
            trials,
            round_cap: cap,
            mean,
            median,
            cap_hits,
            all_dead,
            histogram,
        }
    }
}

/// Run `trials` independent races (trial `i` on its own generator stream
/// derived from `master_seed`, so thread count and order are
/// irrelevant) and summarize the deciding rounds.
pub fn estimate_expected_r(
    config: &RaceConfig,
    trials: u64,
    master_seed: u64,
) -> Result<RaceEstimate> {
    config.validate()?;
    if trials < 100 {
        return Err(Error::config("round estimates need at least 100 trials"));
    }
    let cap = config.round_cap;
    let merged = (0..trials)
        .into_par_iter()
        .fold(
            || (vec![0u64; cap as usize + 1], 0u64, 0u64),
            |mut acc, trial| {
                let mut rng = derive_stream(master_seed, trial);
                let run = run_race(config, &mut rng);
                acc.0[run.outcome.effective_round(cap) as usize] += 1;
                match run.outcome {
                    RaceOutcome::CapHit => acc.1 += 1,
                    RaceOutcome::AllDead { .. } => acc.2 += 1,
                    RaceOutcome::Winner { .. } => {}
                }
                acc
            },
        )
        .reduce(
            || (vec![0u64; cap as usize + 1], 0u64, 0u64),
            |mut a, b| {
                for (slot, add) in a.0.iter_mut().zip(&b.0) {
                    *slot += add;
                }
                (a.0, a.1 + b.1, a.2 + b.2)
            },
        );
    Ok(RaceEstimate::from_histogram(merged.0, cap, merged.1, merged.2))
}

/// Exact probability that exactly one of a set of independent events
/// fires, where event `i` fires with probability `1 - q[i]`, together
/// with the lower bound `-x ln x` for `x` the product of the `q[i]`.
/// The bound holds for every `q`, so callers can use it as a floor
/// without knowing the individual probabilities.
pub fn exactly_one_probability(q: &[f64]) -> Result<(f64, f64)> {
    if q.is_empty() {
        return Err(Error::config("need at least one probability"));
    }
    for &v in q {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::config(format!("probability {v} outside [0,1]")));
        }
    }
    let n = q.len();
    // prefix[i] = product of q[..i], suffix[i] = product of q[i+1..].
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * q[i];
    }
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * q[i];
    }
    let p_exact: f64 = (0..n).map(|i| (1.0 - q[i]) * prefix[i] * suffix[i + 1]).sum();
    let x = prefix[n];
    let bound = if x > 0.0 { -x * x.ln() } else { 0.0 };
    Ok((p_exact, bound))
}

/// Monte-Carlo estimate of the best single-threshold split of a field:
/// draw `n` samples per trial, and for thresholds `t` on a quantile grid
/// of the observed minima, measure how often exactly one sample lands at
/// or below `t`. Returns the best threshold and its probability. A lone
/// sampler (`n = 1`) yields probability 1 at the top of the grid.
pub fn unique_leader_probability(
    dist: &DelayDistribution,
    n: usize,
    trials: u64,
    t_grid_size: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::config("need at least one sampler"));
    }
    if trials == 0 {
        return Err(Error::config("need at least one trial"));
    }
    if t_grid_size == 0 {
        return Err(Error::config("threshold grid must have at least one point"));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let t = trials as usize;
    let mut mins = Vec::with_capacity(t);
    let mut second_mins = Vec::with_capacity(t);
    for _ in 0..t {
        let mut best = f64::INFINITY;
        let mut second = f64::INFINITY;
        for _ in 0..n {
            let x = dist.sample(&mut rng);
            if x < best {
                second = best;
                best = x;
            } else if x < second {
                second = x;
            }
        }
        mins.push(best);
        second_mins.push(second);
    }
    let mut sorted_mins = mins;
    sorted_mins.sort_by(f64::total_cmp);
    second_mins.sort_by(f64::total_cmp);
    // Exactly one sample is <= t iff min <= t < second-min, so the count
    // at t is (#min <= t) - (#second-min <= t), via binary search.
    let mut grid: Vec<f64> = (1..=t_grid_size)
        .map(|k| sorted_mins[(k * t / t_grid_size).saturating_sub(1)])
        .collect();
    grid.dedup();
    let mut best_t = grid[0];
    let mut best_count = 0u64;
    for &threshold in &grid {
        let le_min = sorted_mins.partition_point(|&x| x <= threshold) as u64;
        let le_second = second_mins.partition_point(|&x| x <= threshold) as u64;
        let count = le_min - le_second;
        if count > best_count {
            best_count = count;
            best_t = threshold;
        }
    }
    Ok((best_t, best_count as f64 / trials as f64))
}

/// Fraction of trials in which a symmetric two-camp field keeps a
/// full-speed representative in *both* camps. Each of `n` processes
/// (half per camp) runs its first `ceil(log2 n)` steps, each step
/// independently fast or slow with probability one half; a process
/// represents its camp if every one of those steps is fast. Start
/// jitter and stalls play no role in the counted event, so only the
/// speed coins are drawn. The limiting value is
/// `(1 - (1 - 1/2^k)^(n/2))^2` with `k = ceil(log2 n)` — about 0.157
/// for `n = 64` — and it bounds from below how often such a field
/// forces at least the minimum achievable contention.
pub fn lower_bound_fraction(n: usize, trials: u64, seed: u64) -> Result<f64> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::config("field size must be even and >= 2"));
    }
    if trials == 0 {
        return Err(Error::config("need at least one trial"));
    }
    let k = usize::BITS - (n - 1).leading_zeros();
    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = derive_stream(seed, trial);
            let mut camp_fast = [false, false];
            for (camp, flag) in camp_fast.iter_mut().enumerate() {
                let base = camp * (n / 2);
                'camp: for _pid in base..base + n / 2 {
                    for _step in 0..k {
                        if !rng.random_bool(0.5) {
                            continue 'camp;
                        }
                    }
                    *flag = true;
                    break;
                }
            }
            u64::from(camp_fast[0] && camp_fast[1])
        })
        .sum();
    Ok(successes as f64 / trials as f64)
}

/// Limiting value of [`lower_bound_fraction`]:
/// `(1 - (1 - 1/2^k)^(n/2))^2` with `k = ceil(log2 n)`.
pub fn lower_bound_closed_form(n: usize) -> Result<f64> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::config("field size must be even and >= 2"));
    }
    let k = usize::BITS - (n - 1).leading_zeros();
    let p_fast = 0.5f64.powi(k as i32);
    let one_camp = 1.0 - (1.0 - p_fast).powi((n / 2) as i32);
    Ok(one_camp * one_camp)
}

pub const RACE_CSV_HEADER: &str =
    "n,c,distribution,trials,mean_R,median_R,cap_hits,p_tail_2x,p_tail_4x";

/// One row of a race survey: summary statistics for a single field size
/// and distribution, including the tail mass beyond two and four times
/// the median deciding round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceSweepRow {
    pub n: usize,
    pub c: u32,
    pub distribution: String,
    pub trials: u64,
    pub mean_r: f64,
    pub median_r: f64,
    pub cap_hits: u64,
    pub p_tail_2x: f64,
    pub p_tail_4x: f64,
}

impl RaceSweepRow {
    /// RFC-4180 line; the distribution label is quoted because it may
    /// contain commas.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},\"{}\",{},{},{},{},{},{}",
            self.n,
            self.c,
            self.distribution,
            self.trials,
            self.mean_r,
            self.median_r,
            self.cap_hits,
            self.p_tail_2x,
            self.p_tail_4x
        )
    }
}

/// Survey deciding rounds over a grid of distributions and field sizes.
/// Each row reseeds from `master_seed` and its own label, so any row can
/// be regenerated alone and row order never matters.
pub fn run_race_sweep(
    dists: &[DelayDistribution],
    ns: &[usize],
    c: u32,
    trials: u64,
    round_cap: u32,
    master_seed: u64,
) -> Result<Vec<RaceSweepRow>> {
    let mut rows = Vec::with_capacity(dists.len() * ns.len());
    for dist in dists {
        for &n in ns {
            let config = RaceConfig::iid(n, c, dist.clone(), round_cap);
            let label = dist.to_string();
            let row_master = mix_tag(master_seed, &format!("race|{label}|n={n}|c={c}"));
            let est = estimate_expected_r(&config, trials, row_master)?;
            let k2 = (2.0 * est.median).round() as u32;
            let k4 = (4.0 * est.median).round() as u32;
            rows.push(RaceSweepRow {
                n,
                c,
                distribution: label,
                trials,
                mean_r: est.mean,
                median_r: est.median,
                cap_hits: est.cap_hits,
                p_tail_2x: est.tail_prob(k2),
                p_tail_4x: est.tail_prob(k4),
            });
        }
    }
    Ok(rows)
}
