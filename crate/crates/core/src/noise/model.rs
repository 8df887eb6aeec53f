use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::dist::DelayDistribution;
use crate::protocol::process::{OpKind, Pid};

/// Adversarial per-operation delay, chosen obliviously (fixed before the
/// run) and bounded by the model's `max_adversary_delay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DeltaPolicy {
    /// No adversarial delay.
    Zero,
    /// Always the maximum.
    ConstantMax,
    /// One fixed delay per process, applied to each of its ops.
    PerProcess(Vec<f64>),
    /// `table[pid][j-1]` for op j; ops beyond the table get 0.
    Table(Vec<Vec<f64>>),
}

impl DeltaPolicy {
    /// Check that every delay the policy can produce lies in `[0, max]`
    /// and that per-process data covers all `n` processes.
    pub fn validate(&self, n: usize, max: f64) -> Result<()> {
        let check = |v: f64| -> Result<()> {
            if !v.is_finite() || v < 0.0 || v > max {
                return Err(Error::config(format!(
                    "adversary delay {v} outside [0, {max}]"
                )));
            }
            Ok(())
        };
        match self {
            DeltaPolicy::Zero => {}
            DeltaPolicy::ConstantMax => {}
            DeltaPolicy::PerProcess(v) => {
                if v.len() != n {
                    return Err(Error::config("per-process delays must cover all processes"));
                }
                for &d in v {
                    check(d)?;
                }
            }
            DeltaPolicy::Table(t) => {
                if t.len() != n {
                    return Err(Error::config("delay table must cover all processes"));
                }
                for row in t {
                    for &d in row {
                        check(d)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Delay injected before op (or round) `j`, 1-based, of `pid`. `max`
    /// is the model's cap, used by the `ConstantMax` policy.
    pub fn amount(&self, pid: Pid, j: u64, max: f64) -> f64 {
        match self {
            DeltaPolicy::Zero => 0.0,
            DeltaPolicy::ConstantMax => max,
            DeltaPolicy::PerProcess(v) => v[pid],
            DeltaPolicy::Table(t) => t[pid]
                .get((j - 1) as usize)
                .copied()
                .unwrap_or(0.0),
        }
    }
}

/// Per-process start times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StartOffsets {
    Explicit(Vec<f64>),
    /// Start jitter drawn uniformly from [lo, hi) per process; breaks the
    /// ties that lattice-valued delay distributions would otherwise
    /// produce.
    Dither { lo: f64, hi: f64 },
}

impl Default for StartOffsets {
    fn default() -> Self {
        StartOffsets::Dither { lo: 0.0, hi: 1e-8 }
    }
}

impl StartOffsets {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            StartOffsets::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::config("start offsets must cover all processes"));
                }
                if v.iter().any(|&s| !s.is_finite() || s < 0.0) {
                    return Err(Error::config("start offsets must be finite and >= 0"));
                }
            }
            StartOffsets::Dither { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo < hi) {
                    return Err(Error::config("dither interval must satisfy 0 <= lo < hi"));
                }
            }
        }
        Ok(())
    }

    /// Start time of `pid`, drawing jitter from `rng` if configured.
    pub fn draw(&self, pid: Pid, rng: &mut impl Rng) -> f64 {
        match self {
            StartOffsets::Explicit(v) => v[pid],
            StartOffsets::Dither { lo, hi } => rng.random_range(*lo..*hi),
        }
    }
}

/// When (if ever) the next operation completes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpTime {
    At(f64),
    /// The halt roll failed: the operation, and the process, never happen
    /// again.
    Halt,
}

/// Full description of the noisy scheduler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub dist_read: DelayDistribution,
    pub dist_write: DelayDistribution,
    /// Upper bound M on each adversarial delay.
    pub max_adversary_delay: f64,
    pub delta: DeltaPolicy,
    pub start: StartOffsets,
    /// Probability that any given operation halts its process forever.
    pub failure_rate: f64,
}

impl NoiseModel {
    /// Same distribution for reads and writes, no adversarial delay, no
    /// failures, default start dither. This is the stock survey setup.
    pub fn iid(dist: DelayDistribution) -> Self {
        NoiseModel {
            dist_read: dist.clone(),
            dist_write: dist,
            max_adversary_delay: 0.0,
            delta: DeltaPolicy::Zero,
            start: StartOffsets::default(),
            failure_rate: 0.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.dist_read.validate()?;
        self.dist_write.validate()?;
        let m = self.max_adversary_delay;
        if !m.is_finite() || m < 0.0 {
            return Err(Error::config("max adversary delay must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return Err(Error::config("failure rate must be in [0,1]"));
        }
        self.delta.validate(n, m)?;
        self.start.validate(n)
    }

    /// Adversarial delay for op `j` (1-based) of `pid`.
    pub fn delta(&self, pid: Pid, j: u64) -> f64 {
        self.delta.amount(pid, j, self.max_adversary_delay)
    }

    /// Start time of `pid`, drawing dither from `rng` if configured.
    pub fn start_time(&self, pid: Pid, rng: &mut impl Rng) -> f64 {
        self.start.draw(pid, rng)
    }

    /// Completion time of the next operation given the previous one
    /// finished at `prev`: `prev + delta + X`, or `Halt` with probability
    /// `failure_rate`. Draw order (halt roll, then delay) is part of the
    /// determinism contract.
    pub fn next_op_time(
        &self,
        prev: f64,
        kind: OpKind,
        pid: Pid,
        j: u64,
        rng: &mut impl Rng,
    ) -> OpTime {
        if self.failure_rate > 0.0 && rng.random_bool(self.failure_rate) {
            return OpTime::Halt;
        }
        let dist = match kind {
            OpKind::Read => &self.dist_read,
            OpKind::Write => &self.dist_write,
        };
        OpTime::At(prev + self.delta(pid, j) + dist.sample(rng))
    }
}
