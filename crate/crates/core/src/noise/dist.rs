use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-operation delay distributions.
///
/// All of them produce finite, non-negative samples and none is
/// concentrated on a single point; `validate` rejects degenerate
/// parameters. Construct through the checked constructors (the CLI/parser
/// path always does).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DelayDistribution {
    /// Normal(mean, sd) resampled until the value lands strictly inside
    /// (lo, hi).
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
    /// Value `a` with probability `p_a`, else `b`.
    TwoPoint { a: f64, b: f64, p_a: f64 },
    /// `shift` plus an exponential with the given mean.
    ShiftedExponential { shift: f64, mean: f64 },
    /// Number of Bernoulli(p) trials up to and including the first
    /// success; support {1, 2, 3, ...}.
    Geometric { p: f64 },
    /// Uniform on the open interval (lo, hi).
    Uniform { lo: f64, hi: f64 },
    /// Exponential with the given mean.
    Exponential { mean: f64 },
    /// Heavy-tailed demonstration distribution: value `2^(k*k)` with
    /// probability `2^-k`, with all mass for `k >= cap` collapsed onto
    /// `2^(cap*cap)` so samples stay finite in an f64.
    Pathological { cap: u32 },
}

use DelayDistribution::*;

impl DelayDistribution {
    pub fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        let d = TruncatedNormal { mean, sd, lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn two_point(a: f64, b: f64, p_a: f64) -> Result<Self> {
        let d = TwoPoint { a, b, p_a };
        d.validate()?;
        Ok(d)
    }

    pub fn shifted_exponential(shift: f64, mean: f64) -> Result<Self> {
        let d = ShiftedExponential { shift, mean };
        d.validate()?;
        Ok(d)
    }

    pub fn geometric(p: f64) -> Result<Self> {
        let d = Geometric { p };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        let d = Exponential { mean };
        d.validate()?;
        Ok(d)
    }

    pub fn pathological(cap: u32) -> Result<Self> {
        let d = Pathological { cap };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match *self {
            TruncatedNormal { mean, sd, lo, hi } => {
                if !finite(mean) || !finite(sd) || !finite(lo) || !finite(hi) {
                    return Err(Error::config("normal: parameters must be finite"));
                }
                if sd <= 0.0 {
                    return Err(Error::config("normal: sd must be positive"));
                }
                if lo < 0.0 || lo >= hi {
                    return Err(Error::config("normal: need 0 <= lo < hi"));
                }
                // keep rejection sampling from stalling on a window the
                // distribution essentially never hits
                if hi < mean - 10.0 * sd || lo > mean + 10.0 * sd {
                    return Err(Error::config("normal: window (lo,hi) is unreachable"));
                }
            }
            TwoPoint { a, b, p_a } => {
                if !finite(a) || !finite(b) || a < 0.0 || b < 0.0 {
                    return Err(Error::config("twopoint: values must be finite and >= 0"));
                }
                if a == b {
                    return Err(Error::config("twopoint: values must differ"));
                }
                if !(p_a > 0.0 && p_a < 1.0) {
                    return Err(Error::config("twopoint: probability must be in (0,1)"));
                }
            }
            ShiftedExponential { shift, mean } => {
                if !finite(shift) || shift < 0.0 {
                    return Err(Error::config("shiftexp: shift must be finite and >= 0"));
                }
                if !finite(mean) || mean <= 0.0 {
                    return Err(Error::config("shiftexp: mean must be positive"));
                }
            }
            Geometric { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::config("geometric: p must be in (0,1)"));
                }
            }
            Uniform { lo, hi } => {
                if !finite(lo) || !finite(hi) || lo < 0.0 || lo >= hi {
                    return Err(Error::config("uniform: need 0 <= lo < hi"));
                }
            }
            Exponential { mean } => {
                if !finite(mean) || mean <= 0.0 {
                    return Err(Error::config("exp: mean must be positive"));
                }
            }
            Pathological { cap } => {
                // cap 1 would put all mass on the single value 2; caps above
                // 30 push 2^(cap^2) out of f64 range
                if !(2..=30).contains(&cap) {
                    return Err(Error::config("pathological: cap must be in 2..=30"));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            TruncatedNormal { mean, sd, lo, hi } => {
                let normal = Normal::new(mean, sd).expect("validated");
                for _ in 0..1_000_000 {
                    let v = normal.sample(rng);
                    if v > lo && v < hi {
                        return v;
                    }
                }
                panic!("truncated normal rejection sampling stalled");
            }
            TwoPoint { a, b, p_a } => {
                if rng.random_bool(p_a) {
                    a
                } else {
                    b
                }
            }
            ShiftedExponential { shift, mean } => shift + exp_sample(mean, rng),
            Geometric { p } => {
                let mut k = 1u64;
                while !rng.random_bool(p) {
                    k += 1;
                }
                k as f64
            }
            Uniform { lo, hi } => lo + (hi - lo) * unit_open(rng),
            Exponential { mean } => exp_sample(mean, rng),
            Pathological { cap } => {
                let mut k = 1u32;
                while k < cap && !rng.random_bool(0.5) {
                    k += 1;
                }
                ((k * k) as f64).exp2()
            }
        }
    }

    /// The six distributions used by the stock scheduling survey.
    pub fn standard_set() -> Vec<DelayDistribution> {
        vec![
            TruncatedNormal {
                mean: 1.0,
                sd: 0.2,
                lo: 0.0,
                hi: 2.0,
            },
            TwoPoint {
                a: 2.0 / 3.0,
                b: 4.0 / 3.0,
                p_a: 0.5,
            },
            ShiftedExponential {
                shift: 0.5,
                mean: 0.5,
            },
            Geometric { p: 0.5 },
            Uniform { lo: 0.0, hi: 2.0 },
            Exponential { mean: 1.0 },
        ]
    }
}

/// Uniform draw from the open unit interval.
fn unit_open(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn exp_sample(mean: f64, rng: &mut impl Rng) -> f64 {
    -mean * unit_open(rng).ln()
}

impl fmt::Display for DelayDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TruncatedNormal { mean, sd, lo, hi } => write!(f, "normal:{mean},{sd},{lo},{hi}"),
            TwoPoint { a, b, p_a } => write!(f, "twopoint:{a},{b},{p_a}"),
            ShiftedExponential { shift, mean } => write!(f, "shiftexp:{shift},{mean}"),
            Geometric { p } => write!(f, "geometric:{p}"),
            Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Exponential { mean } => write!(f, "exp:{mean}"),
            Pathological { cap } => write!(f, "pathological:{cap}"),
        }
    }
}

impl FromStr for DelayDistribution {
    type Err = Error;

    /// Parse `name:arg,arg,...` specs, e.g. `exp:1`, `normal:1,0.2,0,2`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(format!("bad number {a:?} in distribution {s:?}")))
                })
                .collect::<Result<_>>()?
        };
        let want = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "distribution {name:?} takes {k} parameter(s), got {}",
                    nums.len()
                )))
            }
        };
        match name {
            "normal" => {
                want(4)?;
                Self::truncated_normal(nums[0], nums[1], nums[2], nums[3])
            }
            "twopoint" => {
                want(3)?;
                Self::two_point(nums[0], nums[1], nums[2])
            }
            "shiftexp" => {
                want(2)?;
                Self::shifted_exponential(nums[0], nums[1])
            }
            "geometric" | "geom" => {
                want(1)?;
                Self::geometric(nums[0])
            }
            "uniform" => {
                want(2)?;
                Self::uniform(nums[0], nums[1])
            }
            "exp" => {
                want(1)?;
                Self::exponential(nums[0])
            }
            "pathological" => {
                want(1)?;
                if nums[0].fract() != 0.0 || nums[0] < 0.0 {
                    return Err(Error::config("pathological: cap must be a positive integer"));
                }
                Self::pathological(nums[0] as u32)
            }
            _ => Err(Error::config(format!("unknown distribution {name:?}"))),
        }
    }
}
