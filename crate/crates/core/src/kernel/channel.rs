//! Per-message latency distributions for control channels.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatencyDist {
    Constant {
        us: u64,
    },
    Uniform {
        min_us: u64,
        max_us: u64,
    },
    /// Lognormal with the given median, truncated to `[min_us, max_us]`.
    Lognormal {
        median_us: u64,
        sigma: f64,
        min_us: u64,
        max_us: u64,
    },
}

impl Default for LatencyDist {
    fn default() -> Self {
        LatencyDist::Lognormal {
            median_us: 20_000,
            sigma: 0.5,
            min_us: 1_000,
            max_us: 500_000,
        }
    }
}

const MAX_REJECTIONS: usize = 64;

impl LatencyDist {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimTime {
        let us = match *self {
            LatencyDist::Constant { us } => us,
            LatencyDist::Uniform { min_us, max_us } => rng.random_range(min_us..=max_us),
            LatencyDist::Lognormal {
                median_us,
                sigma,
                min_us,
                max_us,
            } => {
                let d = LogNormal::new((median_us as f64).ln(), sigma).expect("validated sigma");
                let mut v = d.sample(rng);
                for _ in 0..MAX_REJECTIONS {
                    if v >= min_us as f64 && v <= max_us as f64 {
                        break;
                    }
                    v = d.sample(rng);
                }
                (v.round() as u64).clamp(min_us, max_us)
            }
        };
        SimTime(us.max(1))
    }

    pub fn median(&self) -> SimTime {
        SimTime(match *self {
            LatencyDist::Constant { us } => us,
            LatencyDist::Uniform { min_us, max_us } => (min_us + max_us) / 2,
            LatencyDist::Lognormal { median_us, .. } => median_us,
        })
    }

    pub fn max(&self) -> SimTime {
        SimTime(match *self {
            LatencyDist::Constant { us } => us,
            LatencyDist::Uniform { max_us, .. } => max_us,
            LatencyDist::Lognormal { max_us, .. } => max_us,
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            LatencyDist::Constant { us: 0 } => Err("constant latency must be > 0".into()),
            LatencyDist::Uniform { min_us, max_us } if min_us == 0 || min_us > max_us => {
                Err("uniform latency needs 0 < min_us <= max_us".into())
            }
            LatencyDist::Lognormal {
                median_us,
                sigma,
                min_us,
                max_us,
            } => {
                if median_us == 0 || !(sigma.is_finite() && sigma >= 0.0) {
                    Err("lognormal needs median_us > 0 and finite sigma >= 0".into())
                } else if min_us == 0 || min_us > max_us {
                    Err("lognormal truncation needs 0 < min_us <= max_us".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}
