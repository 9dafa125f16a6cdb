//! Independent trials of one scenario and their delay statistics.

use serde::{Deserialize, Serialize};

use super::anomaly::Anomaly;
use super::config::{Method, ScenarioConfig};
use super::report::RunReport;
use crate::kernel::RngStreams;
use crate::sim::{RunOutput, TraceLine, World};

/// Seed of trial `i`; trials never share random streams.
pub fn trial_seed(seed: u64, i: u32) -> u64 {
    RngStreams::new(seed).derive_seed(&format!("trial-{i}"))
}

/// Runs trial `i`. Only trial 0 keeps an event trace.
pub fn run_trial(cfg: &ScenarioConfig, seed: u64, i: u32) -> RunOutput {
    let w = World::new(cfg, trial_seed(seed, i), i);
    if i == 0 {
        w.with_trace().run()
    } else {
        w.run()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialAnomaly {
    pub trial: u32,
    #[serde(flatten)]
    pub anomaly: Anomaly,
}

/// Merged results of every trial of one method.
#[derive(Debug, Clone)]
pub struct TrialSet {
    pub method: Method,
    pub seed: u64,
    pub trials: u32,
    pub report: RunReport,
    pub anomalies: Vec<TrialAnomaly>,
    pub trace: Vec<TraceLine>,
}

impl TrialSet {
    /// `outputs` must be in trial order.
    pub fn collect(cfg: &ScenarioConfig, seed: u64, outputs: Vec<RunOutput>) -> TrialSet {
        let mut set = TrialSet {
            method: cfg.method,
            seed,
            trials: outputs.len() as u32,
            report: RunReport::default(),
            anomalies: Vec::new(),
            trace: Vec::new(),
        };
        for (i, o) in outputs.into_iter().enumerate() {
            set.report.absorb(&o.report);
            set.anomalies
                .extend(o.anomalies.into_iter().map(|a| TrialAnomaly {
                    trial: i as u32,
                    anomaly: a,
                }));
            if i == 0 {
                set.trace = o.trace;
            }
        }
        set
    }

    pub fn delays(&self) -> Vec<u64> {
        self.report.samples.iter().map(|s| s.delay_us).collect()
    }

    pub fn cdf(&self) -> Cdf {
        Cdf::new(self.delays())
    }
}

/// Runs `cfg.knobs.trials` trials one after another.
pub fn run_trials(cfg: &ScenarioConfig, seed: u64) -> TrialSet {
    let outputs = (0..cfg.knobs.trials)
        .map(|i| run_trial(cfg, seed, i))
        .collect();
    TrialSet::collect(cfg, seed, outputs)
}

/// Empirical distribution of reaction delays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cdf {
    sorted: Vec<u64>,
}

impl Cdf {
    pub fn new(mut samples: Vec<u64>) -> Self {
        samples.sort_unstable();
        Cdf { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Nearest-rank quantile, `p` in [0, 1].
    pub fn quantile(&self, p: f64) -> Option<u64> {
        if self.sorted.is_empty() {
            return None;
        }
        let n = self.sorted.len();
        let rank = (p.clamp(0.0, 1.0) * n as f64).ceil() as usize;
        Some(self.sorted[rank.clamp(1, n) - 1])
    }

    /// Fraction of samples at or below `x`.
    pub fn at(&self, x: u64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// One point per percentile, 1..=100.
    pub fn percentiles(&self) -> Vec<(u64, f64)> {
        if self.sorted.is_empty() {
            return Vec::new();
        }
        (1..=100)
            .map(|k| {
                (
                    self.quantile(k as f64 / 100.0).expect("nonempty"),
                    k as f64 / 100.0,
                )
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("delay_us,cumulative_fraction\n");
        for (d, f) in self.percentiles() {
            s.push_str(&format!("{d},{f:.2}\n"));
        }
        s
    }

    pub fn summary(&self) -> Summary {
        let n = self.sorted.len();
        let mean = if n == 0 {
            0.0
        } else {
            self.sorted.iter().map(|&v| v as f64).sum::<f64>() / n as f64
        };
        let var = if n < 2 {
            0.0
        } else {
            self.sorted
                .iter()
                .map(|&v| (v as f64 - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64
        };
        let q = |p| self.quantile(p).unwrap_or(0);
        Summary {
            n,
            mean,
            var,
            p50: q(0.5),
            p95: q(0.95),
            p99: q(0.99),
        }
    }
}

/// Sample mean, unbiased variance and tail quantiles of delays in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub p50: u64,
    pub p95: u64,
    pub p99: u64,
}
