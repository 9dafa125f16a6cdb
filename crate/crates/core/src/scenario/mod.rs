//! Scenario description, built-in scenarios, trial driver and reports.

pub mod anomaly;
pub mod builtin;
pub mod config;
pub mod fuzz;
pub mod gen;
pub mod output;
pub mod report;
pub mod trials;

pub use anomaly::{detect_loops, Anomaly, AnomalyKind};
pub use config::{
    ConfigErrors, ConfigIssue, DemandSpec, EventSpec, Knobs, LinkSpec, Method, ScenarioConfig,
    TopologySpec, TrafficSpec,
};
pub use report::{
    anomalies_jsonl, samples_csv, CensoredSample, DelaySample, DropReason, Fate, IncidentCounts,
    Overhead, PacketRecord, RunReport,
};
pub use trials::{run_trial, run_trials, trial_seed, Cdf, Summary, TrialSet};

/// Adds `event` to `cfg`, leaving it unchanged if the result would not validate.
pub fn inject(cfg: &mut ScenarioConfig, event: EventSpec) -> Result<(), ConfigErrors> {
    cfg.events.push(event);
    if let Err(e) = cfg.validate() {
        cfg.events.pop();
        return Err(e);
    }
    cfg.events.sort_by_key(|e| e.at());
    Ok(())
}
