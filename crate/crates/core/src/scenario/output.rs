//! File contents written for a run or a comparison. Rendering is pure so
//! the same seed always yields the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::config::{Method, ScenarioConfig};
use super::report::{samples_csv, RunReport};
use super::trials::{Summary, TrialSet};

#[derive(Serialize)]
struct ReportFile<'a> {
    scenario: &'a str,
    method: Method,
    seed: u64,
    trials: u32,
    conserved: bool,
    delivery_ratio: f64,
    delay: Summary,
    #[serde(flatten)]
    report: &'a RunReport,
}

/// `samples.csv`, `cdf.csv`, `report.json`, `anomalies.jsonl`, `trace.jsonl`.
pub fn render_run(cfg: &ScenarioConfig, set: &TrialSet) -> BTreeMap<String, String> {
    let cdf = set.cdf();
    let file = ReportFile {
        scenario: &cfg.name,
        method: set.method,
        seed: set.seed,
        trials: set.trials,
        conserved: set.report.conserved(),
        delivery_ratio: set.report.delivery_ratio(),
        delay: cdf.summary(),
        report: &set.report,
    };
    let mut out = BTreeMap::new();
    out.insert("samples.csv".into(), samples_csv(&set.report.samples));
    out.insert("cdf.csv".into(), cdf.to_csv());
    out.insert(
        "report.json".into(),
        serde_json::to_string_pretty(&file).expect("report serializes") + "\n",
    );
    out.insert(
        "anomalies.jsonl".into(),
        set.anomalies
            .iter()
            .map(|a| serde_json::to_string(a).expect("anomaly serializes") + "\n")
            .collect(),
    );
    out.insert(
        "trace.jsonl".into(),
        set.trace
            .iter()
            .map(|t| serde_json::to_string(t).expect("trace serializes") + "\n")
            .collect(),
    );
    out
}

pub const COMPARE_HEADER: &str =
    "method,samples,mean_us,var_us2,p50_us,p95_us,p99_us,delivery_ratio,messages,controller_messages,max_occupancy,anomalies";

/// One row per method.
pub fn compare_csv(sets: &[TrialSet]) -> String {
    let mut s = String::from(COMPARE_HEADER);
    s.push('\n');
    for set in sets {
        let m = set.cdf().summary();
        let r = &set.report;
        let _ = writeln!(
            s,
            "{},{},{:.1},{:.1},{},{},{},{:.4},{},{},{},{}",
            set.method,
            m.n,
            m.mean,
            m.var,
            m.p50,
            m.p95,
            m.p99,
            r.delivery_ratio(),
            r.overhead.total(),
            r.overhead.controller,
            r.max_occupancy(),
            r.anomalies
        );
    }
    s
}
