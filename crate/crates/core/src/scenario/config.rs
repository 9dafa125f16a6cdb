//! Scenario configuration: JSON in, itemized errors out.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::clustering::ReclusterPolicy;
use crate::controller::Demand;
use crate::kernel::mobility::RandomWaypoint;
use crate::kernel::{LatencyDist, LinkAttr, NodeId, TopologyView};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PureSdn,
    #[serde(alias = "pure-distributed")]
    PureDist,
    Migration,
    Cluster,
    Backup,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::PureSdn,
        Method::PureDist,
        Method::Migration,
        Method::Cluster,
        Method::Backup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PureSdn => "pure-sdn",
            Method::PureDist => "pure-dist",
            Method::Migration => "migration",
            Method::Cluster => "cluster",
            Method::Backup => "backup",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pure-sdn" => Ok(Method::PureSdn),
            "pure-dist" | "pure-distributed" => Ok(Method::PureDist),
            "migration" => Ok(Method::Migration),
            "cluster" => Ok(Method::Cluster),
            "backup" => Ok(Method::Backup),
            _ => Err(format!("unknown method {s:?} (expected one of pure-sdn, pure-dist, migration, cluster, backup)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: u32,
    pub b: u32,
    #[serde(default = "default_link_latency")]
    pub latency_us: u64,
    #[serde(default)]
    pub loss: f64,
}

fn default_link_latency() -> u64 {
    1_000
}

impl LinkSpec {
    pub fn new(a: u32, b: u32) -> Self {
        LinkSpec {
            a,
            b,
            latency_us: default_link_latency(),
            loss: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: Vec<u32>,
    pub controller: u32,
    pub links: Vec<LinkSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSpec {
    /// Only `"all-pairs"` is accepted.
    Named(String),
    List(Vec<[u32; 2]>),
}

impl Default for DemandSpec {
    fn default() -> Self {
        DemandSpec::Named("all-pairs".into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSpec {
    /// Every demand injects one packet per interval.
    pub interval_us: u64,
    pub start_us: u64,
    pub stop_us: Option<u64>,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec {
            interval_us: 100_000,
            start_us: 0,
            stop_us: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EventSpec {
    LinkDown {
        at_us: u64,
        link: [u32; 2],
    },
    LinkUp {
        at_us: u64,
        link: [u32; 2],
    },
    /// Every node loses its control link.
    ControllerDown {
        at_us: u64,
    },
    ControllerUp {
        at_us: u64,
    },
    ControlLinkDown {
        at_us: u64,
        node: u32,
    },
    ControlLinkUp {
        at_us: u64,
        node: u32,
    },
    Migrate {
        at_us: u64,
        node: u32,
    },
    Resync {
        at_us: u64,
        node: u32,
    },
    Recluster {
        at_us: u64,
    },
}

impl EventSpec {
    pub fn at(&self) -> SimTime {
        SimTime(match *self {
            EventSpec::LinkDown { at_us, .. }
            | EventSpec::LinkUp { at_us, .. }
            | EventSpec::ControllerDown { at_us }
            | EventSpec::ControllerUp { at_us }
            | EventSpec::ControlLinkDown { at_us, .. }
            | EventSpec::ControlLinkUp { at_us, .. }
            | EventSpec::Migrate { at_us, .. }
            | EventSpec::Resync { at_us, .. }
            | EventSpec::Recluster { at_us } => at_us,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    pub heartbeat_period_us: u64,
    pub heartbeat_misses: u32,
    pub keepalive_period_us: u64,
    pub keepalive_misses: u32,
    pub stability_window_us: u64,
    pub pre_execution: bool,
    pub discovery_round_us: u64,
    pub sync_period_us: u64,
    /// Flooding scope in hops; null floods the whole network.
    pub sync_scope: Option<u32>,
    /// Target cluster size; null picks min(3, nodes).
    pub cluster_size: Option<usize>,
    /// Backup rules per node; null is unlimited.
    pub backup_budget: Option<usize>,
    /// Tag stack depth; null uses the cluster count.
    pub max_tag_depth: Option<usize>,
    pub control_latency: LatencyDist,
    pub control_loss: f64,
    /// Retransmission timeout; null is three times the median latency.
    pub rto_us: Option<u64>,
    pub max_retries: u32,
    pub a_proc_us: u64,
    pub t_install_us: u64,
    pub c_proc_us: u64,
    pub table_capacity: usize,
    /// Hop limit; null is twice the node count.
    pub ttl: Option<u32>,
    pub horizon_us: u64,
    pub trials: u32,
    pub recluster: Option<ReclusterPolicy>,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            heartbeat_period_us: 100_000,
            heartbeat_misses: 3,
            keepalive_period_us: 1_000_000,
            keepalive_misses: 3,
            stability_window_us: 5_000_000,
            pre_execution: true,
            discovery_round_us: 2_000_000,
            sync_period_us: 1_000_000,
            sync_scope: None,
            cluster_size: None,
            backup_budget: Some(8),
            max_tag_depth: None,
            control_latency: LatencyDist::default(),
            control_loss: 0.05,
            rto_us: None,
            max_retries: 3,
            a_proc_us: 2_000,
            t_install_us: 1_000,
            c_proc_us: 1_000,
            table_capacity: 1024,
            ttl: None,
            horizon_us: 30_000_000,
            trials: 1,
            recluster: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub method: Method,
    pub topology: TopologySpec,
    #[serde(default)]
    pub demands: DemandSpec,
    #[serde(default)]
    pub traffic: TrafficSpec,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub mobility: Option<RandomWaypoint>,
    #[serde(default)]
    pub knobs: Knobs,
}

/// One problem with a config, located by a dotted path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{} config error(s):\n{}", .0.len(), .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

fn issue(path: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        path: path.into(),
        message: message.into(),
    }
}

const TOP_KEYS: &[&str] = &[
    "name", "seed", "method", "topology", "demands", "traffic", "events", "mobility", "knobs",
];
const REQUIRED: &[&str] = &["method", "topology"];

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigErrors> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| ConfigErrors(vec![issue("<json>", e.to_string())]))?;
        Self::from_value(v)
    }

    /// Collects every unknown key, missing field, type error and range
    /// violation rather than stopping at the first.
    pub fn from_value(v: Value) -> Result<Self, ConfigErrors> {
        let Value::Object(top) = v else {
            return Err(ConfigErrors(vec![issue(
                "<root>",
                "expected a JSON object",
            )]));
        };
        let mut issues = Vec::new();
        for k in top.keys() {
            if !TOP_KEYS.contains(&k.as_str()) {
                issues.push(issue(k.clone(), "unknown key"));
            }
        }
        for k in REQUIRED {
            if !top.contains_key(*k) {
                issues.push(issue(*k, "missing required field"));
            }
        }
        check_fields(&top, &mut issues);
        if let Some(Value::Object(knobs)) = top.get("knobs") {
            let keys = knob_keys();
            let keys: Vec<&str> = keys.iter().map(|s| s.as_str()).collect();
            for k in knobs.keys() {
                if !keys.contains(&k.as_str()) {
                    issues.push(issue(format!("knobs.{k}"), "unknown key"));
                }
            }
            for (k, val) in knobs {
                if keys.contains(&k.as_str()) {
                    let one = Map::from_iter([(k.clone(), val.clone())]);
                    if let Err(e) = serde_json::from_value::<Knobs>(Value::Object(one)) {
                        issues.push(issue(format!("knobs.{k}"), e.to_string()));
                    }
                }
            }
        }
        if !issues.is_empty() {
            return Err(ConfigErrors(issues));
        }
        let cfg: ScenarioConfig = serde_json::from_value(Value::Object(top))
            .map_err(|e| ConfigErrors(vec![issue("<config>", e.to_string())]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut out = Vec::new();
        let t = &self.topology;
        let nodes: BTreeSet<u32> = t.nodes.iter().copied().collect();
        if nodes.is_empty() {
            out.push(issue("topology.nodes", "at least one node required"));
        }
        if nodes.len() != t.nodes.len() {
            out.push(issue("topology.nodes", "duplicate node id"));
        }
        if nodes.contains(&t.controller) {
            out.push(issue(
                "topology.controller",
                "controller id must differ from every data node",
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, l) in t.links.iter().enumerate() {
            let p = format!("topology.links[{i}]");
            for end in [l.a, l.b] {
                if !nodes.contains(&end) {
                    out.push(issue(&p, format!("unknown node {end}")));
                }
            }
            if l.a == l.b {
                out.push(issue(&p, "self-loop"));
            }
            if !seen.insert((l.a.min(l.b), l.a.max(l.b))) {
                out.push(issue(&p, "duplicate link"));
            }
            if l.latency_us == 0 {
                out.push(issue(format!("{p}.latency_us"), "must be > 0"));
            }
            if !(0.0..1.0).contains(&l.loss) {
                out.push(issue(
                    format!("{p}.loss"),
                    format!("loss {} outside [0, 1)", l.loss),
                ));
            }
        }
        match &self.demands {
            DemandSpec::Named(n) if n != "all-pairs" => {
                out.push(issue("demands", format!("unknown demand set {n:?}")))
            }
            DemandSpec::List(v) => {
                for (i, [s, d]) in v.iter().enumerate() {
                    if !nodes.contains(s) || !nodes.contains(d) {
                        out.push(issue(format!("demands[{i}]"), "unknown node"));
                    }
                    if s == d {
                        out.push(issue(format!("demands[{i}]"), "source equals destination"));
                    }
                }
            }
            _ => {}
        }
        if self.traffic.interval_us == 0 {
            out.push(issue("traffic.interval_us", "must be > 0"));
        }
        for (i, e) in self.events.iter().enumerate() {
            let p = format!("events[{i}]");
            match e {
                EventSpec::LinkDown { link, .. } | EventSpec::LinkUp { link, .. } => {
                    if !seen.contains(&(link[0].min(link[1]), link[0].max(link[1]))) {
                        out.push(issue(&p, format!("unknown link {}-{}", link[0], link[1])));
                    }
                }
                EventSpec::ControlLinkDown { node, .. }
                | EventSpec::ControlLinkUp { node, .. }
                | EventSpec::Migrate { node, .. }
                | EventSpec::Resync { node, .. }
                    if !nodes.contains(node) =>
                {
                    out.push(issue(&p, format!("unknown node {node}")));
                }
                _ => {}
            }
            if e.at().as_micros() > self.knobs.horizon_us {
                out.push(issue(&p, "scheduled after the horizon"));
            }
        }
        if let Some(m) = &self.mobility {
            if let Err(e) = m.validate() {
                out.push(issue("mobility", e));
            }
        }
        self.knobs.check(nodes.len(), &mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(out))
        }
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.topology.nodes.iter().map(|&n| NodeId(n)).collect();
        v.sort();
        v
    }

    pub fn demands(&self) -> Vec<Demand> {
        match &self.demands {
            DemandSpec::Named(_) => Demand::all_pairs(self.node_ids()),
            DemandSpec::List(v) => v.iter().map(|[s, d]| Demand::new(*s, *d)).collect(),
        }
    }

    /// Data links plus one control link per node.
    pub fn topology_view(&self) -> TopologyView {
        let mut t = TopologyView::new();
        for n in self.node_ids() {
            t.add_node(n);
        }
        let c = NodeId(self.topology.controller);
        t.set_controller(c);
        for l in &self.topology.links {
            let attr = LinkAttr {
                loss_prob: l.loss,
                ..LinkAttr::data(SimTime(l.latency_us))
            };
            t.add_link(NodeId(l.a), NodeId(l.b), attr)
                .expect("validated link");
        }
        let ctl = LinkAttr::control(self.knobs.control_latency.median(), self.knobs.control_loss);
        for n in self.node_ids() {
            t.add_link(n, c, ctl.clone())
                .expect("validated control link");
        }
        t
    }

    /// Same nodes and links; used to refuse comparisons across topologies.
    pub fn same_topology(&self, other: &ScenarioConfig) -> bool {
        let norm = |t: &TopologySpec| {
            let mut links: Vec<(u32, u32, u64)> = t
                .links
                .iter()
                .map(|l| (l.a.min(l.b), l.a.max(l.b), l.latency_us))
                .collect();
            links.sort();
            let mut nodes = t.nodes.clone();
            nodes.sort();
            (nodes, t.controller, links)
        };
        norm(&self.topology) == norm(&other.topology)
    }
}

impl Knobs {
    fn check(&self, n: usize, out: &mut Vec<ConfigIssue>) {
        let mut pos = |name: &str, v: u64| {
            if v == 0 {
                out.push(issue(format!("knobs.{name}"), "must be > 0"));
            }
        };
        pos("heartbeat_period_us", self.heartbeat_period_us);
        pos("heartbeat_misses", self.heartbeat_misses as u64);
        pos("keepalive_period_us", self.keepalive_period_us);
        pos("keepalive_misses", self.keepalive_misses as u64);
        pos("sync_period_us", self.sync_period_us);
        pos("discovery_round_us", self.discovery_round_us);
        pos("t_install_us", self.t_install_us);
        pos("table_capacity", self.table_capacity as u64);
        pos("horizon_us", self.horizon_us);
        pos("trials", self.trials as u64);
        if self.sync_scope == Some(0) {
            out.push(issue("knobs.sync_scope", "scope must be >= 1 hop"));
        }
        if let Some(s) = self.cluster_size {
            if s == 0 || s > n.max(1) {
                out.push(issue(
                    "knobs.cluster_size",
                    format!("cluster size {s} outside [1, {n}]"),
                ));
            }
        }
        if self.max_tag_depth == Some(0) {
            out.push(issue("knobs.max_tag_depth", "must be >= 1"));
        }
        if let Err(e) = self.control_latency.validate() {
            out.push(issue("knobs.control_latency", e));
        }
        if !(0.0..1.0).contains(&self.control_loss) {
            out.push(issue(
                "knobs.control_loss",
                format!("loss {} outside [0, 1)", self.control_loss),
            ));
        }
        if self.rto_us == Some(0) {
            out.push(issue("knobs.rto_us", "must be > 0"));
        }
        if self.ttl == Some(0) {
            out.push(issue("knobs.ttl", "must be > 0"));
        }
        if let Some(p) = &self.recluster {
            if let Err(e) = p.validate() {
                out.push(issue("knobs.recluster", e));
            }
        }
    }

    pub fn rto(&self) -> SimTime {
        self.rto_us
            .map(SimTime)
            .unwrap_or(self.control_latency.median() * 3)
    }
}

fn knob_keys() -> Vec<String> {
    match serde_json::to_value(Knobs::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => unreachable!("knobs serialize to an object"),
    }
}

/// Deserializes each known top-level section on its own so a type error in
/// one does not hide errors in the others.
fn check_fields(top: &Map<String, Value>, issues: &mut Vec<ConfigIssue>) {
    for &k in TOP_KEYS {
        let Some(v) = top.get(k) else { continue };
        let r = match k {
            "name" => serde_json::from_value::<String>(v.clone()).map(drop),
            "seed" => serde_json::from_value::<u64>(v.clone()).map(drop),
            "method" => serde_json::from_value::<Method>(v.clone()).map(drop),
            "topology" => serde_json::from_value::<TopologySpec>(v.clone()).map(drop),
            "demands" => serde_json::from_value::<DemandSpec>(v.clone()).map(drop),
            "traffic" => serde_json::from_value::<TrafficSpec>(v.clone()).map(drop),
            "events" => match v {
                Value::Array(items) => {
                    for (i, e) in items.iter().enumerate() {
                        if let Err(err) = serde_json::from_value::<EventSpec>(e.clone()) {
                            issues.push(issue(format!("events[{i}]"), err.to_string()));
                        }
                    }
                    Ok(())
                }
                _ => serde_json::from_value::<Vec<EventSpec>>(v.clone()).map(drop),
            },
            "mobility" => serde_json::from_value::<Option<RandomWaypoint>>(v.clone()).map(drop),
            // checked key by key by the caller
            "knobs" => match v {
                Value::Object(_) => Ok(()),
                _ => serde_json::from_value::<Knobs>(v.clone()).map(drop),
            },
            _ => Ok(()),
        };
        if let Err(e) = r {
            issues.push(issue(k, e.to_string()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    #[test]
    fn builtins_round_trip() {
        for name in builtin::NAMES {
            let cfg = builtin::get(name).unwrap();
            cfg.validate().unwrap();
            let text = cfg.to_json_pretty();
            let back = ScenarioConfig::from_json_str(&text).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn loss_out_of_range_names_field() {
        let mut v = serde_json::to_value(builtin::get("prototype").unwrap()).unwrap();
        v["knobs"]["control_loss"] = serde_json::json!(1.5);
        let err = ScenarioConfig::from_value(v).unwrap_err();
        assert!(
            err.0.iter().any(|i| i.path == "knobs.control_loss"),
            "{err}"
        );
    }

    #[test]
    fn zero_cluster_size_rejected() {
        let mut v = serde_json::to_value(builtin::get("line6").unwrap()).unwrap();
        v["knobs"]["cluster_size"] = serde_json::json!(0);
        let err = ScenarioConfig::from_value(v).unwrap_err();
        assert!(
            err.0.iter().any(|i| i.path == "knobs.cluster_size"),
            "{err}"
        );
    }

    #[test]
    fn every_problem_itemized() {
        let mut v = serde_json::to_value(builtin::get("prototype").unwrap()).unwrap();
        v["colour"] = serde_json::json!("blue");
        v["knobs"]["tau"] = serde_json::json!(5);
        v["knobs"]["heartbeat_misses"] = serde_json::json!("three");
        v["traffic"]["burst"] = serde_json::json!(1);
        v.as_object_mut().unwrap().remove("method");
        let err = ScenarioConfig::from_value(v).unwrap_err();
        let paths: Vec<_> = err.0.iter().map(|i| i.path.as_str()).collect();
        for p in [
            "colour",
            "knobs.tau",
            "knobs.heartbeat_misses",
            "traffic",
            "method",
        ] {
            assert!(paths.contains(&p), "{p} missing from {paths:?}");
        }
    }

    #[test]
    fn range_errors_all_reported() {
        let mut cfg = builtin::get("prototype").unwrap();
        cfg.knobs.control_loss = 2.0;
        cfg.knobs.heartbeat_period_us = 0;
        cfg.topology.links.push(LinkSpec::new(1, 9));
        let err = cfg.validate().unwrap_err();
        assert!(err.0.len() >= 3, "{err}");
    }

    #[test]
    fn method_alias() {
        assert_eq!(
            "pure-distributed".parse::<Method>().unwrap(),
            Method::PureDist
        );
        let m: Method = serde_json::from_str("\"pure-distributed\"").unwrap();
        assert_eq!(m, Method::PureDist);
    }
}
