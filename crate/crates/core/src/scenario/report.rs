//! Per-run records and their text forms.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::anomaly::Anomaly;
use super::config::Method;
use crate::controller::MsgKind;
use crate::dataplane::{DropCause, PathEntry};
use crate::kernel::{LinkKey, NodeId};
use crate::time::SimTime;

/// One failure's reaction delay, measured from detection to the moment the
/// repaired forwarding is in place.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaySample {
    pub trial: u32,
    pub method: Method,
    pub link: LinkKey,
    pub delay_us: u64,
    pub signal_up_us: u64,
    pub compute_us: u64,
    pub signal_down_us: u64,
    pub install_us: u64,
    /// Retransmissions on the recovery path (a count, not a duration).
    pub retries: u32,
}

impl DelaySample {
    pub fn components_sum(&self) -> u64 {
        self.signal_up_us + self.compute_us + self.signal_down_us + self.install_us
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensoredSample {
    pub trial: u32,
    pub method: Method,
    pub link: LinkKey,
    pub detected_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    NoRoute,
    TtlExpired,
    TagOverflow,
    ResubmitLimit,
    /// Sent onto a link that was down.
    LinkDown,
    Loss,
    /// Table miss at an SDN node (reported to the controller).
    Miss,
    /// Table miss where no controller is consulted.
    DeadEnd,
    /// Cluster method: the node's committed rules predate the partition
    /// epoch the packet was tagged under.
    StaleEpoch,
}

impl From<DropCause> for DropReason {
    fn from(c: DropCause) -> Self {
        match c {
            DropCause::NoRoute => DropReason::NoRoute,
            DropCause::TtlExpired => DropReason::TtlExpired,
            DropCause::TagOverflow => DropReason::TagOverflow,
            DropCause::ResubmitLimit => DropReason::ResubmitLimit,
        }
    }
}

impl DropReason {
    pub fn label(&self) -> &'static str {
        match self {
            DropReason::NoRoute => "no-route",
            DropReason::TtlExpired => "ttl-expired",
            DropReason::TagOverflow => "tag-overflow",
            DropReason::ResubmitLimit => "resubmit-limit",
            DropReason::LinkDown => "link-down",
            DropReason::Loss => "loss",
            DropReason::Miss => "miss",
            DropReason::DeadEnd => "dead-end",
            DropReason::StaleEpoch => "stale-epoch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fate {
    Delivered {
        at: SimTime,
    },
    Dropped {
        at: SimTime,
        node: NodeId,
        reason: DropReason,
    },
    InFlight,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub injected_at: SimTime,
    pub fate: Fate,
    pub path: Vec<PathEntry>,
}

impl PacketRecord {
    pub fn delivered(&self) -> bool {
        matches!(self.fate, Fate::Delivered { .. })
    }

    pub fn links(&self) -> Vec<LinkKey> {
        let mut out: Vec<LinkKey> = self
            .path
            .windows(2)
            .filter(|w| w[0].node != w[1].node)
            .map(|w| LinkKey::new(w[0].node, w[1].node))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidentCounts {
    pub failures: u64,
    pub detected: u64,
    pub completed: u64,
    pub censored: u64,
    /// Recovered with no controller message on its path.
    pub handled_locally: u64,
    pub reported: u64,
    /// Failure with no stored backup at the detecting node.
    pub uncovered: u64,
    /// Reliable messages that exhausted their retries.
    pub undeliverable: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overhead {
    pub heartbeats: u64,
    pub lsas: u64,
    pub controller: u64,
    pub by_kind: BTreeMap<MsgKind, u64>,
    pub retransmissions: u64,
}

impl Overhead {
    pub fn total(&self) -> u64 {
        self.heartbeats + self.lsas + self.controller
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub drops_by_reason: BTreeMap<String, u64>,
    pub anomalies: u64,
    pub overhead: Overhead,
    pub rule_high_water: BTreeMap<NodeId, usize>,
    pub table_overflows: u64,
    pub incidents: IncidentCounts,
    pub samples: Vec<DelaySample>,
    pub censored: Vec<CensoredSample>,
}

impl RunReport {
    pub fn conserved(&self) -> bool {
        self.generated == self.delivered + self.dropped + self.in_flight
    }

    pub fn delivery_ratio(&self) -> f64 {
        if self.generated == 0 {
            return 1.0;
        }
        self.delivered as f64 / self.generated as f64
    }

    pub fn max_occupancy(&self) -> usize {
        self.rule_high_water.values().copied().max().unwrap_or(0)
    }

    /// Folds another trial's report into this one.
    pub fn absorb(&mut self, o: &RunReport) {
        self.generated += o.generated;
        self.delivered += o.delivered;
        self.dropped += o.dropped;
        self.in_flight += o.in_flight;
        for (k, v) in &o.drops_by_reason {
            *self.drops_by_reason.entry(k.clone()).or_default() += v;
        }
        self.anomalies += o.anomalies;
        self.overhead.heartbeats += o.overhead.heartbeats;
        self.overhead.lsas += o.overhead.lsas;
        self.overhead.controller += o.overhead.controller;
        self.overhead.retransmissions += o.overhead.retransmissions;
        for (k, v) in &o.overhead.by_kind {
            *self.overhead.by_kind.entry(*k).or_default() += v;
        }
        for (n, v) in &o.rule_high_water {
            let e = self.rule_high_water.entry(*n).or_default();
            *e = (*e).max(*v);
        }
        self.table_overflows += o.table_overflows;
        let (a, b) = (&mut self.incidents, &o.incidents);
        a.failures += b.failures;
        a.detected += b.detected;
        a.completed += b.completed;
        a.censored += b.censored;
        a.handled_locally += b.handled_locally;
        a.reported += b.reported;
        a.uncovered += b.uncovered;
        a.undeliverable += b.undeliverable;
        self.samples.extend(o.samples.iter().cloned());
        self.censored.extend(o.censored.iter().cloned());
    }
}

pub const SAMPLE_HEADER: &str =
    "trial,method,delay_us,signal_up_us,compute_us,signal_down_us,install_us,retries";

pub fn samples_csv(samples: &[DelaySample]) -> String {
    let mut s = String::from(SAMPLE_HEADER);
    s.push('\n');
    for x in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            x.trial,
            x.method,
            x.delay_us,
            x.signal_up_us,
            x.compute_us,
            x.signal_down_us,
            x.install_us,
            x.retries
        );
    }
    s
}

pub fn anomalies_jsonl(anomalies: &[Anomaly]) -> String {
    anomalies
        .iter()
        .map(|a| serde_json::to_string(a).expect("anomalies serialize") + "\n")
        .collect()
}
