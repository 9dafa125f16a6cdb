//! Partitioning the network into connected clusters, the cluster overlay,
//! and re-clustering policies.
//!
//! The partitioner grows clusters breadth-first from the lowest-id
//! unassigned node, so `s = 1` yields singletons (the pure-SDN extreme) and
//! `s = |nodes|` a single cluster (the pure-distributed extreme) on a
//! connected graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::dataplane::ClusterId;
use crate::graph::Graph;
use crate::kernel::NodeId;
use crate::time::SimTime;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("cluster size must be in 1..={nodes}, got {size}")]
    BadSize { size: usize, nodes: usize },
    #[error("graph has no nodes")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub clusters: BTreeMap<ClusterId, BTreeSet<NodeId>>,
    pub member_of: BTreeMap<NodeId, ClusterId>,
    /// Per cluster: (border node inside it, neighboring cluster).
    pub borders: BTreeMap<ClusterId, BTreeSet<(NodeId, ClusterId)>>,
    pub epoch: u32,
    /// Set when the input graph was disconnected (one group per component).
    pub disconnected: bool,
}

impl Partition {
    pub fn cluster_of(&self, n: NodeId) -> Option<ClusterId> {
        self.member_of.get(&n).copied()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn members(&self, c: ClusterId) -> &BTreeSet<NodeId> {
        &self.clusters[&c]
    }

    /// Disjoint cover, connected clusters, borders backed by real links.
    pub fn validate(&self, graph: &Graph) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for (c, members) in &self.clusters {
            if members.is_empty() {
                return Err(format!("{c} is empty"));
            }
            for &n in members {
                if !seen.insert(n) {
                    return Err(format!("{n} in more than one cluster"));
                }
                if self.member_of.get(&n) != Some(c) {
                    return Err(format!("member_of disagrees for {n}"));
                }
            }
            if !graph.induced(members).is_connected() {
                return Err(format!("{c} is not connected"));
            }
        }
        let all: BTreeSet<NodeId> = graph.nodes().collect();
        if seen != all {
            return Err("clusters do not cover the node set".into());
        }
        for (c, bs) in &self.borders {
            for &(b, nc) in bs {
                let ok = graph.neighbors(b).any(|v| self.cluster_of(v) == Some(nc));
                if self.cluster_of(b) != Some(*c) || !ok {
                    return Err(format!(
                        "border ({b},{nc}) of {c} has no inter-cluster link"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Seeded BFS growth: repeatedly take the lowest-id unassigned node and grow
/// breadth-first over unassigned nodes up to `size` members.
pub fn partition(graph: &Graph, size: usize) -> Result<Partition, ClusterError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    if size == 0 || size > n {
        return Err(ClusterError::BadSize { size, nodes: n });
    }
    let mut member_of = BTreeMap::new();
    let mut clusters = BTreeMap::new();
    let mut next = 0u32;
    for seed in graph.nodes() {
        if member_of.contains_key(&seed) {
            continue;
        }
        let cid = ClusterId(next);
        next += 1;
        let mut members = BTreeSet::from([seed]);
        member_of.insert(seed, cid);
        let mut q = VecDeque::from([seed]);
        'grow: while let Some(u) = q.pop_front() {
            for v in graph.neighbors(u) {
                if members.len() >= size {
                    break 'grow;
                }
                if member_of.contains_key(&v) {
                    continue;
                }
                member_of.insert(v, cid);
                members.insert(v);
                q.push_back(v);
            }
        }
        clusters.insert(cid, members);
    }
    let mut p = Partition {
        clusters,
        member_of,
        borders: BTreeMap::new(),
        epoch: 0,
        disconnected: !graph.is_connected(),
    };
    p.borders = overlay_graph(&p, graph).borders;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlay {
    pub graph: Graph<ClusterId>,
    pub borders: BTreeMap<ClusterId, BTreeSet<(NodeId, ClusterId)>>,
}

/// Clusters joined by at least one up link in `graph`.
pub fn overlay_graph(p: &Partition, graph: &Graph) -> Overlay {
    let mut og = Graph::new();
    let mut borders: BTreeMap<ClusterId, BTreeSet<(NodeId, ClusterId)>> = BTreeMap::new();
    for &c in p.clusters.keys() {
        og.add_node(c);
    }
    for (a, b) in graph.edges() {
        let (Some(ca), Some(cb)) = (p.cluster_of(a), p.cluster_of(b)) else {
            continue;
        };
        if ca != cb {
            og.add_edge(ca, cb);
            borders.entry(ca).or_default().insert((a, cb));
            borders.entry(cb).or_default().insert((b, ca));
        }
    }
    Overlay { graph: og, borders }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReclusterPolicy {
    Periodic {
        period_us: u64,
    },
    /// Recluster once any cluster has lost more than `theta` of its
    /// internal links.
    Threshold {
        theta: f64,
    },
}

impl ReclusterPolicy {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            ReclusterPolicy::Periodic { period_us: 0 } => Err("period_us must be > 0".into()),
            ReclusterPolicy::Threshold { theta } if !(0.0..=1.0).contains(&theta) => {
                Err("theta must be in [0,1]".into())
            }
            _ => Ok(()),
        }
    }

    /// Instants in `(0, horizon]` at which a periodic policy fires.
    pub fn periodic_instants(&self, horizon: SimTime) -> Vec<SimTime> {
        match *self {
            ReclusterPolicy::Periodic { period_us } => (1..)
                .map(|k| SimTime(k * period_us))
                .take_while(|t| *t <= horizon)
                .collect(),
            ReclusterPolicy::Threshold { .. } => Vec::new(),
        }
    }

    /// Threshold check against the links each cluster had at partition time.
    pub fn triggered(&self, p: &Partition, at_partition: &Graph, now: &Graph) -> bool {
        let ReclusterPolicy::Threshold { theta } = *self else {
            return false;
        };
        p.clusters.values().any(|m| {
            let before = at_partition.induced(m).edge_count();
            if before == 0 {
                return false;
            }
            let lost = at_partition
                .induced(m)
                .edges()
                .filter(|&(a, b)| !now.has_edge(a, b))
                .count();
            lost as f64 / before as f64 > theta
        })
    }
}

/// Re-partition on the current view, bumping the epoch.
pub fn recluster(prev: &Partition, graph: &Graph, size: usize) -> Result<Partition, ClusterError> {
    let mut p = partition(graph, size.min(graph.node_count()).max(1))?;
    p.epoch = prev.epoch + 1;
    Ok(p)
}
