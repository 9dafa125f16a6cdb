//! Controller reaction to a link report: update the believed graph, recompute
//! and diff against what the nodes hold.

use std::collections::BTreeMap;

use crate::dataplane::{FlowRule, RuleKey};
use crate::graph::Graph;
use crate::kernel::{LinkKey, NodeId};

use super::routing::{compute_paths, Demand};

pub type NodeTables = BTreeMap<NodeId, BTreeMap<RuleKey, FlowRule>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleDiff {
    pub installs: BTreeMap<NodeId, Vec<FlowRule>>,
    pub removes: BTreeMap<NodeId, Vec<RuleKey>>,
}

impl RuleDiff {
    pub fn is_empty(&self) -> bool {
        self.installs.is_empty() && self.removes.is_empty()
    }

    /// Messages needed to push this diff: one install and one remove per node at most.
    pub fn message_count(&self) -> usize {
        self.installs.len() + self.removes.len()
    }
}

/// Returns whether the graph changed.
pub fn apply_link_report(graph: &mut Graph, link: LinkKey, up: bool) -> bool {
    if graph.has_edge(link.0, link.1) == up {
        return false;
    }
    if up {
        graph.add_edge(link.0, link.1);
    } else {
        graph.remove_edge(link.0, link.1);
    }
    true
}

/// Rules to add and keys to remove to go from `old` to `new`. With `full`
/// every rule of `new` is resent.
pub fn diff_table(
    old: &BTreeMap<RuleKey, FlowRule>,
    new: &BTreeMap<RuleKey, FlowRule>,
    full: bool,
) -> (Vec<FlowRule>, Vec<RuleKey>) {
    let adds = new
        .values()
        .filter(|r| full || old.get(&r.key()) != Some(*r))
        .cloned()
        .collect();
    let removes = old
        .keys()
        .filter(|k| !new.contains_key(k))
        .copied()
        .collect();
    (adds, removes)
}

pub fn routing_tables(graph: &Graph, demands: &[Demand], width: u8) -> NodeTables {
    let plan = compute_paths(graph, demands, width);
    graph
        .nodes()
        .map(|n| {
            (
                n,
                plan.node_rules(n)
                    .into_iter()
                    .map(|r| (r.key(), r))
                    .collect(),
            )
        })
        .collect()
}

/// Pure SDN handling of one report. `installed` is updated to the new tables.
pub fn handle_link_report(
    graph: &mut Graph,
    installed: &mut NodeTables,
    link: LinkKey,
    up: bool,
    demands: &[Demand],
    width: u8,
) -> RuleDiff {
    let mut diff = RuleDiff::default();
    if !apply_link_report(graph, link, up) {
        return diff;
    }
    let empty = BTreeMap::new();
    for (n, new) in routing_tables(graph, demands, width) {
        let (adds, removes) = diff_table(installed.get(&n).unwrap_or(&empty), &new, false);
        if !adds.is_empty() {
            diff.installs.insert(n, adds);
        }
        if !removes.is_empty() {
            diff.removes.insert(n, removes);
        }
        installed.insert(n, new);
    }
    diff
}
