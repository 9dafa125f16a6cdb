use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataplane::{DstMatch, FlowRule};
use crate::graph::Graph;
use crate::kernel::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub src: NodeId,
    pub dst: NodeId,
}

impl Demand {
    pub fn new(src: u32, dst: u32) -> Self {
        Demand {
            src: NodeId(src),
            dst: NodeId(dst),
        }
    }

    pub fn all_pairs(nodes: impl IntoIterator<Item = NodeId>) -> Vec<Demand> {
        let nodes: Vec<NodeId> = nodes.into_iter().collect();
        let mut out = Vec::new();
        for &s in &nodes {
            for &d in &nodes {
                if s != d {
                    out.push(Demand { src: s, dst: d });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoutePlan {
    /// node -> dst -> rule
    pub rules: BTreeMap<NodeId, BTreeMap<NodeId, FlowRule>>,
    pub unreachable: Vec<Demand>,
}

impl RoutePlan {
    pub fn next_hop(&self, node: NodeId, dst: NodeId) -> Option<NodeId> {
        self.rules.get(&node)?.get(&dst)?.forward_target()
    }

    pub fn node_rules(&self, node: NodeId) -> Vec<FlowRule> {
        self.rules
            .get(&node)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default()
    }

    /// Follows next hops from `src`; `None` on a drop, a missing rule or a loop.
    pub fn path(&self, src: NodeId, dst: NodeId) -> Option<Vec<NodeId>> {
        let mut path = vec![src];
        let mut cur = src;
        while cur != dst {
            cur = self.next_hop(cur, dst)?;
            if path.contains(&cur) {
                return None;
            }
            path.push(cur);
        }
        Some(path)
    }
}

/// Hop-count shortest-path next-hop rules for every node on every demand's
/// path (ties to the lowest next-hop id). Unreachable demands get a drop rule
/// at their source.
pub fn compute_paths(graph: &Graph, demands: &[Demand], width: u8) -> RoutePlan {
    let mut plan = RoutePlan::default();
    let mut hops_cache: BTreeMap<NodeId, BTreeMap<NodeId, NodeId>> = BTreeMap::new();
    for d in demands {
        if d.src == d.dst {
            continue;
        }
        let hops = hops_cache
            .entry(d.dst)
            .or_insert_with(|| graph.next_hops_toward(d.dst));
        let dm = DstMatch::exact(d.dst, width);
        if !hops.contains_key(&d.src) {
            plan.unreachable.push(*d);
            plan.rules
                .entry(d.src)
                .or_default()
                .entry(d.dst)
                .or_insert_with(|| FlowRule::drop(dm));
            continue;
        }
        let mut cur = d.src;
        while cur != d.dst {
            let nh = hops[&cur];
            plan.rules
                .entry(cur)
                .or_default()
                .insert(d.dst, FlowRule::forward(dm, nh));
            cur = nh;
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hub N1; N2 and N3 linked to N1 and to each other.
    fn prototype() -> Graph {
        let mut g = Graph::new();
        g.add_edge(NodeId(1), NodeId(2));
        g.add_edge(NodeId(1), NodeId(3));
        g.add_edge(NodeId(2), NodeId(3));
        g
    }

    #[test]
    fn direct_then_via_hub() {
        let mut g = prototype();
        let p = compute_paths(&g, &[Demand::new(2, 3)], 2);
        assert_eq!(
            p.path(NodeId(2), NodeId(3)).unwrap(),
            vec![NodeId(2), NodeId(3)]
        );
        g.remove_edge(NodeId(2), NodeId(3));
        let p = compute_paths(&g, &[Demand::new(2, 3)], 2);
        assert_eq!(
            p.path(NodeId(2), NodeId(3)).unwrap(),
            vec![NodeId(2), NodeId(1), NodeId(3)]
        );
    }

    #[test]
    fn unreachable_gets_drop() {
        let mut g = prototype();
        g.add_node(NodeId(4));
        let p = compute_paths(&g, &[Demand::new(2, 4)], 3);
        assert_eq!(p.unreachable, vec![Demand::new(2, 4)]);
        assert_eq!(
            p.rules[&NodeId(2)][&NodeId(4)].actions,
            vec![crate::dataplane::Action::Drop]
        );
    }
}
