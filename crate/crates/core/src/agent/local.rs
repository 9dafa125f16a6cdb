//! Rules a node computes for itself from its link-state database.

use std::collections::{BTreeMap, BTreeSet};

use crate::dataplane::{
    Action, ClusterId, DstMatch, FlowRule, FlowTable, RuleKind, RuleOrigin, Tag, TagMatch,
};
use crate::graph::Graph;
use crate::kernel::NodeId;

/// Shortest-path rules toward every destination in `graph`.
///
/// Destinations inside this node's distributed region (the component of
/// `distributed` containing `me`) are routed without leaving the region;
/// everything else uses the whole graph. No path gives a drop rule.
pub fn distributed_rules(
    me: NodeId,
    graph: &Graph,
    distributed: &BTreeSet<NodeId>,
    width: u8,
) -> Vec<FlowRule> {
    let region_graph = graph.induced(distributed);
    let region: BTreeSet<NodeId> = if region_graph.contains(me) {
        region_graph.bfs(me).into_keys().collect()
    } else {
        BTreeSet::from([me])
    };
    let region_graph = graph.induced(&region);
    let mut out = Vec::new();
    for dst in graph.nodes() {
        if dst == me {
            continue;
        }
        let g = if region.contains(&dst) {
            &region_graph
        } else {
            graph
        };
        let dm = DstMatch::exact(dst, width);
        let rule = match g.next_hops_toward(dst).get(&me) {
            Some(&nh) => FlowRule::forward(dm, nh),
            None => FlowRule::drop(dm),
        };
        out.push(rule.local());
    }
    out
}

/// Rules for cluster-hierarchical forwarding at `me`:
/// intra-cluster destinations on an empty stack, a pop at ingress to the own
/// cluster, and for every other cluster a hop toward the nearest border
/// facing it.
pub fn cluster_rules(
    me: NodeId,
    member_of: &BTreeMap<NodeId, ClusterId>,
    believed: &Graph,
    width: u8,
) -> Vec<FlowRule> {
    let Some(&own) = member_of.get(&me) else {
        return Vec::new();
    };
    let members: BTreeSet<NodeId> = member_of
        .iter()
        .filter(|(_, c)| **c == own)
        .map(|(n, _)| *n)
        .collect();
    let intra = believed.induced(&members);
    let mut out = Vec::new();

    for &dst in &members {
        if dst == me {
            continue;
        }
        let dm = DstMatch::exact(dst, width);
        let rule = match intra.next_hops_toward(dst).get(&me) {
            Some(&nh) => FlowRule::forward(dm, nh),
            None => FlowRule::drop(dm),
        };
        out.push(rule.with_tag(TagMatch::Empty).local());
    }
    let any = DstMatch::any(width);
    out.push(
        FlowRule::primary(any, vec![Action::PopTag])
            .with_tag(TagMatch::Top(Tag::Cluster(own)))
            .local(),
    );

    let others: BTreeSet<ClusterId> = member_of.values().copied().filter(|c| *c != own).collect();
    for c in others {
        let facing = |n: NodeId| believed.neighbors(n).find(|v| member_of.get(v) == Some(&c));
        let borders: BTreeSet<NodeId> = members
            .iter()
            .copied()
            .filter(|&n| facing(n).is_some())
            .collect();
        let next = if borders.contains(&me) {
            facing(me)
        } else {
            intra.next_hops_toward_set(&borders).get(&me).copied()
        };
        let actions = match next {
            Some(nh) => vec![Action::Forward(nh)],
            None => vec![Action::Drop],
        };
        out.push(
            FlowRule::primary(any, actions)
                .with_tag(TagMatch::Top(Tag::Cluster(c)))
                .local(),
        );
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BackupActivation {
    pub covered: Vec<NodeId>,
    pub uncovered: Vec<NodeId>,
}

impl BackupActivation {
    pub fn fully_covered(&self) -> bool {
        self.uncovered.is_empty()
    }
}

/// Which controller-routed destinations through `neighbor` have a stored
/// backup for the loss of that link. Nothing is written: the backups take
/// effect through their predicates at the next lookup.
pub fn activate_backup(table: &FlowTable, neighbor: NodeId) -> BackupActivation {
    let mut protected = BTreeSet::new();
    for r in table.rules() {
        if r.kind == RuleKind::Backup && r.pred.is_some_and(|p| p.neighbor == neighbor && p.down) {
            if let Some(d) = r.dst.exact_id() {
                protected.insert(d);
            }
        }
    }
    let mut act = BackupActivation::default();
    let mut seen = BTreeSet::new();
    for r in table.rules() {
        if r.kind != RuleKind::Primary
            || r.origin != RuleOrigin::Controller
            || r.forward_target() != Some(neighbor)
        {
            continue;
        }
        let Some(d) = r.dst.exact_id() else { continue };
        if !seen.insert(d) {
            continue;
        }
        if protected.contains(&d) {
            act.covered.push(d);
        } else {
            act.uncovered.push(d);
        }
    }
    act
}
