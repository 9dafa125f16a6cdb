//! Budgeted placement of state-conditioned backup rules.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::routing::{Demand, RoutePlan};
use crate::dataplane::{Action, DstMatch, FlowRule, RuleKind, Tag, TagMatch, PRIO_DETOUR};
use crate::graph::Graph;
use crate::kernel::{LinkKey, NodeId};

/// Backup rules allowed per node. `None` is unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Budget(pub Option<usize>);

impl Budget {
    pub const UNLIMITED: Budget = Budget(None);

    pub fn rules(n: usize) -> Self {
        Budget(Some(n))
    }

    pub fn allows(&self, count: usize) -> bool {
        self.0.is_none_or(|b| count < b)
    }
}

/// Protect traffic for `dst` at `node` against failure of `link`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackupCandidate {
    pub node: NodeId,
    pub link: LinkKey,
    pub dst: NodeId,
    /// Demands whose primary path crosses `link` from `node` toward `dst`.
    pub demands: Vec<Demand>,
    /// First hop of the alternate path, `None` if the link is a bridge for `dst`.
    pub alternate: Option<NodeId>,
}

impl BackupCandidate {
    pub fn weight(&self) -> usize {
        self.demands.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BackupPlan {
    pub budget: Budget,
    /// node -> predicate-carrying backup rules, at most `budget` each
    pub rules: BTreeMap<NodeId, Vec<FlowRule>>,
    /// node -> detour transit rules backing labelled backups
    pub transit: BTreeMap<NodeId, Vec<FlowRule>>,
    /// protected link -> restored (node, dst) pairs
    pub coverage: BTreeMap<LinkKey, BTreeSet<(NodeId, NodeId)>>,
    pub selected: Vec<BackupCandidate>,
    pub uncoverable: Vec<BackupCandidate>,
}

impl BackupPlan {
    pub fn covered_demands(&self) -> usize {
        self.selected.iter().map(|c| c.weight()).sum()
    }

    pub fn rule_count(&self, node: NodeId) -> usize {
        self.rules.get(&node).map_or(0, |v| v.len())
    }

    /// All rules (backup and transit) to install at `node`.
    pub fn node_rules(&self, node: NodeId) -> Vec<FlowRule> {
        let mut out = self.rules.get(&node).cloned().unwrap_or_default();
        out.extend(self.transit.get(&node).into_iter().flatten().cloned());
        out
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.transit.is_empty()
    }
}

/// Detour label reserved for a link.
pub fn detour_label(link: LinkKey) -> Tag {
    Tag::Detour((link.0 .0 << 16) | (link.1 .0 & 0xffff))
}

/// Every (node, link, dst) triple some demand's primary path depends on, with
/// its alternate first hop on the graph without that link.
pub fn backup_candidates(
    graph: &Graph,
    primaries: &RoutePlan,
    demands: &[Demand],
) -> Vec<BackupCandidate> {
    let mut by_key: BTreeMap<(NodeId, LinkKey, NodeId), Vec<Demand>> = BTreeMap::new();
    for d in demands {
        let Some(path) = primaries.path(d.src, d.dst) else {
            continue;
        };
        for w in path.windows(2) {
            by_key
                .entry((w[0], LinkKey::new(w[0], w[1]), d.dst))
                .or_default()
                .push(*d);
        }
    }
    let mut alt_cache: BTreeMap<(LinkKey, NodeId), BTreeMap<NodeId, NodeId>> = BTreeMap::new();
    by_key
        .into_iter()
        .map(|((node, link, dst), mut demands)| {
            demands.sort();
            demands.dedup();
            let hops = alt_cache
                .entry((link, dst))
                .or_insert_with(|| without(graph, link).next_hops_toward(dst));
            BackupCandidate {
                node,
                link,
                dst,
                demands,
                alternate: hops.get(&node).copied(),
            }
        })
        .collect()
}

fn without(graph: &Graph, link: LinkKey) -> Graph {
    let mut g = graph.clone();
    g.remove_edge(link.0, link.1);
    g
}

/// Greedy per-node selection: most demands protected first, ties to the lower
/// link then the lower destination.
pub fn compute_backup_rules(
    graph: &Graph,
    primaries: &RoutePlan,
    demands: &[Demand],
    budget: Budget,
    width: u8,
) -> BackupPlan {
    let mut plan = BackupPlan {
        budget,
        ..Default::default()
    };
    let mut per_node: BTreeMap<NodeId, Vec<BackupCandidate>> = BTreeMap::new();
    for c in backup_candidates(graph, primaries, demands) {
        if c.alternate.is_none() {
            plan.uncoverable.push(c);
        } else {
            per_node.entry(c.node).or_default().push(c);
        }
    }
    let mut transit: BTreeMap<NodeId, BTreeMap<(TagMatch, NodeId), FlowRule>> = BTreeMap::new();
    let mut trees: BTreeMap<NodeId, BTreeMap<NodeId, NodeId>> = BTreeMap::new();
    for (node, mut cands) in per_node {
        cands.sort_by(|a, b| {
            b.weight()
                .cmp(&a.weight())
                .then(a.link.cmp(&b.link))
                .then(a.dst.cmp(&b.dst))
        });
        for c in cands {
            if !budget.allows(plan.rule_count(node)) {
                break;
            }
            let alt = c.alternate.expect("filtered above");
            let dm = DstMatch::exact(c.dst, width);
            let failed = c.link.other(node).expect("candidate link touches its node");
            let tree = trees
                .entry(c.dst)
                .or_insert_with(|| graph.next_hops_toward(c.dst));
            let rule = match route_avoiding(primaries, tree, alt, c.dst, c.link) {
                Some(walk) => {
                    // nodes off every demand path get the rule they would have
                    // had as a source
                    for (w, nh) in walk {
                        if primaries.next_hop(w, c.dst).is_none() {
                            transit
                                .entry(w)
                                .or_default()
                                .insert((TagMatch::Any, c.dst), FlowRule::forward(dm, nh));
                        }
                    }
                    FlowRule::backup(dm, failed, vec![Action::Forward(alt)])
                }
                None => {
                    let label = detour_label(c.link);
                    let hops = without(graph, c.link).next_hops_toward(c.dst);
                    let mut cur = alt;
                    while cur != c.dst {
                        let nh = hops[&cur];
                        let r = FlowRule::primary(dm, vec![Action::Forward(nh)])
                            .with_tag(TagMatch::Top(label))
                            .with_priority(PRIO_DETOUR);
                        transit.entry(cur).or_default().insert(
                            (TagMatch::Top(label), c.dst),
                            FlowRule {
                                kind: RuleKind::Detour,
                                ..r
                            },
                        );
                        cur = nh;
                    }
                    FlowRule::backup(
                        dm,
                        failed,
                        vec![Action::PushTag(label), Action::Forward(alt)],
                    )
                }
            };
            plan.rules.entry(node).or_default().push(rule);
            plan.coverage
                .entry(c.link)
                .or_default()
                .insert((node, c.dst));
            plan.selected.push(c);
        }
    }
    plan.transit = transit
        .into_iter()
        .map(|(n, m)| (n, m.into_values().collect()))
        .collect();
    plan
}

/// Hops taken from `from` to `dst` following installed primaries, or the
/// shortest-path tree where a node has none, provided `link` is never
/// crossed.
fn route_avoiding(
    primaries: &RoutePlan,
    tree: &BTreeMap<NodeId, NodeId>,
    from: NodeId,
    dst: NodeId,
    link: LinkKey,
) -> Option<Vec<(NodeId, NodeId)>> {
    let mut cur = from;
    let mut walk = Vec::new();
    let mut seen = BTreeSet::new();
    while cur != dst {
        if !seen.insert(cur) {
            return None;
        }
        let nh = primaries
            .next_hop(cur, dst)
            .or_else(|| tree.get(&cur).copied())?;
        if LinkKey::new(cur, nh) == link {
            return None;
        }
        walk.push((cur, nh));
        cur = nh;
    }
    Some(walk)
}
