//! Forwarding anomalies recovered from packet path logs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::report::{DropReason, Fate, PacketRecord};
use crate::dataplane::RuleId;
use crate::kernel::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AnomalyKind {
    /// The packet came back to a node with the same stack depth.
    Loop { node: NodeId, stack_len: u16 },
    /// Hop limit hit without a detected revisit.
    TtlExpiry { node: NodeId },
    /// Table miss at a node that has no controller to ask.
    DeadEnd { node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    pub packet: u64,
    pub src: NodeId,
    pub dst: NodeId,
    #[serde(flatten)]
    pub kind: AnomalyKind,
    /// Rules applied along the offending stretch of the path.
    pub rules: Vec<RuleId>,
}

/// At most one loop report per packet (its first revisit); TTL expiries and
/// dead ends are reported when no loop explains them.
pub fn detect_loops(records: &[PacketRecord]) -> Vec<Anomaly> {
    let mut out = Vec::new();
    for r in records {
        let mk = |kind, rules| Anomaly {
            packet: r.id,
            src: r.src,
            dst: r.dst,
            kind,
            rules,
        };
        let mut first: BTreeMap<(NodeId, u16), usize> = BTreeMap::new();
        let mut looped = false;
        for (j, e) in r.path.iter().enumerate() {
            if let Some(&i) = first.get(&(e.node, e.stack_len)) {
                let mut rules: Vec<RuleId> = r.path[i..j].iter().filter_map(|p| p.rule).collect();
                rules.sort();
                rules.dedup();
                out.push(mk(
                    AnomalyKind::Loop {
                        node: e.node,
                        stack_len: e.stack_len,
                    },
                    rules,
                ));
                looped = true;
                break;
            }
            first.insert((e.node, e.stack_len), j);
        }
        if looped {
            continue;
        }
        if let Fate::Dropped { node, reason, .. } = r.fate {
            let rules = || {
                let mut v: Vec<RuleId> = r.path.iter().filter_map(|p| p.rule).collect();
                v.sort();
                v.dedup();
                v
            };
            match reason {
                DropReason::TtlExpired => out.push(mk(AnomalyKind::TtlExpiry { node }, rules())),
                DropReason::DeadEnd => out.push(mk(AnomalyKind::DeadEnd { node }, rules())),
                _ => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplane::{process, DstMatch, FlowRule, FlowTable, Packet, Verdict};
    use crate::time::SimTime;

    /// Walks a packet through `tables` the way the simulator does.
    fn walk(
        tables: &BTreeMap<NodeId, FlowTable>,
        src: u32,
        dst: u32,
        ttl: u32,
        pure_sdn: bool,
    ) -> PacketRecord {
        let mut p = Packet::new(1, NodeId(src), NodeId(dst), 2, SimTime::ZERO);
        let mut at = NodeId(src);
        let fate = loop {
            let Some(t) = tables.get(&at) else {
                let reason = if pure_sdn {
                    DropReason::Miss
                } else {
                    DropReason::DeadEnd
                };
                p.path_log.push(crate::dataplane::PathEntry {
                    node: at,
                    stack_len: 0,
                    rule: None,
                });
                break Fate::Dropped {
                    at: SimTime::ZERO,
                    node: at,
                    reason,
                };
            };
            match process(t, at, &mut p, ttl, |_| true) {
                Verdict::Delivered => break Fate::Delivered { at: SimTime::ZERO },
                Verdict::Forward { next, .. } => at = next,
                Verdict::Drop { cause, .. } => {
                    break Fate::Dropped {
                        at: SimTime::ZERO,
                        node: at,
                        reason: cause.into(),
                    }
                }
                Verdict::Miss => {
                    let reason = if pure_sdn {
                        DropReason::Miss
                    } else {
                        DropReason::DeadEnd
                    };
                    break Fate::Dropped {
                        at: SimTime::ZERO,
                        node: at,
                        reason,
                    };
                }
            }
        };
        PacketRecord {
            id: 1,
            src: NodeId(src),
            dst: NodeId(dst),
            injected_at: SimTime::ZERO,
            fate,
            path: p.path_log,
        }
    }

    fn table(rules: &[FlowRule]) -> FlowTable {
        let mut t = FlowTable::new(8);
        for r in rules {
            t.install(r.clone()).unwrap();
        }
        t
    }

    #[test]
    fn ping_pong_names_both_rules() {
        let d = DstMatch::exact(NodeId(3), 2);
        let mut tables = BTreeMap::new();
        let mut t1 = table(&[]);
        let id1 = t1.install(FlowRule::forward(d, NodeId(2))).unwrap();
        let mut t2 = table(&[]);
        let id2 = t2.install(FlowRule::forward(d, NodeId(1))).unwrap();
        tables.insert(NodeId(1), t1);
        tables.insert(NodeId(2), t2);
        let rec = walk(&tables, 1, 3, 8, false);
        let a = detect_loops(&[rec]);
        assert_eq!(a.len(), 1);
        assert!(matches!(
            a[0].kind,
            AnomalyKind::Loop {
                node: NodeId(1),
                ..
            }
        ));
        assert!(a[0].rules.contains(&id1) && a[0].rules.contains(&id2));
    }

    #[test]
    fn clean_path_no_anomaly() {
        let d = DstMatch::exact(NodeId(3), 2);
        let mut tables = BTreeMap::new();
        tables.insert(NodeId(1), table(&[FlowRule::forward(d, NodeId(2))]));
        tables.insert(NodeId(2), table(&[FlowRule::forward(d, NodeId(3))]));
        tables.insert(NodeId(3), table(&[]));
        let rec = walk(&tables, 1, 3, 8, false);
        assert!(rec.delivered());
        assert!(detect_loops(&[rec]).is_empty());
    }

    #[test]
    fn blackhole_is_dead_end() {
        let d = DstMatch::exact(NodeId(3), 2);
        let mut tables = BTreeMap::new();
        tables.insert(NodeId(1), table(&[FlowRule::forward(d, NodeId(2))]));
        tables.insert(NodeId(2), table(&[]));
        let rec = walk(&tables, 1, 3, 8, false);
        let a = detect_loops(std::slice::from_ref(&rec));
        assert!(matches!(
            a[..],
            [Anomaly {
                kind: AnomalyKind::DeadEnd { node: NodeId(2) },
                ..
            }]
        ));
        // the same miss under pure SDN is a report, not an anomaly
        let rec = walk(&tables, 1, 3, 8, true);
        assert!(detect_loops(&[rec]).is_empty());
    }

    #[test]
    fn ttl_without_revisit() {
        let rec = PacketRecord {
            id: 9,
            src: NodeId(1),
            dst: NodeId(5),
            injected_at: SimTime::ZERO,
            fate: Fate::Dropped {
                at: SimTime::ZERO,
                node: NodeId(2),
                reason: DropReason::TtlExpired,
            },
            path: vec![
                crate::dataplane::PathEntry {
                    node: NodeId(1),
                    stack_len: 0,
                    rule: Some(RuleId(4)),
                },
                crate::dataplane::PathEntry {
                    node: NodeId(2),
                    stack_len: 0,
                    rule: Some(RuleId(7)),
                },
            ],
        };
        let a = detect_loops(&[rec]);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].kind, AnomalyKind::TtlExpiry { node: NodeId(2) });
    }
}
