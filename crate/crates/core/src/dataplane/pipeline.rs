//! One node's processing of one packet.

use serde::{Deserialize, Serialize};

use super::packet::{Packet, PathEntry};
use super::rule::{Action, RuleId};
use super::table::FlowTable;
use crate::kernel::NodeId;

/// Rules whose actions only edit the tag stack re-enter the table; this
/// bounds how often that may happen at one node.
pub const MAX_RESUBMITS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropCause {
    /// An explicit drop action (no route).
    NoRoute,
    TtlExpired,
    TagOverflow,
    ResubmitLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Delivered,
    Forward {
        next: NodeId,
        rule: RuleId,
    },
    Drop {
        rule: Option<RuleId>,
        cause: DropCause,
    },
    Miss,
}

/// Matches and applies actions at `node`, appending to the packet's path log.
/// `link_up` is the node's belief about its own links.
pub fn process(
    table: &FlowTable,
    node: NodeId,
    packet: &mut Packet,
    ttl: u32,
    link_up: impl Fn(NodeId) -> bool,
) -> Verdict {
    if node == packet.dst {
        log(packet, node, None);
        return Verdict::Delivered;
    }
    for _ in 0..=MAX_RESUBMITS {
        let Some(rule) = table.lookup(packet.dst, packet.stack.top(), &link_up) else {
            log(packet, node, None);
            return Verdict::Miss;
        };
        let mut next = None;
        for a in &rule.actions {
            match *a {
                Action::PopTag => {
                    packet.stack.pop();
                }
                Action::PushTag(t) => {
                    if packet.stack.push(t).is_err() {
                        log(packet, node, Some(rule.id));
                        return Verdict::Drop {
                            rule: Some(rule.id),
                            cause: DropCause::TagOverflow,
                        };
                    }
                }
                Action::Forward(n) => next = Some(n),
                Action::Drop => {
                    log(packet, node, Some(rule.id));
                    return Verdict::Drop {
                        rule: Some(rule.id),
                        cause: DropCause::NoRoute,
                    };
                }
            }
        }
        if let Some(n) = next {
            log(packet, node, Some(rule.id));
            if packet.hop_count + 1 > ttl {
                return Verdict::Drop {
                    rule: Some(rule.id),
                    cause: DropCause::TtlExpired,
                };
            }
            packet.hop_count += 1;
            return Verdict::Forward {
                next: n,
                rule: rule.id,
            };
        }
    }
    log(packet, node, None);
    Verdict::Drop {
        rule: None,
        cause: DropCause::ResubmitLimit,
    }
}

fn log(packet: &mut Packet, node: NodeId, rule: Option<RuleId>) {
    packet.path_log.push(PathEntry {
        node,
        stack_len: packet.stack.len() as u16,
        rule,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplane::packet::{ClusterId, Tag};
    use crate::dataplane::rule::{DstMatch, FlowRule, TagMatch};
    use crate::time::SimTime;

    const W: u8 = 3;

    fn pkt(dst: u32) -> Packet {
        Packet::new(1, NodeId(1), NodeId(dst), 4, SimTime::ZERO)
    }

    #[test]
    fn at_destination_delivers() {
        let t = FlowTable::new(4);
        let mut p = pkt(1);
        assert_eq!(
            process(&t, NodeId(1), &mut p, 8, |_| true),
            Verdict::Delivered
        );
        assert_eq!(p.hop_count, 0);
    }

    #[test]
    fn miss_without_rule() {
        let t = FlowTable::new(4);
        let mut p = pkt(3);
        assert_eq!(process(&t, NodeId(1), &mut p, 8, |_| true), Verdict::Miss);
    }

    #[test]
    fn ingress_pops_then_routes_inside_cluster() {
        // stack [C2] arriving at the first node of C2
        let c2 = Tag::Cluster(ClusterId(2));
        let mut t = FlowTable::new(8);
        t.install(
            FlowRule::primary(DstMatch::any(W), vec![Action::PopTag]).with_tag(TagMatch::Top(c2)),
        )
        .unwrap();
        t.install(
            FlowRule::forward(DstMatch::exact(NodeId(6), W), NodeId(5)).with_tag(TagMatch::Empty),
        )
        .unwrap();
        let mut p = pkt(6);
        p.stack.push(c2).unwrap();
        let v = process(&t, NodeId(4), &mut p, 8, |_| true);
        assert!(matches!(
            v,
            Verdict::Forward {
                next: NodeId(5),
                ..
            }
        ));
        assert!(p.stack.is_empty());
        assert_eq!(p.path_log.last().unwrap().stack_len, 0);
    }

    #[test]
    fn ttl_exceeded_drops() {
        let mut t = FlowTable::new(4);
        t.install(FlowRule::forward(DstMatch::any(W), NodeId(2)))
            .unwrap();
        let mut p = pkt(3);
        p.hop_count = 6;
        let v = process(&t, NodeId(1), &mut p, 6, |_| true);
        assert!(matches!(
            v,
            Verdict::Drop {
                cause: DropCause::TtlExpired,
                ..
            }
        ));
    }

    #[test]
    fn push_only_rules_stop_at_resubmit_limit() {
        let mut t = FlowTable::new(4);
        t.install(FlowRule::primary(DstMatch::any(W), vec![Action::PopTag]))
            .unwrap();
        let mut p = pkt(3);
        let v = process(&t, NodeId(1), &mut p, 8, |_| true);
        assert_eq!(
            v,
            Verdict::Drop {
                rule: None,
                cause: DropCause::ResubmitLimit
            }
        );
    }
}
