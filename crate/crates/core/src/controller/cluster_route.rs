//! Inter-cluster routing: the controller picks the sequence of clusters a
//! packet must cross and the source pushes it as a tag stack.

use thiserror::Error;

use super::routing::Demand;
use crate::clustering::{Overlay, Partition};
use crate::dataplane::{Action, ClusterId, DstMatch, FlowRule, Tag, TagMatch};
use crate::kernel::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterRouteError {
    #[error("{0} is not in the partition")]
    UnknownNode(NodeId),
    #[error("cluster {to} unreachable from {from} on the overlay")]
    Unreachable { from: ClusterId, to: ClusterId },
}

/// Shortest overlay path from `src`'s cluster to `dst`'s cluster, excluding
/// the source cluster (ties to the lowest cluster id). Empty iff co-clustered.
pub fn compute_cluster_sequence(
    src: NodeId,
    dst: NodeId,
    partition: &Partition,
    overlay: &Overlay,
) -> Result<Vec<ClusterId>, ClusterRouteError> {
    let cs = partition
        .cluster_of(src)
        .ok_or(ClusterRouteError::UnknownNode(src))?;
    let cd = partition
        .cluster_of(dst)
        .ok_or(ClusterRouteError::UnknownNode(dst))?;
    if cs == cd {
        return Ok(Vec::new());
    }
    let path = overlay
        .graph
        .shortest_path(cs, cd)
        .ok_or(ClusterRouteError::Unreachable { from: cs, to: cd })?;
    Ok(path[1..].to_vec())
}

/// Push rules at each demand's source for destinations in other clusters.
/// The rule only edits the stack; the packet then re-matches against the
/// local agent's cluster rules. Unreachable clusters get a drop rule.
pub fn source_push_rules(
    partition: &Partition,
    overlay: &Overlay,
    demands: &[Demand],
    width: u8,
) -> Vec<(NodeId, FlowRule)> {
    let mut out = Vec::new();
    for d in demands {
        let dm = DstMatch::exact(d.dst, width);
        match compute_cluster_sequence(d.src, d.dst, partition, overlay) {
            Ok(seq) if seq.is_empty() => {}
            Ok(seq) => {
                let actions = seq
                    .iter()
                    .rev()
                    .map(|&c| Action::PushTag(Tag::Cluster(c)))
                    .collect();
                out.push((
                    d.src,
                    FlowRule::primary(dm, actions).with_tag(TagMatch::Empty),
                ));
            }
            Err(_) => out.push((d.src, FlowRule::drop(dm).with_tag(TagMatch::Empty))),
        }
    }
    out.sort_by_key(|(n, r)| (*n, r.dst));
    out.dedup_by_key(|(n, r)| (*n, r.dst));
    out
}
