//! Boundary reconciliation between SDN nodes and migrated regions.
//!
//! Each connected component of the migrated set is treated as one virtual
//! vertex. Regions are stubs: SDN nodes send a region only traffic for the
//! destinations it advertises inside itself, and route everything else over
//! SDN nodes alone. A packet for an external destination that leaves a region
//! can therefore never be steered back into it.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dataplane::{DstMatch, FlowRule};
use crate::graph::Graph;
use crate::kernel::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReconcileError {
    #[error("migrated set is empty")]
    EmptyRegion,
    #[error("{node} forwards {dst} into a region that does not advertise it")]
    UnadvertisedForward { node: NodeId, dst: NodeId },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconcilePlan {
    pub regions: Vec<BTreeSet<NodeId>>,
    /// SDN node -> dst -> rule
    pub rules: BTreeMap<NodeId, BTreeMap<NodeId, FlowRule>>,
}

impl ReconcilePlan {
    pub fn region_of(&self, n: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.regions.iter().find(|r| r.contains(&n))
    }

    pub fn node_rules(&self, node: NodeId) -> Vec<FlowRule> {
        self.rules
            .get(&node)
            .map(|m| m.values().cloned().collect())
            .unwrap_or_default()
    }
}

/// Rules for every SDN node toward every destination in `dsts`.
///
/// `advertised` lists the region-internal destinations the migrated nodes
/// announce as reachable; region-internal destinations missing from it get
/// drop rules at SDN nodes.
pub fn reconcile_boundary(
    graph: &Graph,
    migrated: &BTreeSet<NodeId>,
    advertised: &BTreeSet<NodeId>,
    dsts: &BTreeSet<NodeId>,
    width: u8,
) -> Result<ReconcilePlan, ReconcileError> {
    if migrated.is_empty() {
        return Err(ReconcileError::EmptyRegion);
    }
    let sdn: BTreeSet<NodeId> = graph.nodes().filter(|n| !migrated.contains(n)).collect();
    let regions = graph.induced(migrated).components();
    let sdn_graph = graph.induced(&sdn);

    let mut plan = ReconcilePlan {
        regions,
        rules: BTreeMap::new(),
    };
    for &d in dsts {
        let dm = DstMatch::exact(d, width);
        let hops = match plan.region_of(d) {
            Some(region) if advertised.contains(&d) => {
                let mut keep = sdn.clone();
                keep.extend(region.iter().copied());
                graph.induced(&keep).next_hops_toward_set(region)
            }
            Some(_) => BTreeMap::new(),
            None => sdn_graph.next_hops_toward(d),
        };
        for &u in &sdn {
            if u == d {
                continue;
            }
            let rule = match hops.get(&u) {
                Some(&nh) => FlowRule::forward(dm, nh),
                None => FlowRule::drop(dm),
            };
            plan.rules.entry(u).or_default().insert(d, rule);
        }
    }
    check_no_unadvertised_forward(&plan, migrated, advertised)?;
    Ok(plan)
}

fn check_no_unadvertised_forward(
    plan: &ReconcilePlan,
    migrated: &BTreeSet<NodeId>,
    advertised: &BTreeSet<NodeId>,
) -> Result<(), ReconcileError> {
    for (&node, rules) in &plan.rules {
        for (&dst, r) in rules {
            let Some(nh) = r.forward_target() else {
                continue;
            };
            if !migrated.contains(&nh) {
                continue;
            }
            let same_region = plan.region_of(nh).is_some_and(|reg| reg.contains(&dst));
            if !(advertised.contains(&dst) && same_region) {
                return Err(ReconcileError::UnadvertisedForward { node, dst });
            }
        }
    }
    Ok(())
}
