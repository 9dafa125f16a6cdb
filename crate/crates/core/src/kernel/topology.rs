//! Nodes, links and the versioned topology view.
//!
//! The same type serves as the ground-truth topology owned by the kernel and
//! as the believed copies held by the controller. Links are stored once under
//! a normalized key, so the relation is symmetric by construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{}", self.0)
    }
}

/// Unordered node pair, stored with the lower id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkKey(pub NodeId, pub NodeId);

impl LinkKey {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            LinkKey(a, b)
        } else {
            LinkKey(b, a)
        }
    }

    pub fn other(&self, n: NodeId) -> Option<NodeId> {
        if n == self.0 {
            Some(self.1)
        } else if n == self.1 {
            Some(self.0)
        } else {
            None
        }
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.0 == n || self.1 == n
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    Data,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkAttr {
    pub up: bool,
    pub latency: SimTime,
    pub loss_prob: f64,
    pub kind: LinkKind,
}

impl LinkAttr {
    pub fn data(latency: SimTime) -> Self {
        LinkAttr {
            up: true,
            latency,
            loss_prob: 0.0,
            kind: LinkKind::Data,
        }
    }

    pub fn control(latency: SimTime, loss_prob: f64) -> Self {
        LinkAttr {
            up: true,
            latency,
            loss_prob,
            kind: LinkKind::Control,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("self-loop on {0}")]
    SelfLoop(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown link {0}")]
    UnknownLink(LinkKey),
    #[error("duplicate link {0}")]
    DuplicateLink(LinkKey),
    #[error("link {link}: {reason}")]
    BadAttr { link: LinkKey, reason: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopologyView {
    nodes: BTreeSet<NodeId>,
    controller: Option<NodeId>,
    links: BTreeMap<LinkKey, LinkAttr>,
    version: u64,
}

impl TopologyView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, n: NodeId) {
        if self.nodes.insert(n) {
            self.version += 1;
        }
    }

    /// Registers the controller endpoint. It is not a data-plane node.
    pub fn set_controller(&mut self, c: NodeId) {
        self.controller = Some(c);
        self.version += 1;
    }

    pub fn controller(&self) -> Option<NodeId> {
        self.controller
    }

    pub fn add_link(
        &mut self,
        a: NodeId,
        b: NodeId,
        attr: LinkAttr,
    ) -> Result<LinkKey, TopologyError> {
        if a == b {
            return Err(TopologyError::SelfLoop(a));
        }
        let key = LinkKey::new(a, b);
        for n in [a, b] {
            if !self.nodes.contains(&n) && Some(n) != self.controller {
                return Err(TopologyError::UnknownNode(n));
            }
        }
        if attr.latency == SimTime::ZERO {
            return Err(TopologyError::BadAttr {
                link: key,
                reason: "latency must be > 0".into(),
            });
        }
        if !(0.0..1.0).contains(&attr.loss_prob) {
            return Err(TopologyError::BadAttr {
                link: key,
                reason: "loss_prob must be in [0,1)".into(),
            });
        }
        if self.links.contains_key(&key) {
            return Err(TopologyError::DuplicateLink(key));
        }
        self.links.insert(key, attr);
        self.version += 1;
        Ok(key)
    }

    pub fn set_link_state(&mut self, key: LinkKey, up: bool) -> Result<(), TopologyError> {
        let attr = self
            .links
            .get_mut(&key)
            .ok_or(TopologyError::UnknownLink(key))?;
        attr.up = up;
        self.version += 1;
        Ok(())
    }

    pub fn link(&self, a: NodeId, b: NodeId) -> Option<&LinkAttr> {
        self.links.get(&LinkKey::new(a, b))
    }

    pub fn link_by_key(&self, key: LinkKey) -> Option<&LinkAttr> {
        self.links.get(&key)
    }

    pub fn is_up(&self, a: NodeId, b: NodeId) -> bool {
        self.link(a, b).is_some_and(|l| l.up)
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn links(&self) -> impl Iterator<Item = (&LinkKey, &LinkAttr)> {
        self.links.iter()
    }

    pub fn data_links(&self) -> impl Iterator<Item = (&LinkKey, &LinkAttr)> {
        self.links.iter().filter(|(_, a)| a.kind == LinkKind::Data)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Data-plane neighbors of `n` over existing links, up or down.
    pub fn data_neighbors(&self, n: NodeId) -> Vec<NodeId> {
        self.data_links().filter_map(|(k, _)| k.other(n)).collect()
    }

    /// Graph of data nodes joined by up data links.
    pub fn data_graph(&self) -> Graph {
        let mut g = Graph::new();
        for &n in &self.nodes {
            g.add_node(n);
        }
        for (k, a) in self.data_links() {
            if a.up {
                g.add_edge(k.0, k.1);
            }
        }
        g
    }

    /// Bits needed to write every data node id in binary.
    pub fn id_width(&self) -> u8 {
        id_width(self.nodes.iter().copied())
    }
}

pub fn id_width(ids: impl IntoIterator<Item = NodeId>) -> u8 {
    let max = ids.into_iter().map(|n| n.0).max().unwrap_or(0);
    (32 - max.leading_zeros()).max(1) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three() -> TopologyView {
        let mut t = TopologyView::new();
        for i in 1..=3 {
            t.add_node(NodeId(i));
        }
        t
    }

    #[test]
    fn rejects_self_loops_and_bad_attrs() {
        let mut t = three();
        assert_eq!(
            t.add_link(NodeId(1), NodeId(1), LinkAttr::data(SimTime(1))),
            Err(TopologyError::SelfLoop(NodeId(1)))
        );
        assert!(t
            .add_link(NodeId(1), NodeId(2), LinkAttr::data(SimTime(0)))
            .is_err());
        let mut lossy = LinkAttr::data(SimTime(5));
        lossy.loss_prob = 1.0;
        assert!(t.add_link(NodeId(1), NodeId(2), lossy).is_err());
    }

    #[test]
    fn down_then_up_bumps_version_twice() {
        let mut t = three();
        let k = t
            .add_link(NodeId(2), NodeId(3), LinkAttr::data(SimTime(5)))
            .unwrap();
        let v = t.version();
        t.set_link_state(k, false).unwrap();
        t.set_link_state(k, true).unwrap();
        assert_eq!(t.version(), v + 2);
        assert!(t
            .set_link_state(LinkKey::new(NodeId(1), NodeId(3)), false)
            .is_err());
    }

    #[test]
    fn width_of_ids() {
        assert_eq!(id_width([NodeId(7)]), 3);
        assert_eq!(id_width([NodeId(8)]), 4);
        assert_eq!(id_width([NodeId(0)]), 1);
    }

    proptest! {
        #[test]
        fn link_lookup_is_symmetric(pairs in proptest::collection::vec((0u32..8, 0u32..8, 1u64..100), 0..20)) {
            let mut t = TopologyView::new();
            for i in 0..8 { t.add_node(NodeId(i)); }
            for (a, b, lat) in pairs {
                let _ = t.add_link(NodeId(a), NodeId(b), LinkAttr::data(SimTime(lat)));
            }
            for a in 0..8 {
                for b in 0..8 {
                    prop_assert_eq!(t.link(NodeId(a), NodeId(b)), t.link(NodeId(b), NodeId(a)));
                }
                prop_assert!(t.link(NodeId(a), NodeId(a)).is_none());
            }
        }
    }
}
