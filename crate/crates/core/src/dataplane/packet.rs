use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rule::RuleId;
use crate::kernel::NodeId;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// A stack entry: the next cluster to enter, or a backup-detour label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Cluster(ClusterId),
    Detour(u32),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("tag stack full (max depth {max_depth})")]
pub struct TagOverflow {
    pub max_depth: usize,
}

/// Ordered remaining-cluster sequence; index 0 is the front.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagStack {
    entries: Vec<Tag>,
    max_depth: usize,
}

impl TagStack {
    pub fn new(max_depth: usize) -> Self {
        TagStack {
            entries: Vec::new(),
            max_depth,
        }
    }

    pub fn from_clusters(seq: &[ClusterId], max_depth: usize) -> Result<Self, TagOverflow> {
        let mut s = TagStack::new(max_depth);
        for &c in seq.iter().rev() {
            s.push(Tag::Cluster(c))?;
        }
        Ok(s)
    }

    pub fn push(&mut self, tag: Tag) -> Result<(), TagOverflow> {
        if self.entries.len() >= self.max_depth {
            return Err(TagOverflow {
                max_depth: self.max_depth,
            });
        }
        self.entries.insert(0, tag);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<Tag> {
        (!self.entries.is_empty()).then(|| self.entries.remove(0))
    }

    pub fn top(&self) -> Option<Tag> {
        self.entries.first().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Tag] {
        &self.entries
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEntry {
    pub node: NodeId,
    /// Stack length after this node's processing.
    pub stack_len: u16,
    pub rule: Option<RuleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub stack: TagStack,
    /// Partition epoch the stack was computed under.
    pub epoch: u32,
    pub hop_count: u32,
    pub path_log: Vec<PathEntry>,
    pub injected_at: SimTime,
    pub probe: bool,
}

impl Packet {
    pub fn new(id: u64, src: NodeId, dst: NodeId, max_depth: usize, injected_at: SimTime) -> Self {
        Packet {
            id,
            src,
            dst,
            stack: TagStack::new(max_depth),
            epoch: 0,
            hop_count: 0,
            path_log: Vec::new(),
            injected_at,
            probe: false,
        }
    }

    /// Links traversed, as visited node pairs.
    pub fn hops(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.path_log.windows(2).map(|w| (w[0].node, w[1].node))
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.path_log.iter().map(|e| e.node).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn front_is_next_cluster() {
        let mut s = TagStack::from_clusters(&[ClusterId(2), ClusterId(3)], 4).unwrap();
        assert_eq!(s.top(), Some(Tag::Cluster(ClusterId(2))));
        assert_eq!(s.pop(), Some(Tag::Cluster(ClusterId(2))));
        assert_eq!(s.pop(), Some(Tag::Cluster(ClusterId(3))));
        assert_eq!(s.pop(), None);
    }

    #[test]
    fn depth_is_bounded() {
        let mut s = TagStack::new(1);
        s.push(Tag::Cluster(ClusterId(1))).unwrap();
        assert_eq!(
            s.push(Tag::Cluster(ClusterId(2))),
            Err(TagOverflow { max_depth: 1 })
        );
        assert_eq!(s.len(), 1);
    }
}
