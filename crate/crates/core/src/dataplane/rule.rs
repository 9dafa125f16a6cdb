use std::fmt;

use serde::{Deserialize, Serialize};

use super::packet::Tag;
use crate::kernel::NodeId;

/// Controller-computed forwarding.
pub const PRIO_PRIMARY: u32 = 100;
/// Rules written by the local agent; they shadow controller primaries.
pub const PRIO_LOCAL: u32 = 150;
/// Backup rules sit strictly above every primary they protect.
pub const PRIO_BACKUP: u32 = 200;
/// Transit rules for detour-labelled packets.
pub const PRIO_DETOUR: u32 = 210;

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RuleId(pub u64);

/// Binary prefix over fixed-width node ids. `len == width` is an exact match,
/// `len == 0` matches everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DstMatch {
    pub bits: u32,
    pub len: u8,
    pub width: u8,
}

impl DstMatch {
    pub fn exact(id: NodeId, width: u8) -> Self {
        debug_assert!(width == 32 || id.0 < (1 << width));
        DstMatch {
            bits: id.0,
            len: width,
            width,
        }
    }

    pub fn any(width: u8) -> Self {
        DstMatch {
            bits: 0,
            len: 0,
            width,
        }
    }

    pub fn prefix(bits: u32, len: u8, width: u8) -> Self {
        DstMatch { bits, len, width }
    }

    pub fn is_exact(&self) -> bool {
        self.len == self.width
    }

    pub fn exact_id(&self) -> Option<NodeId> {
        self.is_exact().then_some(NodeId(self.bits))
    }

    pub fn matches(&self, id: NodeId) -> bool {
        if self.len == 0 {
            return true;
        }
        let shift = (self.width - self.len) as u32;
        (id.0 >> shift) == self.bits
    }

    /// Number of ids in `[0, 2^width)` covered.
    pub fn size(&self) -> u64 {
        1u64 << (self.width - self.len)
    }
}

impl fmt::Display for DstMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len).rev() {
            write!(f, "{}", (self.bits >> i) & 1)?;
        }
        for _ in self.len..self.width {
            write!(f, "*")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagMatch {
    Any,
    /// Stack is empty.
    Empty,
    /// Front entry equals the tag.
    Top(Tag),
}

impl TagMatch {
    pub fn matches(&self, top: Option<Tag>) -> bool {
        match self {
            TagMatch::Any => true,
            TagMatch::Empty => top.is_none(),
            TagMatch::Top(t) => top == Some(*t),
        }
    }
}

/// "Local link (self, neighbor) is down" (or up).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StatePred {
    pub neighbor: NodeId,
    pub down: bool,
}

impl StatePred {
    pub fn link_down(neighbor: NodeId) -> Self {
        StatePred {
            neighbor,
            down: true,
        }
    }

    pub fn holds(&self, link_up: impl Fn(NodeId) -> bool) -> bool {
        link_up(self.neighbor) != self.down
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward(NodeId),
    PopTag,
    PushTag(Tag),
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Primary,
    Backup,
    /// Transit hop of a labelled backup detour.
    Detour,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleOrigin {
    Controller,
    LocalAgent,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowRule {
    pub id: RuleId,
    pub priority: u32,
    pub dst: DstMatch,
    pub tag: TagMatch,
    pub pred: Option<StatePred>,
    pub actions: Vec<Action>,
    pub kind: RuleKind,
    pub origin: RuleOrigin,
}

/// Identity of a table slot: installing a rule with the same key replaces it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RuleKey {
    pub priority: u32,
    pub dst: DstMatch,
    pub tag: TagMatch,
    pub pred: Option<StatePred>,
    pub origin: RuleOrigin,
}

impl FlowRule {
    pub fn primary(dst: DstMatch, actions: Vec<Action>) -> Self {
        FlowRule {
            id: RuleId(0),
            priority: PRIO_PRIMARY,
            dst,
            tag: TagMatch::Any,
            pred: None,
            actions,
            kind: RuleKind::Primary,
            origin: RuleOrigin::Controller,
        }
    }

    pub fn forward(dst: DstMatch, next: NodeId) -> Self {
        Self::primary(dst, vec![Action::Forward(next)])
    }

    pub fn drop(dst: DstMatch) -> Self {
        Self::primary(dst, vec![Action::Drop])
    }

    pub fn backup(dst: DstMatch, failed_neighbor: NodeId, actions: Vec<Action>) -> Self {
        FlowRule {
            priority: PRIO_BACKUP,
            pred: Some(StatePred::link_down(failed_neighbor)),
            kind: RuleKind::Backup,
            ..Self::primary(dst, actions)
        }
    }

    pub fn local(mut self) -> Self {
        self.origin = RuleOrigin::LocalAgent;
        self.priority = PRIO_LOCAL;
        self
    }

    pub fn with_tag(mut self, tag: TagMatch) -> Self {
        self.tag = tag;
        self
    }

    pub fn with_priority(mut self, p: u32) -> Self {
        self.priority = p;
        self
    }

    pub fn key(&self) -> RuleKey {
        RuleKey {
            priority: self.priority,
            dst: self.dst,
            tag: self.tag,
            pred: self.pred,
            origin: self.origin,
        }
    }

    pub fn forward_target(&self) -> Option<NodeId> {
        self.actions.iter().find_map(|a| match a {
            Action::Forward(n) => Some(*n),
            _ => None,
        })
    }

    pub fn matches(&self, dst: NodeId, top: Option<Tag>, link_up: impl Fn(NodeId) -> bool) -> bool {
        self.dst.matches(dst) && self.tag.matches(top) && self.pred.is_none_or(|p| p.holds(link_up))
    }

    /// Structural invariants every installed rule must satisfy.
    pub fn check(&self) -> Result<(), String> {
        let forwards = self
            .actions
            .iter()
            .filter(|a| matches!(a, Action::Forward(_)))
            .count();
        if forwards > 1 {
            return Err(format!("rule has {forwards} forward actions"));
        }
        if self.kind == RuleKind::Backup && self.pred.is_none() {
            return Err("backup rule without a state predicate".into());
        }
        if self.dst.len > self.dst.width || self.dst.width > 32 {
            return Err("malformed destination prefix".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_matching_and_display() {
        let p = DstMatch::prefix(0b10, 2, 3);
        assert_eq!(p.to_string(), "10*");
        assert!(p.matches(NodeId(4)) && p.matches(NodeId(5)));
        assert!(!p.matches(NodeId(6)));
        assert_eq!(DstMatch::prefix(1, 1, 3).to_string(), "1**");
        assert_eq!(DstMatch::exact(NodeId(6), 3).to_string(), "110");
        assert!(DstMatch::any(3).matches(NodeId(0)));
    }

    #[test]
    fn backup_needs_pred() {
        let mut r = FlowRule::backup(
            DstMatch::exact(NodeId(2), 3),
            NodeId(2),
            vec![Action::Forward(NodeId(3))],
        );
        assert!(r.check().is_ok());
        r.pred = None;
        assert!(r.check().is_err());
        let two = FlowRule::primary(
            DstMatch::any(3),
            vec![Action::Forward(NodeId(1)), Action::Forward(NodeId(2))],
        );
        assert!(two.check().is_err());
    }
}
