use serde::Serialize;
use thiserror::Error;

use super::packet::Tag;
use super::rule::{FlowRule, RuleId, RuleKey};
use crate::kernel::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("flow table full ({capacity} rules)")]
pub struct TableFull {
    pub capacity: usize,
}

/// Rules kept sorted by `(priority desc, rule id asc)`.
#[derive(Debug, Clone, Serialize)]
pub struct FlowTable {
    capacity: usize,
    rules: Vec<FlowRule>,
    next_id: u64,
    overflows: u64,
    high_water: usize,
}

impl FlowTable {
    pub fn new(capacity: usize) -> Self {
        FlowTable {
            capacity,
            rules: Vec::new(),
            next_id: 1,
            overflows: 0,
            high_water: 0,
        }
    }

    /// Installs `rule`, replacing any rule with the same key. Returns the
    /// assigned id.
    pub fn install(&mut self, mut rule: FlowRule) -> Result<RuleId, TableFull> {
        let key = rule.key();
        let existing = self.rules.iter().position(|r| r.key() == key);
        if existing.is_none() && self.rules.len() >= self.capacity {
            self.overflows += 1;
            return Err(TableFull {
                capacity: self.capacity,
            });
        }
        if let Some(i) = existing {
            if self.rules[i].actions == rule.actions && self.rules[i].kind == rule.kind {
                return Ok(self.rules[i].id);
            }
            self.rules.remove(i);
        }
        let id = RuleId(self.next_id);
        self.next_id += 1;
        rule.id = id;
        let at = self.rules.partition_point(|r| {
            (std::cmp::Reverse(r.priority), r.id) < (std::cmp::Reverse(rule.priority), id)
        });
        self.rules.insert(at, rule);
        self.high_water = self.high_water.max(self.rules.len());
        Ok(id)
    }

    pub fn remove(&mut self, id: RuleId) -> Option<FlowRule> {
        let i = self.rules.iter().position(|r| r.id == id)?;
        Some(self.rules.remove(i))
    }

    pub fn remove_key(&mut self, key: &RuleKey) -> Option<FlowRule> {
        let i = self.rules.iter().position(|r| &r.key() == key)?;
        Some(self.rules.remove(i))
    }

    pub fn retain(&mut self, f: impl FnMut(&FlowRule) -> bool) {
        self.rules.retain(f);
    }

    pub fn lookup(
        &self,
        dst: NodeId,
        top: Option<Tag>,
        link_up: impl Fn(NodeId) -> bool,
    ) -> Option<&FlowRule> {
        self.rules.iter().find(|r| r.matches(dst, top, &link_up))
    }

    pub fn get_key(&self, key: &RuleKey) -> Option<&FlowRule> {
        self.rules.iter().find(|r| &r.key() == key)
    }

    pub fn rules(&self) -> &[FlowRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn overflows(&self) -> u64 {
        self.overflows
    }

    pub fn high_water(&self) -> usize {
        self.high_water
    }

    /// One JSON object per line, in match order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(&serde_json::to_string(r).expect("rule serializes"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplane::rule::{Action, DstMatch, PRIO_PRIMARY};

    const W: u8 = 3;

    fn fwd(dst: u32, to: u32) -> FlowRule {
        FlowRule::forward(DstMatch::exact(NodeId(dst), W), NodeId(to))
    }

    #[test]
    fn same_priority_lower_id_wins() {
        let mut t = FlowTable::new(8);
        let a = t
            .install(FlowRule::forward(DstMatch::any(W), NodeId(1)))
            .unwrap();
        let _b = t
            .install(
                FlowRule::forward(DstMatch::exact(NodeId(3), W), NodeId(2))
                    .with_tag(crate::dataplane::TagMatch::Empty),
            )
            .unwrap();
        assert_eq!(t.lookup(NodeId(3), None, |_| true).unwrap().id, a);
    }

    #[test]
    fn full_table_rejects() {
        let mut t = FlowTable::new(2);
        t.install(fwd(1, 1)).unwrap();
        t.install(fwd(2, 2)).unwrap();
        assert_eq!(t.install(fwd(3, 3)), Err(TableFull { capacity: 2 }));
        assert_eq!(t.overflows(), 1);
        assert_eq!(t.len(), 2);
        // replacing an existing slot is not an overflow
        assert!(t.install(fwd(2, 5)).is_ok());
        assert_eq!(
            t.lookup(NodeId(2), None, |_| true)
                .unwrap()
                .forward_target(),
            Some(NodeId(5))
        );
    }

    #[test]
    fn backup_overrides_primary_only_when_pred_holds() {
        // node A: primary to B (prio 10), backup via C when A-B is down (prio 20)
        let (b, c) = (NodeId(2), NodeId(3));
        let dst = DstMatch::exact(NodeId(4), W);
        let mut t = FlowTable::new(8);
        t.install(FlowRule::forward(dst, b).with_priority(10))
            .unwrap();
        t.install(FlowRule::backup(dst, b, vec![Action::Forward(c)]).with_priority(20))
            .unwrap();
        let up = |_n: NodeId| true;
        let ab_down = |n: NodeId| n != b;
        assert_eq!(
            t.lookup(NodeId(4), None, up).unwrap().forward_target(),
            Some(b)
        );
        assert_eq!(
            t.lookup(NodeId(4), None, ab_down).unwrap().forward_target(),
            Some(c)
        );
    }

    #[test]
    fn sorted_by_priority() {
        let mut t = FlowTable::new(8);
        t.install(fwd(1, 1)).unwrap();
        t.install(fwd(1, 2).with_priority(PRIO_PRIMARY + 1))
            .unwrap();
        assert_eq!(t.rules()[0].priority, PRIO_PRIMARY + 1);
        assert_eq!(t.dump().lines().count(), 2);
    }
}
