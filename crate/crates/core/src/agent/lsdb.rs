//! Link-state advertisements and the per-node database they build.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::migration::Mode;
use crate::graph::Graph;
use crate::kernel::NodeId;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lsa {
    pub origin: NodeId,
    pub seq: u64,
    /// Incident links as the origin believes them.
    pub links: Vec<(NodeId, bool)>,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsaUpdate {
    Stale,
    /// Newer sequence number, same content.
    Refreshed,
    Changed,
}

impl LsaUpdate {
    pub fn is_newer(self) -> bool {
        self != LsaUpdate::Stale
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    lsa: Lsa,
    refreshed: SimTime,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lsdb {
    entries: BTreeMap<NodeId, Entry>,
}

impl Lsdb {
    /// Stores `lsa` if it is newer than what is held for its origin.
    pub fn update(&mut self, lsa: Lsa, now: SimTime) -> LsaUpdate {
        match self.entries.get_mut(&lsa.origin) {
            Some(e) if e.lsa.seq >= lsa.seq => LsaUpdate::Stale,
            Some(e) => {
                let changed = e.lsa.links != lsa.links || e.lsa.mode != lsa.mode;
                *e = Entry {
                    lsa,
                    refreshed: now,
                };
                if changed {
                    LsaUpdate::Changed
                } else {
                    LsaUpdate::Refreshed
                }
            }
            None => {
                self.entries.insert(
                    lsa.origin,
                    Entry {
                        lsa,
                        refreshed: now,
                    },
                );
                LsaUpdate::Changed
            }
        }
    }

    pub fn get(&self, origin: NodeId) -> Option<&Lsa> {
        self.entries.get(&origin).map(|e| &e.lsa)
    }

    pub fn seq(&self, origin: NodeId) -> Option<u64> {
        self.get(origin).map(|l| l.seq)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops entries not refreshed within `max_age`. Returns true if any went.
    pub fn expire(&mut self, now: SimTime, max_age: SimTime) -> bool {
        let before = self.entries.len();
        self.entries
            .retain(|_, e| now.saturating_sub(e.refreshed) < max_age);
        before != self.entries.len()
    }

    fn live<'a>(
        &'a self,
        scope: Option<&'a BTreeSet<NodeId>>,
    ) -> impl Iterator<Item = &'a Lsa> + 'a {
        self.entries
            .values()
            .map(|e| &e.lsa)
            .filter(move |l| scope.is_none_or(|s| s.contains(&l.origin)))
    }

    /// Believed graph. An edge is present iff every endpoint with an LSA
    /// reports it up. With `scope`, only LSAs from and links among the scope
    /// are used.
    pub fn graph(&self, scope: Option<&BTreeSet<NodeId>>) -> Graph {
        let mut g = Graph::new();
        let mut state: BTreeMap<(NodeId, NodeId), bool> = BTreeMap::new();
        for l in self.live(scope) {
            g.add_node(l.origin);
            for &(n, up) in &l.links {
                if scope.is_some_and(|s| !s.contains(&n)) {
                    continue;
                }
                let key = (l.origin.min(n), l.origin.max(n));
                let e = state.entry(key).or_insert(true);
                *e &= up;
            }
        }
        for ((a, b), up) in state {
            g.add_node(a);
            g.add_node(b);
            if up {
                g.add_edge(a, b);
            }
        }
        g
    }

    /// Believed up links between members of `a` and members of `b`.
    pub fn links_between(
        &self,
        a: &BTreeSet<NodeId>,
        b: &BTreeSet<NodeId>,
    ) -> Vec<(NodeId, NodeId)> {
        let g = self.graph(None);
        g.edges()
            .filter(|(x, y)| (a.contains(x) && b.contains(y)) || (a.contains(y) && b.contains(x)))
            .collect()
    }

    pub fn mode_of(&self, n: NodeId) -> Option<Mode> {
        self.get(n).map(|l| l.mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lsa(o: u32, seq: u64, links: &[(u32, bool)]) -> Lsa {
        Lsa {
            origin: NodeId(o),
            seq,
            links: links.iter().map(|&(n, u)| (NodeId(n), u)).collect(),
            mode: Mode::Distributed,
        }
    }

    #[test]
    fn newer_seq_only() {
        let mut db = Lsdb::default();
        assert_eq!(
            db.update(lsa(1, 2, &[(2, true)]), SimTime::ZERO),
            LsaUpdate::Changed
        );
        assert_eq!(
            db.update(lsa(1, 1, &[(2, false)]), SimTime::ZERO),
            LsaUpdate::Stale
        );
        assert!(db.graph(None).has_edge(NodeId(1), NodeId(2)));
        assert_eq!(
            db.update(lsa(1, 3, &[(2, true)]), SimTime::ZERO),
            LsaUpdate::Refreshed
        );
        assert_eq!(
            db.update(lsa(1, 4, &[(2, false)]), SimTime::ZERO),
            LsaUpdate::Changed
        );
        assert!(!db.graph(None).has_edge(NodeId(1), NodeId(2)));
    }

    #[test]
    fn either_endpoint_down_removes_edge() {
        let mut db = Lsdb::default();
        db.update(lsa(1, 1, &[(2, true), (3, true)]), SimTime::ZERO);
        db.update(lsa(2, 1, &[(1, false)]), SimTime::ZERO);
        let g = db.graph(None);
        assert!(!g.has_edge(NodeId(1), NodeId(2)));
        assert!(g.has_edge(NodeId(1), NodeId(3)));
    }

    #[test]
    fn scope_and_expiry() {
        let mut db = Lsdb::default();
        db.update(lsa(1, 1, &[(2, true), (3, true)]), SimTime::ZERO);
        db.update(lsa(2, 1, &[(1, true)]), SimTime::from_secs(5));
        let scope = BTreeSet::from([NodeId(1), NodeId(2)]);
        let g = db.graph(Some(&scope));
        assert!(!g.contains(NodeId(3)));
        assert!(db.expire(SimTime::from_secs(6), SimTime::from_secs(3)));
        assert_eq!(db.len(), 1);
    }
}
