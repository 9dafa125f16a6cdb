//! Heartbeat-based neighbor liveness.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kernel::{LinkKey, NodeId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Heartbeat {
    pub sender: NodeId,
    pub link: LinkKey,
    pub send_time: SimTime,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborEntry {
    pub last_rx: SimTime,
    pub alive: bool,
}

/// A change in the believed state of the link to a neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub neighbor: NodeId,
    pub up: bool,
    pub at: SimTime,
}

#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, NeighborEntry>,
    seqs: BTreeMap<NodeId, u64>,
}

impl NeighborTable {
    /// Neighbors start alive with a heartbeat credited at `now`.
    pub fn with_neighbors(ns: impl IntoIterator<Item = NodeId>, now: SimTime) -> Self {
        let mut t = NeighborTable::default();
        for n in ns {
            t.entries.insert(
                n,
                NeighborEntry {
                    last_rx: now,
                    alive: true,
                },
            );
        }
        t
    }

    pub fn is_alive(&self, n: NodeId) -> bool {
        self.entries.get(&n).is_some_and(|e| e.alive)
    }

    pub fn entry(&self, n: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&n)
    }

    pub fn neighbors(&self) -> impl Iterator<Item = (NodeId, &NeighborEntry)> {
        self.entries.iter().map(|(n, e)| (*n, e))
    }

    /// Next heartbeat to send toward `to`; sequence numbers count up per link.
    pub fn next_heartbeat(&mut self, me: NodeId, to: NodeId, now: SimTime) -> Heartbeat {
        let seq = self.seqs.entry(to).or_insert(0);
        *seq += 1;
        Heartbeat {
            sender: me,
            link: LinkKey::new(me, to),
            send_time: now,
            seq: *seq,
        }
    }

    /// Records a received heartbeat. A new sender becomes a neighbor; a
    /// neighbor believed down comes back up.
    pub fn on_heartbeat(&mut self, from: NodeId, now: SimTime) -> Option<Detection> {
        let e = self.entries.entry(from).or_insert(NeighborEntry {
            last_rx: now,
            alive: false,
        });
        e.last_rx = now;
        if e.alive {
            return None;
        }
        e.alive = true;
        Some(Detection {
            neighbor: from,
            up: true,
            at: now,
        })
    }

    /// Declares down every live neighbor silent for at least `k * tau`.
    pub fn check_liveness(&mut self, now: SimTime, tau: SimTime, k: u32) -> Vec<Detection> {
        let limit = tau * k as u64;
        let mut out = Vec::new();
        for (&n, e) in self.entries.iter_mut() {
            if e.alive && now.saturating_sub(e.last_rx) >= limit {
                e.alive = false;
                out.push(Detection {
                    neighbor: n,
                    up: false,
                    at: now,
                });
            }
        }
        out
    }
}
