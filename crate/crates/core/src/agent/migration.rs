//! SDN -> MIGRATING -> DISTRIBUTED -> SDN.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Sdn,
    Migrating,
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigrationEvent {
    KeepaliveRx,
    /// `m` keepalive periods passed without one.
    KeepaliveTimeout,
    MigrateCmd,
    /// The link-state database is complete enough to route on.
    LsdbReady,
    /// Resync arrived and the listed installs have been applied.
    ResyncReady {
        controller_reachable: bool,
    },
}

pub fn legal(from: Mode, to: Mode) -> bool {
    matches!(
        (from, to),
        (Mode::Sdn, Mode::Migrating)
            | (Mode::Migrating, Mode::Distributed)
            | (Mode::Distributed, Mode::Sdn)
    )
}

pub fn migration_step(mode: Mode, ev: MigrationEvent) -> Mode {
    use MigrationEvent::*;
    match (mode, ev) {
        (Mode::Sdn, KeepaliveTimeout | MigrateCmd) => Mode::Migrating,
        (Mode::Migrating, LsdbReady) => Mode::Distributed,
        (
            Mode::Distributed,
            ResyncReady {
                controller_reachable: true,
            },
        ) => Mode::Sdn,
        (m, _) => m,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrationFsm {
    mode: Mode,
    history: Vec<(SimTime, Mode)>,
}

impl MigrationFsm {
    pub fn new(mode: Mode) -> Self {
        MigrationFsm {
            mode,
            history: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Applies `ev`; returns the new mode if it changed.
    pub fn step(&mut self, ev: MigrationEvent, now: SimTime) -> Option<Mode> {
        let next = migration_step(self.mode, ev);
        if next == self.mode {
            return None;
        }
        debug_assert!(legal(self.mode, next));
        self.mode = next;
        self.history.push((now, next));
        Some(next)
    }

    pub fn history(&self) -> &[(SimTime, Mode)] {
        &self.history
    }
}
