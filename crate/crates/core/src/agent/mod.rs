//! Per-node control logic: heartbeat liveness, scoped link-state sync, local
//! route computation, the migration state machine and backup activation.

pub mod liveness;
pub mod local;
pub mod lsdb;
pub mod migration;

pub use liveness::{Detection, Heartbeat, NeighborTable};
pub use local::{activate_backup, cluster_rules, distributed_rules, BackupActivation};
pub use lsdb::{Lsa, LsaUpdate, Lsdb};
pub use migration::{migration_step, MigrationEvent, MigrationFsm, Mode};
