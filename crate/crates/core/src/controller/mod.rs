//! Centralized control-plane algorithms: shortest-path rule computation,
//! cluster-sequence routing over the overlay, boundary reconciliation for
//! migrated regions, budgeted backup placement and wildcard compression.
//!
//! Everything here is a pure function of a believed view; the simulator in
//! [`crate::sim`] runs these inside the event loop and ships the results over
//! the control channel.

pub mod backup;
pub mod cluster_route;
pub mod compress;
pub mod msg;
pub mod reconcile;
pub mod report;
pub mod routing;

pub use backup::{compute_backup_rules, BackupCandidate, BackupPlan, Budget};
pub use cluster_route::{compute_cluster_sequence, ClusterRouteError};
pub use compress::compress_rules;
pub use msg::{ControlMsg, ControlPayload, MsgId, MsgKind};
pub use reconcile::{reconcile_boundary, ReconcileError, ReconcilePlan};
pub use report::{apply_link_report, diff_table, handle_link_report, RuleDiff};
pub use routing::{compute_paths, Demand, RoutePlan};
