//! Per-node forwarding: priority-ordered match-action tables, tag stacks and
//! link-state-conditioned backup rules.

pub mod packet;
pub mod pipeline;
pub mod rule;
pub mod table;

pub use packet::{ClusterId, Packet, PathEntry, Tag, TagOverflow, TagStack};
pub use pipeline::{process, DropCause, Verdict, MAX_RESUBMITS};
pub use rule::{
    Action, DstMatch, FlowRule, RuleId, RuleKey, RuleKind, RuleOrigin, StatePred, TagMatch,
    PRIO_BACKUP, PRIO_DETOUR, PRIO_LOCAL, PRIO_PRIMARY,
};
pub use table::{FlowTable, TableFull};
