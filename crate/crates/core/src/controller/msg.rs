//! Control-channel messages between the controller and node agents.
//!
//! Wire form is one JSON object per message:
//!
//! ```text
//! {"id":7,"kind":"rule-install","from":0,"to":2,"retry":0,"payload":{"rule_install":{...}}}
//! ```
//!
//! `kind` mirrors the payload variant so logs can be filtered without
//! decoding the payload. The pinned examples live in `tests/golden/`.

use serde::{Deserialize, Serialize};

use crate::agent::Mode;
use crate::dataplane::{ClusterId, FlowRule, RuleKey};
use crate::kernel::{LinkKey, NodeId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MsgId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MsgKind {
    RuleInstall,
    RuleRemove,
    LinkReport,
    MissReport,
    MigrateCmd,
    ResyncCmd,
    ClusterRouteQuery,
    ClusterRouteReply,
    Keepalive,
    KeepaliveEcho,
    ClusterAssign,
    Ack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlPayload {
    RuleInstall {
        rules: Vec<FlowRule>,
    },
    RuleRemove {
        keys: Vec<RuleKey>,
    },
    LinkReport {
        link: LinkKey,
        up: bool,
        detected_at: SimTime,
    },
    MissReport {
        dst: NodeId,
    },
    MigrateCmd,
    /// Return to SDN once the listed installs have been applied.
    ResyncCmd {
        installs: Vec<MsgId>,
    },
    /// A packet arrived tagged for a partition this node no longer uses.
    ClusterRouteQuery {
        dst: NodeId,
    },
    ClusterRouteReply {
        dst: NodeId,
        sequence: Vec<ClusterId>,
    },
    Keepalive {
        seq: u64,
    },
    KeepaliveEcho {
        seq: u64,
        mode: Mode,
    },
    /// New partition. Nodes switch to it together at `activate_at`; a node
    /// that learns of it later switches on arrival.
    ClusterAssign {
        epoch: u64,
        members: Vec<(NodeId, ClusterId)>,
        activate_at: SimTime,
    },
    Ack {
        of: MsgId,
    },
}

impl ControlPayload {
    pub fn kind(&self) -> MsgKind {
        match self {
            ControlPayload::RuleInstall { .. } => MsgKind::RuleInstall,
            ControlPayload::RuleRemove { .. } => MsgKind::RuleRemove,
            ControlPayload::LinkReport { .. } => MsgKind::LinkReport,
            ControlPayload::MissReport { .. } => MsgKind::MissReport,
            ControlPayload::MigrateCmd => MsgKind::MigrateCmd,
            ControlPayload::ResyncCmd { .. } => MsgKind::ResyncCmd,
            ControlPayload::ClusterRouteQuery { .. } => MsgKind::ClusterRouteQuery,
            ControlPayload::ClusterRouteReply { .. } => MsgKind::ClusterRouteReply,
            ControlPayload::Keepalive { .. } => MsgKind::Keepalive,
            ControlPayload::KeepaliveEcho { .. } => MsgKind::KeepaliveEcho,
            ControlPayload::ClusterAssign { .. } => MsgKind::ClusterAssign,
            ControlPayload::Ack { .. } => MsgKind::Ack,
        }
    }

    /// Delivery is acknowledged and retransmitted on timeout.
    pub fn reliable(&self) -> bool {
        matches!(
            self.kind(),
            MsgKind::RuleInstall
                | MsgKind::RuleRemove
                | MsgKind::LinkReport
                | MsgKind::MigrateCmd
                | MsgKind::ResyncCmd
                | MsgKind::ClusterRouteReply
                | MsgKind::ClusterAssign
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlMsg {
    pub id: MsgId,
    pub kind: MsgKind,
    pub from: NodeId,
    pub to: NodeId,
    pub retry: u32,
    pub payload: ControlPayload,
}

impl ControlMsg {
    pub fn new(id: MsgId, from: NodeId, to: NodeId, payload: ControlPayload) -> Self {
        ControlMsg {
            id,
            kind: payload.kind(),
            from,
            to,
            retry: 0,
            payload,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("control messages serialize")
    }
}

/// One message of every kind, used to pin the wire schema.
pub fn schema_samples() -> Vec<ControlMsg> {
    use crate::dataplane::{Action, DstMatch, Tag, TagMatch};
    let c = NodeId(0);
    let n = NodeId(2);
    let fwd = FlowRule::forward(DstMatch::exact(NodeId(3), 2), NodeId(1));
    let push = FlowRule::primary(
        DstMatch::exact(NodeId(3), 2),
        vec![
            Action::PushTag(Tag::Cluster(ClusterId(1))),
            Action::Forward(NodeId(1)),
        ],
    )
    .with_tag(TagMatch::Empty);
    let bak = FlowRule::backup(
        DstMatch::prefix(1, 1, 2),
        NodeId(3),
        vec![Action::Forward(NodeId(1))],
    );
    let payloads = vec![
        (
            c,
            n,
            ControlPayload::RuleInstall {
                rules: vec![fwd.clone(), push, bak],
            },
        ),
        (
            c,
            n,
            ControlPayload::RuleRemove {
                keys: vec![fwd.key()],
            },
        ),
        (
            n,
            c,
            ControlPayload::LinkReport {
                link: LinkKey::new(n, NodeId(3)),
                up: false,
                detected_at: SimTime::from_millis(1300),
            },
        ),
        (n, c, ControlPayload::MissReport { dst: NodeId(3) }),
        (c, n, ControlPayload::MigrateCmd),
        (
            c,
            n,
            ControlPayload::ResyncCmd {
                installs: vec![MsgId(1)],
            },
        ),
        (n, c, ControlPayload::ClusterRouteQuery { dst: NodeId(3) }),
        (
            c,
            n,
            ControlPayload::ClusterRouteReply {
                dst: NodeId(3),
                sequence: vec![ClusterId(1), ClusterId(2)],
            },
        ),
        (c, n, ControlPayload::Keepalive { seq: 4 }),
        (
            n,
            c,
            ControlPayload::KeepaliveEcho {
                seq: 4,
                mode: Mode::Distributed,
            },
        ),
        (
            c,
            n,
            ControlPayload::ClusterAssign {
                epoch: 2,
                members: vec![(NodeId(1), ClusterId(0)), (n, ClusterId(1))],
                activate_at: SimTime(1_250_000),
            },
        ),
        (n, c, ControlPayload::Ack { of: MsgId(1) }),
    ];
    payloads
        .into_iter()
        .enumerate()
        .map(|(i, (from, to, p))| ControlMsg::new(MsgId(i as u64 + 1), from, to, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = include_str!("../../tests/golden/control_msg.jsonl");

    #[test]
    fn schema_matches_golden() {
        let got: String = schema_samples()
            .iter()
            .map(|m| m.to_json() + "\n")
            .collect();
        if std::env::var_os("HSDN_UPDATE_GOLDEN").is_some() {
            let path = concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/tests/golden/control_msg.jsonl"
            );
            std::fs::write(path, &got).unwrap();
            return;
        }
        assert_eq!(
            got, GOLDEN,
            "control message schema changed; rerun with HSDN_UPDATE_GOLDEN=1 if intended"
        );
    }

    #[test]
    fn golden_round_trips() {
        for line in GOLDEN.lines() {
            let m: ControlMsg = serde_json::from_str(line).unwrap();
            assert_eq!(m.kind, m.payload.kind());
            assert_eq!(m.to_json(), line);
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = r#"{"id":1,"kind":"ack","from":2,"to":0,"retry":0,"payload":{"ack":{"of":1}},"extra":1}"#;
        assert!(serde_json::from_str::<ControlMsg>(bad).is_err());
    }
}
