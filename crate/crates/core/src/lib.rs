//! Deterministic simulator of hybrid SDN and distributed control for mobile
//! multi-hop networks.

pub mod agent;
pub mod clustering;
pub mod controller;
pub mod dataplane;
pub mod graph;
pub mod kernel;
pub mod scenario;
pub mod sim;
pub mod time;

pub use controller::{ControlMsg, ControlPayload, Demand, MsgKind};
pub use dataplane::{FlowRule, FlowTable, RuleKey, RuleOrigin};
pub use graph::Graph;
pub use kernel::{LinkKey, NodeId, RngStreams, Scheduler};
pub use scenario::{Cdf, DelaySample, Method, RunReport, ScenarioConfig, TrialSet};
pub use sim::{RunOutput, World};
pub use time::SimTime;
