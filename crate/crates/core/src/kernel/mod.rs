//! Simulation kernel: the event scheduler, seeded random streams, the
//! topology/channel model and trace-driven mobility.

pub mod channel;
pub mod mobility;
pub mod rng;
pub mod scheduler;
pub mod topology;

pub use channel::LatencyDist;
pub use rng::RngStreams;
pub use scheduler::{Classify, Event, EventClass, EventHandle, FiredEvent, KernelError, Scheduler};
pub use topology::{LinkAttr, LinkKey, LinkKind, NodeId, TopologyError, TopologyView};
