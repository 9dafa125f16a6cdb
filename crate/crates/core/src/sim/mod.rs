//! One simulated run: every node agent, the controller and the traffic.

mod world;

pub use world::{RunOutput, TraceLine, World};
