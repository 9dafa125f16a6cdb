//! Random-waypoint mobility, reduced to a trace of link up/down events.
//!
//! Nodes move in a square area. A configured data link is up while its
//! endpoints are within radio range; the generator emits an event whenever
//! that condition flips at a sampling instant.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::topology::{LinkKey, NodeId};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWaypoint {
    pub area_m: f64,
    pub range_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub pause_us: u64,
    pub step_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilityEvent {
    pub at: SimTime,
    pub link: LinkKey,
    pub up: bool,
}

#[derive(Debug, Clone, Copy)]
struct Walker {
    pos: (f64, f64),
    target: (f64, f64),
    speed: f64,
    pause_left: u64,
}

impl RandomWaypoint {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.area_m > 0.0 && self.range_m > 0.0) {
            return Err("area_m and range_m must be > 0".into());
        }
        if !(self.speed_min_mps > 0.0 && self.speed_min_mps <= self.speed_max_mps) {
            return Err("need 0 < speed_min_mps <= speed_max_mps".into());
        }
        if self.step_us == 0 {
            return Err("step_us must be > 0".into());
        }
        Ok(())
    }

    /// Link events for `links` over `[0, horizon]`. The state at t=0 is
    /// reported only for links that start out of range.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        nodes: &[NodeId],
        links: &[LinkKey],
        horizon: SimTime,
        rng: &mut R,
    ) -> Vec<MobilityEvent> {
        let mut walkers: BTreeMap<NodeId, Walker> = BTreeMap::new();
        for &n in nodes {
            let pos = self.point(rng);
            let w = Walker {
                pos,
                target: self.point(rng),
                speed: self.speed(rng),
                pause_left: 0,
            };
            walkers.insert(n, w);
        }
        let mut state: BTreeMap<LinkKey, bool> = links.iter().map(|&l| (l, true)).collect();
        let mut out = Vec::new();
        let mut t = 0u64;
        loop {
            for &l in links {
                let (Some(a), Some(b)) = (walkers.get(&l.0), walkers.get(&l.1)) else {
                    continue;
                };
                let d = ((a.pos.0 - b.pos.0).powi(2) + (a.pos.1 - b.pos.1).powi(2)).sqrt();
                let up = d <= self.range_m;
                if state[&l] != up {
                    state.insert(l, up);
                    out.push(MobilityEvent {
                        at: SimTime(t),
                        link: l,
                        up,
                    });
                }
            }
            t += self.step_us;
            if t > horizon.0 {
                break;
            }
            let dt = self.step_us as f64 / 1e6;
            for w in walkers.values_mut() {
                if w.pause_left > 0 {
                    w.pause_left = w.pause_left.saturating_sub(self.step_us);
                    continue;
                }
                let (dx, dy) = (w.target.0 - w.pos.0, w.target.1 - w.pos.1);
                let dist = (dx * dx + dy * dy).sqrt();
                let stride = w.speed * dt;
                if dist <= stride {
                    w.pos = w.target;
                    w.pause_left = self.pause_us;
                    w.target = self.point(rng);
                    w.speed = self.speed(rng);
                } else {
                    w.pos.0 += dx / dist * stride;
                    w.pos.1 += dy / dist * stride;
                }
            }
        }
        out
    }

    fn point<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        (
            rng.random_range(0.0..self.area_m),
            rng.random_range(0.0..self.area_m),
        )
    }

    fn speed<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.speed_min_mps == self.speed_max_mps {
            self.speed_min_mps
        } else {
            rng.random_range(self.speed_min_mps..self.speed_max_mps)
        }
    }
}
