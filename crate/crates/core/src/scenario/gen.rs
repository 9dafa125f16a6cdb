//! Graph generators for tests, benches and fuzzing. Node ids run 1..=n.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::{
    DemandSpec, Knobs, LinkSpec, Method, ScenarioConfig, TopologySpec, TrafficSpec,
};
use crate::graph::Graph;
use crate::kernel::NodeId;

pub fn line(n: u32) -> Graph {
    let mut g = Graph::new();
    g.add_node(NodeId(1));
    for i in 1..n {
        g.add_edge(NodeId(i), NodeId(i + 1));
    }
    g
}

pub fn grid(rows: u32, cols: u32) -> Graph {
    let id = |r: u32, c: u32| NodeId(r * cols + c + 1);
    let mut g = Graph::new();
    for r in 0..rows {
        for c in 0..cols {
            g.add_node(id(r, c));
            if c + 1 < cols {
                g.add_edge(id(r, c), id(r, c + 1));
            }
            if r + 1 < rows {
                g.add_edge(id(r, c), id(r + 1, c));
            }
        }
    }
    g
}

/// Random spanning tree plus each remaining pair with probability `extra`.
pub fn random_connected<R: Rng + ?Sized>(rng: &mut R, n: u32, extra: f64) -> Graph {
    let mut g = Graph::new();
    let mut order: Vec<u32> = (1..=n).collect();
    order.shuffle(rng);
    g.add_node(NodeId(order[0]));
    for i in 1..order.len() {
        let j = rng.random_range(0..i);
        g.add_edge(NodeId(order[i]), NodeId(order[j]));
    }
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.random::<f64>() < extra {
                g.add_edge(NodeId(a), NodeId(b));
            }
        }
    }
    g
}

/// A shuffled ring (2-connected for n >= 3) plus random chords.
pub fn random_biconnected<R: Rng + ?Sized>(rng: &mut R, n: u32, extra: f64) -> Graph {
    assert!(n >= 3, "a biconnected graph needs three nodes");
    let mut order: Vec<u32> = (1..=n).collect();
    order.shuffle(rng);
    let mut g = Graph::new();
    for i in 0..order.len() {
        g.add_edge(NodeId(order[i]), NodeId(order[(i + 1) % order.len()]));
    }
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.random::<f64>() < extra {
                g.add_edge(NodeId(a), NodeId(b));
            }
        }
    }
    g
}

/// True if removing any single edge leaves the graph connected.
pub fn two_edge_connected(g: &Graph) -> bool {
    let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    g.is_connected()
        && edges.iter().all(|&(a, b)| {
            let mut h = g.clone();
            h.remove_edge(a, b);
            h.is_connected()
        })
}

/// A scenario over `g` with controller 0, default knobs and all-pairs demands.
pub fn scenario_for(name: &str, g: &Graph, method: Method) -> ScenarioConfig {
    let nodes: BTreeSet<u32> = g.nodes().map(|n| n.0).collect();
    ScenarioConfig {
        name: name.into(),
        seed: 1,
        method,
        topology: TopologySpec {
            nodes: nodes.into_iter().collect(),
            controller: 0,
            links: g.edges().map(|(a, b)| LinkSpec::new(a.0, b.0)).collect(),
        },
        demands: DemandSpec::default(),
        traffic: TrafficSpec::default(),
        events: Vec::new(),
        mobility: None,
        knobs: Knobs::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RngStreams;

    #[test]
    fn generators_hold_their_shape() {
        let mut rng = RngStreams::new(5).stream("gen");
        for n in 3..=10 {
            let g = random_connected(&mut rng, n, 0.2);
            assert!(g.is_connected());
            assert_eq!(g.node_count(), n as usize);
            let b = random_biconnected(&mut rng, n, 0.2);
            assert!(two_edge_connected(&b));
        }
        assert_eq!(grid(3, 4).edge_count(), 17);
        assert_eq!(line(6).edge_count(), 5);
        assert!(!two_edge_connected(&line(4)));
    }
}
