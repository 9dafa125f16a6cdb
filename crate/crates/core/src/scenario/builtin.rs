//! Named scenarios shipped with the simulator.

use super::config::{
    DemandSpec, EventSpec, Knobs, LinkSpec, Method, ScenarioConfig, TopologySpec, TrafficSpec,
};

pub const NAMES: [&str; 4] = ["prototype", "line6", "triangle", "grid12-fuzz"];

pub fn get(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "prototype" => prototype(),
        "line6" => line6(),
        "triangle" => triangle(),
        "grid12-fuzz" => grid12_fuzz(),
        _ => return None,
    })
}

fn base(name: &str, method: Method, nodes: Vec<u32>, links: Vec<(u32, u32)>) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        seed: 1,
        method,
        topology: TopologySpec {
            nodes,
            controller: 0,
            links: links
                .into_iter()
                .map(|(a, b)| LinkSpec::new(a, b))
                .collect(),
        },
        demands: DemandSpec::default(),
        traffic: TrafficSpec::default(),
        events: Vec::new(),
        mobility: None,
        knobs: Knobs::default(),
    }
}

/// Three handsets and a controller. Hub N1 links to N2 and N3, which are
/// also linked directly; the direct link fails at 1s.
pub fn prototype() -> ScenarioConfig {
    let mut c = base(
        "prototype",
        Method::PureSdn,
        vec![1, 2, 3],
        vec![(1, 2), (1, 3), (2, 3)],
    );
    c.traffic.interval_us = 50_000;
    c.events = vec![EventSpec::LinkDown {
        at_us: 1_000_000,
        link: [2, 3],
    }];
    c.knobs.horizon_us = 3_000_000;
    c.knobs.trials = 200;
    c
}

/// Path 1-2-3-4-5-6; every link fails once for two seconds in turn.
pub fn line6() -> ScenarioConfig {
    let mut c = base(
        "line6",
        Method::Cluster,
        (1..=6).collect(),
        (1..6).map(|i| (i, i + 1)).collect(),
    );
    for i in 0..5u64 {
        let a = i as u32 + 1;
        let down = 2_000_000 + 4_000_000 * i;
        c.events.push(EventSpec::LinkDown {
            at_us: down,
            link: [a, a + 1],
        });
        c.events.push(EventSpec::LinkUp {
            at_us: down + 2_000_000,
            link: [a, a + 1],
        });
    }
    c.knobs.cluster_size = Some(3);
    c.knobs.horizon_us = 22_000_000;
    c
}

/// Triangle with a single demand 1->2 and room for one backup rule.
pub fn triangle() -> ScenarioConfig {
    let mut c = base(
        "triangle",
        Method::Backup,
        vec![1, 2, 3],
        vec![(1, 2), (2, 3), (1, 3)],
    );
    c.demands = DemandSpec::List(vec![[1, 2]]);
    c.events = vec![EventSpec::LinkDown {
        at_us: 1_000_000,
        link: [1, 2],
    }];
    c.knobs.backup_budget = Some(1);
    c.knobs.horizon_us = 3_000_000;
    c
}

/// 3x4 grid used as the base for schedule fuzzing. Probes start once the
/// fuzzed events have had time to settle.
pub fn grid12_fuzz() -> ScenarioConfig {
    let (rows, cols) = (3u32, 4u32);
    let id = |r: u32, c: u32| r * cols + c + 1;
    let mut links = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                links.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                links.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    let mut c = base(
        "grid12-fuzz",
        Method::Migration,
        (1..=rows * cols).collect(),
        links,
    );
    c.traffic = TrafficSpec {
        interval_us: 500_000,
        start_us: 20_000_000,
        stop_us: Some(24_000_000),
    };
    c.events = vec![
        EventSpec::LinkDown {
            at_us: 2_000_000,
            link: [6, 7],
        },
        EventSpec::ControlLinkDown {
            at_us: 3_000_000,
            node: 7,
        },
        EventSpec::ControlLinkUp {
            at_us: 9_000_000,
            node: 7,
        },
        EventSpec::LinkUp {
            at_us: 10_000_000,
            link: [6, 7],
        },
    ];
    c.knobs.control_loss = 0.01;
    c.knobs.horizon_us = 25_000_000;
    c
}
