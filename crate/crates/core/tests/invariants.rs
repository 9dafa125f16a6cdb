use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hsdn_core::clustering::{overlay_graph, partition};
use hsdn_core::controller::{compute_cluster_sequence, compute_paths, diff_table, Demand};
use hsdn_core::graph::Graph;
use hsdn_core::kernel::topology::id_width;
use hsdn_core::scenario::gen::{random_connected, scenario_for};
use hsdn_core::scenario::{run_trial, AnomalyKind, EventSpec, Fate, Method, ScenarioConfig};

fn graph(seed: u64, n: u32, extra: f64) -> Graph {
    random_connected(&mut ChaCha8Rng::seed_from_u64(seed), n, extra)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn routes_are_shortest_and_loop_free(seed in any::<u64>(), n in 2u32..=12, extra in 0.0f64..0.5) {
        let g = graph(seed, n, extra);
        let plan = compute_paths(&g, &Demand::all_pairs(g.nodes()), id_width(g.nodes()));
        for s in g.nodes() {
            let dist = g.bfs(s);
            for d in g.nodes().filter(|&d| d != s) {
                let p = plan.path(s, d).expect("connected graph, loop-free path");
                prop_assert_eq!(p.len() as u32, dist[&d] + 1);
                prop_assert!(p.windows(2).all(|w| g.has_edge(w[0], w[1])));
            }
        }
    }

    #[test]
    fn partitions_are_valid_at_every_size(seed in any::<u64>(), n in 1u32..=12, extra in 0.0f64..0.4) {
        let g = graph(seed, n, extra);
        for size in 1..=n as usize {
            let p = partition(&g, size).unwrap();
            prop_assert_eq!(p.validate(&g), Ok(()));
            prop_assert!(p.clusters.values().all(|c| c.len() <= size));
            let ov = overlay_graph(&p, &g);
            for s in g.nodes() {
                for d in g.nodes() {
                    let seq = compute_cluster_sequence(s, d, &p, &ov).unwrap();
                    prop_assert_eq!(seq.is_empty(), p.cluster_of(s) == p.cluster_of(d));
                    prop_assert_eq!(seq.last().copied().unwrap_or(p.cluster_of(s).unwrap()), p.cluster_of(d).unwrap());
                }
            }
        }
    }

    #[test]
    fn table_diff_turns_old_into_new(seed in any::<u64>(), n in 3u32..=8, full in any::<bool>()) {
        let g = graph(seed, n, 0.3);
        let w = id_width(g.nodes());
        let demands = Demand::all_pairs(g.nodes());
        let before = compute_paths(&g, &demands, w);
        let mut cut = g.clone();
        let (a, b) = g.edges().next().unwrap();
        cut.remove_edge(a, b);
        let after = compute_paths(&cut, &demands, w);
        for node in g.nodes() {
            let old = before.node_rules(node).into_iter().map(|r| (r.key(), r)).collect();
            let new: std::collections::BTreeMap<_, _> = after.node_rules(node).into_iter().map(|r| (r.key(), r)).collect();
            let (adds, removes) = diff_table(&old, &new, full);
            let mut t = old.clone();
            for k in removes {
                t.remove(&k);
            }
            for r in adds {
                t.insert(r.key(), r);
            }
            prop_assert_eq!(t, new);
        }
    }
}

/// One random flap on a random graph, as a config.
fn flap_config(
    seed: u64,
    n: u32,
    m: usize,
    link: &prop::sample::Index,
    down_ms: u64,
    up_after_ms: Option<u64>,
) -> (Graph, ScenarioConfig) {
    let g = graph(seed, n, 0.3);
    let edges: Vec<_> = g.edges().collect();
    let (a, b) = edges[link.index(edges.len())];
    let mut cfg = scenario_for("flap", &g, Method::ALL[m]);
    cfg.knobs.horizon_us = 3_000_000;
    cfg.events.push(EventSpec::LinkDown {
        at_us: down_ms * 1000,
        link: [a.0, b.0],
    });
    let mut after = g.clone();
    after.remove_edge(a, b);
    if let Some(up) = up_after_ms {
        cfg.events.push(EventSpec::LinkUp {
            at_us: (down_ms + up) * 1000,
            link: [a.0, b.0],
        });
        after.add_edge(a, b);
    }
    (after, cfg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Any method, any single flap: packets are conserved and accounted for.
    /// While the change is absorbed a packet may revisit a node (rules at
    /// different nodes change at different instants); a dead end or a hop
    /// limit hit without a revisit is never acceptable.
    #[test]
    fn flapping_link_conserves_packets(
        seed in any::<u64>(),
        n in 3u32..=8,
        m in 0usize..Method::ALL.len(),
        link in any::<prop::sample::Index>(),
        down_ms in 100u64..1500,
        up_after_ms in prop::option::of(50u64..1000),
    ) {
        let (_, cfg) = flap_config(seed, n, m, &link, down_ms, up_after_ms);
        let out = run_trial(&cfg, seed, 0);
        prop_assert!(out.report.conserved());
        for a in &out.anomalies {
            prop_assert!(matches!(a.kind, AnomalyKind::Loop { .. }), "{:?}", a);
        }
        let inc = &out.report.incidents;
        prop_assert_eq!(inc.completed + inc.censored, inc.detected);
        for s in &out.report.samples {
            prop_assert_eq!(s.components_sum(), s.delay_us);
        }
    }

    /// Once the flap has been absorbed, forwarding is loop-free and every
    /// pair that still has a path gets its packets through.
    #[test]
    fn traffic_after_a_flap_is_clean(
        seed in any::<u64>(),
        n in 3u32..=8,
        m in 0usize..Method::ALL.len(),
        link in any::<prop::sample::Index>(),
        down_ms in 100u64..1500,
        up_after_ms in prop::option::of(50u64..1000),
    ) {
        let (after, mut cfg) = flap_config(seed, n, m, &link, down_ms, up_after_ms);
        let last_us = (down_ms + up_after_ms.unwrap_or(0)) * 1000;
        cfg.traffic.start_us = last_us + 1_500_000;
        cfg.knobs.horizon_us = cfg.traffic.start_us + 1_000_000;
        // Three lost keepalive rounds in a row make the controller treat a
        // healthy node as migrated and route around it until the next echo.
        // That is a separate mechanism; keep it out of this window.
        cfg.knobs.keepalive_misses = 10;
        let out = run_trial(&cfg, seed, 0);
        prop_assert!(out.report.conserved());
        prop_assert!(out.anomalies.is_empty(), "{:?}", out.anomalies.first());
        for r in &out.records {
            if r.fate == Fate::InFlight || !after.bfs(r.src).contains_key(&r.dst) {
                continue;
            }
            prop_assert!(r.delivered(), "{:?}", r);
        }
    }
}
