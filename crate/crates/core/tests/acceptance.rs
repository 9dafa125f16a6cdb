//! End-to-end acceptance checks, one test per criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use hsdn_core::controller::{compress_rules, compute_backup_rules, compute_paths, Budget, Demand};
use hsdn_core::dataplane::{Action, ClusterId, DstMatch, FlowRule, FlowTable, Tag, TagMatch};
use hsdn_core::graph::Graph;
use hsdn_core::kernel::{LinkKey, NodeId, RngStreams};
use hsdn_core::scenario::fuzz::fuzz_schedule;
use hsdn_core::scenario::gen::{random_biconnected, random_connected, scenario_for};
use hsdn_core::scenario::output::render_run;
use hsdn_core::scenario::{
    builtin, run_trials, EventSpec, Fate, Method, PacketRecord, ScenarioConfig,
};
use hsdn_core::sim::World;
use hsdn_core::time::SimTime;

fn within(start: Instant, limit: Duration, what: &str) {
    let took = start.elapsed();
    assert!(took < limit, "{what} took {took:?}, limit {limit:?}");
}

fn graph_of(cfg: &ScenarioConfig) -> Graph {
    cfg.topology_view().data_graph()
}

fn width_of(g: &Graph) -> u8 {
    hsdn_core::kernel::topology::id_width(g.nodes())
}

/// Links used by delivered packets, per (src, dst).
fn delivered_links(records: &[PacketRecord]) -> BTreeMap<(NodeId, NodeId), BTreeSet<Vec<LinkKey>>> {
    let mut out: BTreeMap<_, BTreeSet<_>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.delivered()) {
        out.entry((r.src, r.dst)).or_default().insert(r.links());
    }
    out
}

fn static_run(
    g: &Graph,
    method: Method,
    tweak: impl FnOnce(&mut ScenarioConfig),
) -> Vec<PacketRecord> {
    let mut cfg = scenario_for("static", g, method);
    cfg.knobs.horizon_us = 1_000_000;
    cfg.traffic.interval_us = 200_000;
    tweak(&mut cfg);
    World::new(&cfg, 1, 0).run().records
}

// ---- 1: prototype, backup vs pure SDN ----

#[test]
fn c1_prototype_backup_beats_pure_sdn() {
    let start = Instant::now();
    let mut cfg = builtin::prototype();
    assert_eq!(cfg.knobs.trials, 200);
    let pure = run_trials(&cfg, cfg.seed);
    cfg.method = Method::Backup;
    let hybrid = run_trials(&cfg, cfg.seed);

    let (p, h) = (pure.cdf(), hybrid.cdf());
    assert_eq!(p.len(), 200, "one failure per trial");
    assert_eq!(h.len(), 200);
    let (ps, hs) = (p.summary(), h.summary());
    println!("pure-sdn {ps:?}\nbackup   {hs:?}");
    assert!(hs.mean <= 0.5 * ps.mean, "mean {} vs {}", hs.mean, ps.mean);
    assert!(hs.var < ps.var, "var {} vs {}", hs.var, ps.var);
    for (x, _) in p.percentiles() {
        assert!(
            h.at(x) >= p.at(x),
            "hybrid CDF below pure at {x}us: {} < {}",
            h.at(x),
            p.at(x)
        );
    }
    for pct in 1..=100 {
        let q = pct as f64 / 100.0;
        assert!(h.quantile(q) <= p.quantile(q), "percentile {pct}");
    }
    within(start, Duration::from_secs(10), "criterion 1");
}

// ---- 2: pure SDN paths vs brute force ----

/// Every simple path, keeping the shortest and, among those, the
/// lexicographically smallest node sequence.
fn brute_force_path(g: &Graph, src: NodeId, dst: NodeId) -> Option<Vec<NodeId>> {
    fn dfs(
        g: &Graph,
        cur: NodeId,
        dst: NodeId,
        path: &mut Vec<NodeId>,
        best: &mut Option<Vec<NodeId>>,
    ) {
        if cur == dst {
            let better = match best {
                None => true,
                Some(b) => (path.len(), &*path) < (b.len(), &*b),
            };
            if better {
                *best = Some(path.clone());
            }
            return;
        }
        for v in g.neighbors(cur) {
            if !path.contains(&v) {
                path.push(v);
                dfs(g, v, dst, path, best);
                path.pop();
            }
        }
    }
    let mut best = None;
    dfs(g, src, dst, &mut vec![src], &mut best);
    best
}

#[test]
fn c2_pure_sdn_paths_match_brute_force() {
    let start = Instant::now();
    let mut rng = RngStreams::new(2).stream("c2");
    for i in 0..100 {
        let n = rng.random_range(2..=10);
        let extra = rng.random_range(0.0..0.4);
        let g = random_connected(&mut rng, n, extra);
        let demands = Demand::all_pairs(g.nodes());
        let plan = compute_paths(&g, &demands, width_of(&g));
        assert!(plan.unreachable.is_empty());
        let mut oracle = BTreeMap::new();
        for d in &demands {
            let want = brute_force_path(&g, d.src, d.dst).expect("connected");
            assert_eq!(
                plan.path(d.src, d.dst).as_ref(),
                Some(&want),
                "graph {i} demand {d:?}"
            );
            oracle.insert((d.src, d.dst), want);
        }
        // the simulated data plane takes the same routes
        let records = static_run(&g, Method::PureSdn, |_| {});
        assert!(records.iter().any(|r| r.delivered()));
        for r in records.iter().filter(|r| r.fate != Fate::InFlight) {
            assert!(r.delivered(), "graph {i}: {:?}", r.fate);
            let hops: Vec<NodeId> = r.path.iter().map(|e| e.node).collect();
            assert_eq!(hops, oracle[&(r.src, r.dst)], "graph {i}");
        }
    }
    within(start, Duration::from_secs(30), "criterion 2");
}

// ---- 3: cluster size extremes ----

fn check_cluster_extremes(g: &Graph, what: &str) {
    let n = g.node_count();
    let with_size = |s: usize| move |c: &mut ScenarioConfig| c.knobs.cluster_size = Some(s);
    let sdn = delivered_links(&static_run(g, Method::PureSdn, |_| {}));
    let dist = delivered_links(&static_run(g, Method::PureDist, |_| {}));
    let s1 = delivered_links(&static_run(g, Method::Cluster, with_size(1)));
    let sn = delivered_links(&static_run(g, Method::Cluster, with_size(n)));
    let pairs = n * (n - 1);
    for (name, m) in [
        ("pure-sdn", &sdn),
        ("pure-dist", &dist),
        ("s=1", &s1),
        ("s=n", &sn),
    ] {
        assert_eq!(m.len(), pairs, "{what} {name}: not every demand delivered");
        assert!(
            m.values().all(|v| v.len() == 1),
            "{what} {name}: a demand used two routes"
        );
    }
    assert_eq!(s1, sdn, "{what}: s=1 vs pure-sdn");
    assert_eq!(sn, dist, "{what}: s=n vs pure-dist");
}

#[test]
fn c3_cluster_size_extremes_match_pure_methods() {
    check_cluster_extremes(&graph_of(&builtin::line6()), "line6");
    let mut rng = RngStreams::new(3).stream("c3");
    for i in 0..20 {
        let n = rng.random_range(3..=10);
        let g = random_connected(&mut rng, n, 0.25);
        check_cluster_extremes(&g, &format!("random {i}"));
    }
}

// ---- 4: fuzzing ----

#[test]
fn c4_grid12_fuzz_has_no_anomalies() {
    let start = Instant::now();
    let base = builtin::grid12_fuzz();
    let bad: Vec<(u64, u64)> = (0..1000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let cfg = fuzz_schedule(&base, seed);
            let s = run_trials(&cfg, seed);
            assert!(s.report.conserved(), "seed {seed} lost packets");
            (s.report.anomalies > 0).then_some((seed, s.report.anomalies))
        })
        .collect();
    assert!(bad.is_empty(), "anomalies at (seed, count): {bad:?}");
    within(start, Duration::from_secs(300), "criterion 4");
}

// ---- 5: unlimited backups on biconnected graphs ----

#[test]
fn c5_unlimited_backups_deliver_everything_without_controller() {
    let mut rng = RngStreams::new(5).stream("c5");
    let mut failures = 0;
    for seed in 0..20u64 {
        let n = rng.random_range(3..=10);
        let g = random_biconnected(&mut rng, n, 0.2);
        let mut base = scenario_for(&format!("bicon-{seed}"), &g, Method::Backup);
        base.knobs.backup_budget = None;
        base.knobs.horizon_us = 2_000_000;
        // probes only
        base.traffic.start_us = u64::MAX / 2;
        let fail_at = 500_000;
        for (a, b) in g.edges() {
            let mut cfg = base.clone();
            cfg.events = vec![EventSpec::LinkDown {
                at_us: fail_at,
                link: [a.0, b.0],
            }];
            let first = World::new(&cfg, seed, 0).run();
            assert_eq!(
                first.report.overhead.controller, 0,
                "seed {seed} link {a}-{b}"
            );
            let detected = first
                .detections
                .iter()
                .filter(|d| !d.3)
                .map(|d| d.0)
                .max()
                .unwrap_or_else(|| panic!("seed {seed}: {a}-{b} never detected"));
            let mut w = World::new(&cfg, seed, 0);
            let probe_at = detected + SimTime(1);
            for s in g.nodes() {
                for d in g.nodes().filter(|&d| d != s) {
                    w.inject(s, d, probe_at);
                }
            }
            let out = w.run();
            assert_eq!(out.report.generated as usize, n as usize * (n as usize - 1));
            for r in &out.records {
                assert!(
                    r.delivered(),
                    "seed {seed} link {a}-{b}: {}->{} {:?}",
                    r.src,
                    r.dst,
                    r.fate
                );
            }
            assert_eq!(out.report.overhead.controller, 0);
            failures += 1;
        }
    }
    println!("checked {failures} single-link failures");
}

// ---- 6: backup budget ----

/// Independent optimum: per node, the best set of at most `b` protectable
/// (link, dst) pairs by number of demands protected.
fn exhaustive_cover(g: &Graph, demands: &[Demand], b: usize) -> usize {
    let plan = compute_paths(g, demands, width_of(g));
    let mut weight: BTreeMap<(NodeId, LinkKey, NodeId), usize> = BTreeMap::new();
    for d in demands {
        let Some(path) = plan.path(d.src, d.dst) else {
            continue;
        };
        for w in path.windows(2) {
            *weight
                .entry((w[0], LinkKey::new(w[0], w[1]), d.dst))
                .or_default() += 1;
        }
    }
    let mut per_node: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for ((node, link, dst), wt) in weight {
        let mut cut = g.clone();
        cut.remove_edge(link.0, link.1);
        if cut.shortest_path(node, dst).is_some() {
            per_node.entry(node).or_default().push(wt);
        }
    }
    per_node
        .values()
        .map(|ws| {
            let mut best = 0;
            for mask in 0u32..(1 << ws.len()) {
                if mask.count_ones() as usize <= b {
                    let s: usize = (0..ws.len())
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| ws[i])
                        .sum();
                    best = best.max(s);
                }
            }
            best
        })
        .sum()
}

#[test]
fn c6_coverage_grows_with_budget_and_is_optimal_when_small() {
    let mut graphs = vec![(
        "triangle".to_string(),
        graph_of(&builtin::triangle()),
        builtin::triangle().demands(),
    )];
    let mut rng = RngStreams::new(6).stream("c6");
    for i in 0..10 {
        let n = rng.random_range(3..=6);
        let g = random_connected(&mut rng, n, 0.4);
        let d = Demand::all_pairs(g.nodes());
        graphs.push((format!("random {i}"), g, d));
    }
    for (name, g, demands) in &graphs {
        let w = width_of(g);
        let plan = compute_paths(g, demands, w);
        let mut prev = 0;
        let unlimited =
            compute_backup_rules(g, &plan, demands, Budget::UNLIMITED, w).covered_demands();
        let mut gaps = Vec::new();
        for b in 0..=8 {
            let got =
                compute_backup_rules(g, &plan, demands, Budget::rules(b), w).covered_demands();
            assert!(got >= prev, "{name}: B={b} covers {got} < {prev}");
            assert!(got <= unlimited);
            let best = exhaustive_cover(g, demands, b);
            assert!(got <= best, "{name}: B={b} beats the optimum?");
            if b <= 2 {
                assert_eq!(got, best, "{name}: B={b}");
            } else {
                gaps.push(best - got);
            }
            prev = got;
        }
        println!("{name}: gap to optimum for B=3..=8: {gaps:?}");
    }
}

// ---- 7: compression ----

fn random_table<R: Rng>(rng: &mut R, width: u8) -> Vec<FlowRule> {
    let space = 1u32 << width;
    let ndst = rng.random_range(1..=32.min(space));
    let mut dsts: Vec<u32> = (0..space).collect();
    for i in 0..ndst as usize {
        let j = rng.random_range(i..dsts.len());
        dsts.swap(i, j);
    }
    let mut rules: BTreeMap<_, FlowRule> = BTreeMap::new();
    for &d in &dsts[..ndst as usize] {
        let dm = DstMatch::exact(NodeId(d), width);
        let nh = NodeId(rng.random_range(0..4));
        let r = match rng.random_range(0..10) {
            0 => FlowRule::drop(dm),
            1..=6 => FlowRule::forward(dm, nh),
            7 => FlowRule::forward(dm, nh).with_tag(TagMatch::Empty),
            _ => {
                let failed = NodeId(rng.random_range(0..4));
                FlowRule::backup(
                    dm,
                    failed,
                    vec![Action::Forward(NodeId((failed.0 + 1) % 4))],
                )
            }
        };
        rules.insert(r.key(), r);
        if rng.random_bool(0.2) {
            let r = FlowRule::primary(dm, vec![Action::PopTag]).with_tag(TagMatch::Top(
                Tag::Cluster(ClusterId(rng.random_range(0..2))),
            ));
            rules.insert(r.key(), r);
        }
    }
    rules.into_values().collect()
}

fn table_of(rules: &[FlowRule]) -> FlowTable {
    let mut t = FlowTable::new(usize::MAX);
    for r in rules {
        t.install(r.clone()).expect("unbounded table");
    }
    t
}

#[test]
fn c7_compression_preserves_forwarding() {
    let mut rng = RngStreams::new(7).stream("c7");
    let tops = [
        None,
        Some(Tag::Cluster(ClusterId(0))),
        Some(Tag::Cluster(ClusterId(1))),
    ];
    let (mut before_total, mut after_total) = (0, 0);
    for i in 0..200 {
        let width = rng.random_range(3..=6);
        let rules = random_table(&mut rng, width);
        let before = table_of(&rules);
        let after = table_of(&compress_rules(before.rules()));
        assert!(
            after.len() <= before.len(),
            "table {i}: {} > {}",
            after.len(),
            before.len()
        );
        for d in 0..(1u32 << width) {
            for top in tops {
                for down in [None, Some(0), Some(1), Some(2), Some(3)] {
                    let up = |n: NodeId| Some(n.0) != down;
                    let a = before.lookup(NodeId(d), top, up).map(|r| &r.actions);
                    let b = after.lookup(NodeId(d), top, up).map(|r| &r.actions);
                    assert_eq!(a, b, "table {i} dst {d} top {top:?} down {down:?}");
                }
            }
        }
        before_total += before.len();
        after_total += after.len();
    }
    println!("rules before {before_total}, after {after_total}");
    assert!(after_total < before_total, "nothing was ever merged");
}

// ---- 8: determinism and conservation ----

#[test]
fn c8_same_seed_same_bytes_and_packets_conserved() {
    for name in builtin::NAMES {
        let mut cfg = builtin::get(name).unwrap();
        cfg.knobs.trials = cfg.knobs.trials.min(5);
        for m in Method::ALL {
            cfg.method = m;
            let a = run_trials(&cfg, 99);
            let b = run_trials(&cfg, 99);
            let r = &a.report;
            assert!(
                r.conserved(),
                "{name}/{m}: {} != {} + {} + {}",
                r.generated,
                r.delivered,
                r.dropped,
                r.in_flight
            );
            assert_eq!(render_run(&cfg, &a), render_run(&cfg, &b), "{name}/{m}");
        }
    }
    // fuzzed schedules too, with their own seeds
    let base = builtin::grid12_fuzz();
    for seed in [0u64, 1, 17, 18] {
        let cfg = fuzz_schedule(&base, seed);
        let a = render_run(&cfg, &run_trials(&cfg, seed));
        let b = render_run(&cfg, &run_trials(&fuzz_schedule(&base, seed), seed));
        assert_eq!(a, b, "fuzz seed {seed}");
    }
}

// ---- 9: tradeoff knobs ----

fn static_line6_lsas(sigma: u64, horizon: u64) -> u64 {
    let mut cfg = builtin::line6();
    cfg.events.clear();
    cfg.method = Method::PureDist;
    cfg.knobs.sync_period_us = sigma;
    cfg.knobs.horizon_us = horizon;
    cfg.knobs.trials = 1;
    run_trials(&cfg, 1).report.overhead.lsas
}

#[test]
fn c9_halving_sync_period_doubles_lsas() {
    let horizon = 22_000_000;
    for sigma in [2_000_000u64, 1_000_000, 500_000] {
        let t = static_line6_lsas(sigma, horizon);
        let t_half = static_line6_lsas(sigma / 2, horizon);
        // every node originates once per period
        let round = static_line6_lsas(sigma, sigma);
        assert!(round > 0);
        println!("sigma {sigma}: T={t} halved={t_half} round={round}");
        assert!(
            t_half + round >= 2 * t,
            "sigma {sigma}: {t_half} < 2*{t} - {round}"
        );
    }
}

#[test]
fn c9_larger_clusters_handle_more_failures_locally() {
    let mut prev = 0.0;
    for s in [1usize, 2, 3, 6] {
        let mut cfg = builtin::line6();
        cfg.knobs.cluster_size = Some(s);
        cfg.knobs.trials = 10;
        let inc = run_trials(&cfg, 9).report.incidents;
        assert!(inc.detected > 0);
        let frac = inc.handled_locally as f64 / inc.detected as f64;
        println!(
            "s={s}: {} of {} handled locally",
            inc.handled_locally, inc.detected
        );
        assert!(frac >= prev, "s={s}: {frac} < {prev}");
        prev = frac;
    }
    assert!(prev > 0.0);
}
