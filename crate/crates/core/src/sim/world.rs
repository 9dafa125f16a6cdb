//! The event loop. Agents and the controller only see each other through
//! scheduled events; the true topology decides what gets through.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{
    activate_backup, cluster_rules, distributed_rules, Detection, Heartbeat, Lsa, LsaUpdate, Lsdb,
    MigrationEvent, MigrationFsm, Mode, NeighborTable,
};
use crate::clustering::{
    overlay_graph, partition, recluster, ClusterId, Overlay, Partition, ReclusterPolicy,
};
use crate::controller::cluster_route::source_push_rules;
use crate::controller::{
    apply_link_report, compute_backup_rules, compute_cluster_sequence, compute_paths, diff_table,
    reconcile_boundary, Budget, ControlMsg, ControlPayload, Demand, MsgId,
};
use crate::dataplane::{
    process, FlowRule, FlowTable, Packet, PathEntry, RuleKey, RuleOrigin, TagStack, Verdict,
};
use crate::graph::Graph;
use crate::kernel::{
    Classify, EventClass, EventHandle, LatencyDist, LinkKey, NodeId, RngStreams, Scheduler,
    TopologyView,
};
use crate::scenario::anomaly::{detect_loops, Anomaly};
use crate::scenario::config::{EventSpec, Method, ScenarioConfig, TrafficSpec};
use crate::scenario::report::{
    CensoredSample, DelaySample, DropReason, Fate, PacketRecord, RunReport,
};
use crate::time::SimTime;

#[derive(Debug, Clone)]
struct Params {
    method: Method,
    tau: SimTime,
    k: u32,
    ka_period: SimTime,
    ka_misses: u32,
    window: SimTime,
    pre_exec: bool,
    discovery: SimTime,
    sigma: SimTime,
    lsa_ttl: u32,
    lsa_max_age: SimTime,
    size: usize,
    budget: Budget,
    depth: usize,
    latency: LatencyDist,
    rto: SimTime,
    max_retries: u32,
    a_proc: SimTime,
    t_install: SimTime,
    c_proc: SimTime,
    ttl: u32,
    horizon: SimTime,
    width: u8,
    recluster: Option<ReclusterPolicy>,
    /// Lead time between a recluster and the instant every node switches.
    activation: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Change {
    Link(LinkKey, bool),
    ControlAll(bool),
    Control(NodeId, bool),
    Migrate(NodeId),
    Resync(NodeId),
    Recluster,
}

#[derive(Debug, Clone)]
enum Ev {
    Packet {
        node: NodeId,
        from: NodeId,
        flap: u64,
        pkt: Box<Packet>,
    },
    Heartbeat {
        to: NodeId,
        hb: Heartbeat,
        flap: u64,
    },
    Lsa {
        to: NodeId,
        from: NodeId,
        lsa: Lsa,
        ttl: u32,
        flap: u64,
    },
    Traffic,
    Inject {
        src: NodeId,
        dst: NodeId,
    },
    Tick {
        node: NodeId,
    },
    LsaTick {
        node: NodeId,
    },
    CtrlDeliver {
        msg: ControlMsg,
    },
    CtrlRetry {
        id: MsgId,
    },
    KeepaliveTick,
    KeepaliveTimeout {
        node: NodeId,
    },
    DiscoveryDone {
        node: NodeId,
    },
    Scenario {
        idx: usize,
    },
    AgentCompute {
        node: NodeId,
    },
    AgentCommit {
        node: NodeId,
        epoch: u64,
        rules: Vec<FlowRule>,
        incidents: Vec<usize>,
        started: SimTime,
        computed: SimTime,
    },
    CtrlCompute,
    CtrlActivate {
        epoch: u64,
    },
    NodeActivate {
        node: NodeId,
        epoch: u64,
    },
    Install {
        node: NodeId,
        msg: MsgId,
        rules: Vec<FlowRule>,
        removes: Vec<RuleKey>,
    },
}

impl Classify for Ev {
    fn class(&self) -> EventClass {
        match self {
            Ev::Packet { .. } | Ev::Heartbeat { .. } | Ev::Lsa { .. } => EventClass::PacketArrival,
            Ev::Traffic | Ev::Inject { .. } => EventClass::MeasurementMark,
            Ev::Scenario { .. } => EventClass::LinkChange,
            Ev::CtrlDeliver { .. } => EventClass::ControlMessageDelivery,
            _ => EventClass::Timer,
        }
    }
}

impl Ev {
    fn label(&self) -> String {
        match self {
            Ev::Packet {
                node, from, pkt, ..
            } => format!("packet {} {from}->{node}", pkt.id),
            Ev::Heartbeat { to, hb, .. } => format!("heartbeat {}->{to}", hb.sender),
            Ev::Lsa { to, from, lsa, .. } => format!("lsa {}#{} {from}->{to}", lsa.origin, lsa.seq),
            Ev::Traffic => "traffic".into(),
            Ev::Inject { src, dst } => format!("inject {src}->{dst}"),
            Ev::Tick { node } => format!("tick {node}"),
            Ev::LsaTick { node } => format!("lsa-tick {node}"),
            Ev::CtrlDeliver { msg } => format!(
                "deliver {} {:?} {}->{}",
                msg.id.0, msg.kind, msg.from, msg.to
            ),
            Ev::CtrlRetry { id } => format!("retry {}", id.0),
            Ev::KeepaliveTick => "keepalive-tick".into(),
            Ev::KeepaliveTimeout { node } => format!("keepalive-timeout {node}"),
            Ev::DiscoveryDone { node } => format!("discovery-done {node}"),
            Ev::Scenario { idx } => format!("scenario {idx}"),
            Ev::AgentCompute { node } => format!("agent-compute {node}"),
            Ev::AgentCommit { node, rules, .. } => {
                format!("agent-commit {node} ({} rules)", rules.len())
            }
            Ev::CtrlCompute => "controller-compute".into(),
            Ev::CtrlActivate { epoch } => format!("controller-activate epoch {epoch}"),
            Ev::NodeActivate { node, epoch } => format!("activate {node} epoch {epoch}"),
            Ev::Install { node, msg, .. } => format!("install {} at {node}", msg.0),
        }
    }
}

/// One line of `trace.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceLine {
    pub t_us: u64,
    pub seq: u64,
    pub class: EventClass,
    pub event: String,
}

/// A node agent's state.
struct Node {
    table: FlowTable,
    nbrs: NeighborTable,
    /// Configured data neighbors, sorted.
    links: Vec<NodeId>,
    fsm: MigrationFsm,
    lsdb: Lsdb,
    lsa_seq: u64,
    syncing: bool,
    member_of: BTreeMap<NodeId, ClusterId>,
    epoch: u64,
    /// Partition epoch the committed local rules were computed for.
    rules_epoch: u64,
    switched_at: SimTime,
    /// Assignment waiting for its activation instant.
    staged: Option<Staged>,
    /// Controller messages older than this were issued for an older partition.
    floor: MsgId,
    ka_timer: Option<EventHandle>,
    /// Link state still owed to the controller, with the report carrying it.
    pending: BTreeMap<LinkKey, (bool, Option<MsgId>)>,
    reported_down: BTreeSet<NodeId>,
    seen: BTreeSet<MsgId>,
    versions: BTreeMap<RuleKey, MsgId>,
    applied: BTreeSet<MsgId>,
    compute: Option<(SimTime, Vec<usize>)>,
    resync_wait: Option<BTreeSet<MsgId>>,
}

struct Staged {
    epoch: u64,
    members: BTreeMap<NodeId, ClusterId>,
    msg: MsgId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum View {
    Sdn,
    Migrated { reachable_since: Option<SimTime> },
    Resyncing { since: SimTime },
}

struct Batch {
    incidents: Vec<usize>,
    outstanding: BTreeSet<MsgId>,
    computed: SimTime,
    last_delivery: SimTime,
}

struct Controller {
    id: NodeId,
    believed: Graph,
    /// What each managed node has been told to hold.
    desired: BTreeMap<NodeId, BTreeMap<RuleKey, FlowRule>>,
    view: BTreeMap<NodeId, View>,
    commanded: BTreeSet<NodeId>,
    last_echo: BTreeMap<NodeId, SimTime>,
    ka_seq: u64,
    partition: Option<Partition>,
    overlay: Option<Overlay>,
    partition_graph: Graph,
    /// Next partition, the graph it was cut from, and when it takes over.
    staged: Option<(Partition, Graph, SimTime)>,
    /// A recluster was asked for while another was staged.
    recluster_again: bool,
    /// Detection time of the newest report applied per link. A retried
    /// report can arrive after a newer one and must not undo it.
    report_at: BTreeMap<LinkKey, SimTime>,
    seen: BTreeSet<MsgId>,
    compute_pending: bool,
    queued: Vec<usize>,
    resync: BTreeSet<NodeId>,
    /// Nodes that may have missed an install; they get their full table next.
    dirty: BTreeSet<NodeId>,
    batches: BTreeMap<usize, Batch>,
    next_batch: usize,
    msg_batch: BTreeMap<MsgId, usize>,
}

struct Outgoing {
    msg: ControlMsg,
    timer: EventHandle,
    incident: Option<usize>,
}

struct Incident {
    link: LinkKey,
    detected: Option<(SimTime, NodeId)>,
    reported: bool,
    report_rx: Option<SimTime>,
    retries: u32,
    done: bool,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub records: Vec<PacketRecord>,
    pub anomalies: Vec<Anomaly>,
    pub trace: Vec<TraceLine>,
    /// (time, node, neighbor, up) for every liveness change a node noticed.
    pub detections: Vec<(SimTime, NodeId, NodeId, bool)>,
    pub modes: BTreeMap<NodeId, Vec<(SimTime, Mode)>>,
    /// Final flow table per node.
    pub tables: BTreeMap<NodeId, Vec<FlowRule>>,
}

pub struct World {
    trial: u32,
    p: Params,
    ids: Vec<NodeId>,
    demands: Vec<Demand>,
    traffic: TrafficSpec,
    changes: Vec<(SimTime, Change)>,
    sched: Scheduler<Ev>,
    truth: TopologyView,
    flaps: BTreeMap<LinkKey, u64>,
    nodes: BTreeMap<NodeId, Node>,
    ctrl: Controller,
    rng_ctrl: ChaCha8Rng,
    rng_data: ChaCha8Rng,
    next_msg: u64,
    next_pkt: u64,
    outgoing: BTreeMap<MsgId, Outgoing>,
    records: Vec<PacketRecord>,
    incidents: Vec<Incident>,
    active: BTreeMap<LinkKey, usize>,
    detections: Vec<(SimTime, NodeId, NodeId, bool)>,
    report: RunReport,
    trace: Option<Vec<TraceLine>>,
}

impl World {
    /// Builds the run and provisions every table for t = 0.
    pub fn new(cfg: &ScenarioConfig, seed: u64, trial: u32) -> World {
        let streams = RngStreams::new(seed);
        let truth = cfg.topology_view();
        let k = &cfg.knobs;
        let ids = cfg.node_ids();
        let n = ids.len();
        let graph = truth.data_graph();
        let size = k.cluster_size.unwrap_or(3.min(n)).max(1);
        let part = (cfg.method == Method::Cluster)
            .then(|| partition(&graph, size).expect("graph has nodes"));
        let depth = k.max_tag_depth.unwrap_or(match &part {
            Some(p) => p.len().max(1),
            None => n.max(1),
        });
        let hops = k.sync_scope.unwrap_or(n as u32).max(1);
        let sigma = SimTime(k.sync_period_us);
        let p = Params {
            method: cfg.method,
            tau: SimTime(k.heartbeat_period_us),
            k: k.heartbeat_misses,
            ka_period: SimTime(k.keepalive_period_us),
            ka_misses: k.keepalive_misses,
            window: SimTime(k.stability_window_us),
            pre_exec: k.pre_execution,
            discovery: SimTime(k.discovery_round_us),
            sigma,
            lsa_ttl: hops,
            lsa_max_age: sigma * 3 * hops.min(n as u32).max(1) as u64,
            size,
            budget: Budget(k.backup_budget),
            depth,
            latency: k.control_latency.clone(),
            rto: k.rto(),
            max_retries: k.max_retries,
            a_proc: SimTime(k.a_proc_us),
            t_install: SimTime(k.t_install_us),
            c_proc: SimTime(k.c_proc_us),
            ttl: k.ttl.unwrap_or(2 * n as u32),
            horizon: SimTime(k.horizon_us),
            width: truth.id_width(),
            recluster: k.recluster,
            activation: k.rto() * 2 + SimTime(k.a_proc_us + k.t_install_us),
        };

        let mut changes: Vec<(SimTime, Change)> = cfg
            .events
            .iter()
            .map(|e| {
                let c = match *e {
                    EventSpec::LinkDown { link, .. } => {
                        Change::Link(LinkKey::new(NodeId(link[0]), NodeId(link[1])), false)
                    }
                    EventSpec::LinkUp { link, .. } => {
                        Change::Link(LinkKey::new(NodeId(link[0]), NodeId(link[1])), true)
                    }
                    EventSpec::ControllerDown { .. } => Change::ControlAll(false),
                    EventSpec::ControllerUp { .. } => Change::ControlAll(true),
                    EventSpec::ControlLinkDown { node, .. } => Change::Control(NodeId(node), false),
                    EventSpec::ControlLinkUp { node, .. } => Change::Control(NodeId(node), true),
                    EventSpec::Migrate { node, .. } => Change::Migrate(NodeId(node)),
                    EventSpec::Resync { node, .. } => Change::Resync(NodeId(node)),
                    EventSpec::Recluster { .. } => Change::Recluster,
                };
                (e.at(), c)
            })
            .collect();
        if let Some(m) = &cfg.mobility {
            let links: Vec<LinkKey> = truth.data_links().map(|(k, _)| *k).collect();
            for ev in m.generate(&ids, &links, p.horizon, &mut streams.stream("mobility")) {
                changes.push((ev.at, Change::Link(ev.link, ev.up)));
            }
        }
        if cfg.method == Method::Cluster {
            if let Some(pol) = &p.recluster {
                for t in pol.periodic_instants(p.horizon) {
                    changes.push((t, Change::Recluster));
                }
            }
        }
        changes.sort_by_key(|(t, _)| *t);

        let ctrl_id = NodeId(cfg.topology.controller);
        let mut nodes = BTreeMap::new();
        for &id in &ids {
            let mut links = truth.data_neighbors(id);
            links.sort();
            let mode = if cfg.method == Method::PureDist {
                Mode::Distributed
            } else {
                Mode::Sdn
            };
            let syncing = match cfg.method {
                Method::PureDist | Method::Cluster => true,
                Method::Migration => p.pre_exec,
                Method::PureSdn | Method::Backup => false,
            };
            nodes.insert(
                id,
                Node {
                    table: FlowTable::new(k.table_capacity),
                    nbrs: NeighborTable::with_neighbors(links.iter().copied(), SimTime::ZERO),
                    links,
                    fsm: MigrationFsm::new(mode),
                    lsdb: Lsdb::default(),
                    lsa_seq: 0,
                    syncing,
                    member_of: part
                        .as_ref()
                        .map(|p| p.member_of.clone())
                        .unwrap_or_default(),
                    epoch: part.as_ref().map_or(0, |p| p.epoch as u64),
                    rules_epoch: part.as_ref().map_or(0, |p| p.epoch as u64),
                    switched_at: SimTime::ZERO,
                    staged: None,
                    floor: MsgId(0),
                    ka_timer: None,
                    pending: BTreeMap::new(),
                    reported_down: BTreeSet::new(),
                    seen: BTreeSet::new(),
                    versions: BTreeMap::new(),
                    applied: BTreeSet::new(),
                    compute: None,
                    resync_wait: None,
                },
            );
        }

        // Warm link-state databases: every node already knows the LSAs in
        // its flooding scope.
        let initial: BTreeMap<NodeId, Lsa> = nodes
            .iter()
            .map(|(&id, nd)| {
                let lsa = Lsa {
                    origin: id,
                    seq: 1,
                    links: nd.links.iter().map(|&x| (x, true)).collect(),
                    mode: nd.fsm.mode(),
                };
                (id, lsa)
            })
            .collect();
        for (&id, nd) in nodes.iter_mut() {
            nd.lsa_seq = 1;
            nd.lsdb.update(initial[&id].clone(), SimTime::ZERO);
            if !nd.syncing {
                continue;
            }
            let dist = graph.bfs(id);
            for (&o, lsa) in &initial {
                let in_scope = dist.get(&o).is_some_and(|&d| d <= hops);
                let same_cluster = nd.member_of.get(&o) == nd.member_of.get(&id);
                if o != id && in_scope && same_cluster {
                    nd.lsdb.update(lsa.clone(), SimTime::ZERO);
                }
            }
        }

        let overlay = part.as_ref().map(|p| overlay_graph(p, &graph));
        let ctrl = Controller {
            id: ctrl_id,
            believed: graph.clone(),
            desired: BTreeMap::new(),
            view: ids.iter().map(|&n| (n, View::Sdn)).collect(),
            commanded: BTreeSet::new(),
            last_echo: ids.iter().map(|&n| (n, SimTime::ZERO)).collect(),
            ka_seq: 0,
            partition: part,
            overlay,
            partition_graph: graph,
            staged: None,
            recluster_again: false,
            report_at: BTreeMap::new(),
            seen: BTreeSet::new(),
            compute_pending: false,
            queued: Vec::new(),
            resync: BTreeSet::new(),
            dirty: BTreeSet::new(),
            batches: BTreeMap::new(),
            next_batch: 0,
            msg_batch: BTreeMap::new(),
        };

        let mut w = World {
            trial,
            demands: cfg.demands(),
            traffic: cfg.traffic.clone(),
            changes,
            sched: Scheduler::new(),
            truth,
            flaps: BTreeMap::new(),
            nodes,
            ctrl,
            rng_ctrl: streams.stream("control"),
            rng_data: streams.stream("data"),
            next_msg: 1,
            next_pkt: 0,
            outgoing: BTreeMap::new(),
            records: Vec::new(),
            incidents: Vec::new(),
            active: BTreeMap::new(),
            detections: Vec::new(),
            report: RunReport::default(),
            trace: None,
            ids,
            p,
        };
        w.provision(&streams);
        w
    }

    /// Keeps a per-event trace (off by default; it can be large).
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    /// Schedules one extra packet from `src` to `dst` at `at`.
    pub fn inject(&mut self, src: NodeId, dst: NodeId, at: SimTime) {
        self.sched
            .schedule_at(at.max(self.sched.now()), Ev::Inject { src, dst })
            .expect("not in the past");
    }

    fn provision(&mut self, streams: &RngStreams) {
        let desired = self.controller_desired();
        for (n, rules) in desired {
            let nd = self.nodes.get_mut(&n).expect("known node");
            for r in rules.values() {
                let _ = nd.table.install(r.clone());
            }
            self.ctrl.desired.insert(n, rules);
        }
        for id in self.ids.clone() {
            if self.computes_locally(id) {
                let rules = self.local_rules(id);
                let nd = self.nodes.get_mut(&id).expect("known node");
                for r in rules {
                    let _ = nd.table.install(r);
                }
            }
        }

        let mut hb = streams.stream("heartbeat-phase");
        let mut lsa = streams.stream("lsa-phase");
        for id in self.ids.clone() {
            let phase = SimTime(hb.random_range(0..self.p.tau.0));
            self.sched
                .schedule_at(phase, Ev::Tick { node: id })
                .expect("future");
            let u: f64 = lsa.random();
            if self.nodes[&id].syncing {
                let at = SimTime((u * self.p.sigma.0 as f64) as u64);
                self.sched
                    .schedule_at(at, Ev::LsaTick { node: id })
                    .expect("future");
            }
        }
        if self.p.method == Method::Migration {
            self.sched
                .schedule_at(SimTime::ZERO, Ev::KeepaliveTick)
                .expect("future");
            for id in self.ids.clone() {
                let h = self.sched.schedule_in(
                    self.p.ka_period * self.p.ka_misses as u64,
                    Ev::KeepaliveTimeout { node: id },
                );
                self.nodes.get_mut(&id).expect("known node").ka_timer = Some(h);
            }
        }
        for idx in 0..self.changes.len() {
            let at = self.changes[idx].0;
            self.sched
                .schedule_at(at, Ev::Scenario { idx })
                .expect("future");
        }
        let start = SimTime(self.traffic.start_us);
        if start <= self.p.horizon && !self.demands.is_empty() {
            self.sched.schedule_at(start, Ev::Traffic).expect("future");
        }
    }

    pub fn run(mut self) -> RunOutput {
        while let Some(ev) = self.sched.pop_until(self.p.horizon) {
            if let Some(t) = &mut self.trace {
                t.push(TraceLine {
                    t_us: ev.fire_time.0,
                    seq: ev.seq,
                    class: ev.payload.class(),
                    event: ev.payload.label(),
                });
            }
            self.handle(ev.payload);
        }
        self.sched.advance_to(self.p.horizon);
        self.finish()
    }

    fn finish(mut self) -> RunOutput {
        let mut flying: Vec<Packet> = self
            .sched
            .pending()
            .filter_map(|e| match e {
                Ev::Packet { pkt, .. } => Some((**pkt).clone()),
                _ => None,
            })
            .collect();
        flying.sort_by_key(|p| p.id);
        for pkt in flying {
            self.report.in_flight += 1;
            self.records.push(PacketRecord {
                id: pkt.id,
                src: pkt.src,
                dst: pkt.dst,
                injected_at: pkt.injected_at,
                fate: Fate::InFlight,
                path: pkt.path_log,
            });
        }
        self.records.sort_by_key(|r| r.id);

        for inc in &self.incidents {
            if let (Some((at, _)), false) = (inc.detected, inc.done) {
                self.report.incidents.censored += 1;
                self.report.censored.push(CensoredSample {
                    trial: self.trial,
                    method: self.p.method,
                    link: inc.link,
                    detected_at: at,
                });
            }
            if inc.done && !inc.reported {
                self.report.incidents.handled_locally += 1;
            }
            if inc.reported {
                self.report.incidents.reported += 1;
            }
        }
        let mut tables = BTreeMap::new();
        let mut modes = BTreeMap::new();
        for (&id, nd) in &self.nodes {
            self.report
                .rule_high_water
                .insert(id, nd.table.high_water());
            self.report.table_overflows += nd.table.overflows();
            tables.insert(id, nd.table.rules().to_vec());
            modes.insert(id, nd.fsm.history().to_vec());
        }
        let anomalies = detect_loops(&self.records);
        self.report.anomalies = anomalies.len() as u64;
        RunOutput {
            report: self.report,
            records: self.records,
            anomalies,
            trace: self.trace.unwrap_or_default(),
            detections: self.detections,
            modes,
            tables,
        }
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    fn node(&mut self, id: NodeId) -> &mut Node {
        self.nodes.get_mut(&id).expect("known node")
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::Packet {
                node,
                from,
                flap,
                pkt,
            } => {
                if self.flap(LinkKey::new(node, from)) != flap {
                    let at = self.now();
                    self.finish_packet(
                        *pkt,
                        Fate::Dropped {
                            at,
                            node: from,
                            reason: DropReason::LinkDown,
                        },
                    );
                } else {
                    self.at_node(node, pkt);
                }
            }
            Ev::Heartbeat { to, hb, flap } => {
                if self.flap(LinkKey::new(to, hb.sender)) == flap {
                    let now = self.now();
                    if let Some(d) = self.node(to).nbrs.on_heartbeat(hb.sender, now) {
                        self.on_detection(to, d);
                    }
                }
            }
            Ev::Lsa {
                to,
                from,
                lsa,
                ttl,
                flap,
            } => {
                if self.flap(LinkKey::new(to, from)) == flap {
                    self.on_lsa(to, from, lsa, ttl);
                }
            }
            Ev::Traffic => {
                for d in self.demands.clone() {
                    self.inject_now(d.src, d.dst);
                }
                let next = self.now() + SimTime(self.traffic.interval_us);
                let stop = self.traffic.stop_us.map_or(self.p.horizon, SimTime);
                if next <= stop {
                    self.sched.schedule_at(next, Ev::Traffic).expect("future");
                }
            }
            Ev::Inject { src, dst } => self.inject_now(src, dst),
            Ev::Tick { node } => self.on_tick(node),
            Ev::LsaTick { node } => self.on_lsa_tick(node),
            Ev::CtrlDeliver { msg } => self.on_deliver(msg),
            Ev::CtrlRetry { id } => self.on_retry(id),
            Ev::KeepaliveTick => self.on_keepalive_tick(),
            Ev::KeepaliveTimeout { node } => {
                self.node(node).ka_timer = None;
                self.fsm_event(node, MigrationEvent::KeepaliveTimeout);
            }
            Ev::DiscoveryDone { node } => self.fsm_event(node, MigrationEvent::LsdbReady),
            Ev::Scenario { idx } => {
                let change = self.changes[idx].1;
                self.apply_change(change);
            }
            Ev::AgentCompute { node } => self.on_agent_compute(node),
            Ev::AgentCommit {
                node,
                epoch,
                rules,
                incidents,
                started,
                computed,
            } => self.on_agent_commit(node, epoch, rules, incidents, started, computed),
            Ev::CtrlCompute => self.on_ctrl_compute(),
            Ev::CtrlActivate { epoch } => self.on_ctrl_activate(epoch),
            Ev::NodeActivate { node, epoch } => {
                if let Some(s) = self.node(node).staged.take_if(|s| s.epoch == epoch) {
                    self.switch_partition(node, s, true);
                }
            }
            Ev::Install {
                node,
                msg,
                rules,
                removes,
            } => self.on_install(node, msg, rules, removes),
        }
    }

    fn flap(&self, key: LinkKey) -> u64 {
        self.flaps.get(&key).copied().unwrap_or(0)
    }

    // ---- data plane ----

    fn inject_now(&mut self, src: NodeId, dst: NodeId) {
        let now = self.now();
        let id = self.next_pkt;
        self.next_pkt += 1;
        let mut pkt = Packet::new(id, src, dst, self.p.depth, now);
        pkt.epoch = self.nodes[&src].epoch as u32;
        pkt.probe = true;
        self.report.generated += 1;
        self.at_node(src, Box::new(pkt));
    }

    fn at_node(&mut self, at: NodeId, mut pkt: Box<Packet>) {
        let now = self.now();
        let mut queried = false;
        if self.p.method == Method::Cluster && at != pkt.dst {
            let nd = &self.nodes[&at];
            let behind = (pkt.epoch as u64) < nd.epoch;
            // sent after this node switched, so its source missed the switch;
            // routing it back there would bounce
            let stale_src = behind && pkt.injected_at > nd.switched_at;
            if behind && !stale_src && !pkt.stack.is_empty() {
                self.retag(at, &mut pkt);
                queried = true;
            }
            // tags and intra routes of a newer partition mean something else
            // under older rules; forwarding anyway can loop
            if stale_src || pkt.epoch as u64 > self.nodes[&at].rules_epoch {
                pkt.path_log.push(PathEntry {
                    node: at,
                    stack_len: pkt.stack.len() as u16,
                    rule: None,
                });
                let reason = DropReason::StaleEpoch;
                self.finish_packet(
                    *pkt,
                    Fate::Dropped {
                        at: now,
                        node: at,
                        reason,
                    },
                );
                return;
            }
        }
        let ttl = self.p.ttl;
        let nd = &self.nodes[&at];
        let mut verdict = process(&nd.table, at, &mut pkt, ttl, |n| nd.nbrs.is_alive(n));
        if matches!(verdict, Verdict::Miss) && !queried && self.foreign_without_route(at, &pkt) {
            // push rules for a new partition not installed yet: ask for the route
            pkt.path_log.pop();
            self.retag(at, &mut pkt);
            queried = true;
            let nd = &self.nodes[&at];
            verdict = process(&nd.table, at, &mut pkt, ttl, |n| nd.nbrs.is_alive(n));
        }
        match verdict {
            Verdict::Delivered => self.finish_packet(*pkt, Fate::Delivered { at: now }),
            Verdict::Forward { next, .. } => self.send_packet(at, next, pkt),
            Verdict::Drop { cause, .. } => self.finish_packet(
                *pkt,
                Fate::Dropped {
                    at: now,
                    node: at,
                    reason: cause.into(),
                },
            ),
            Verdict::Miss => {
                let sdn = match self.p.method {
                    Method::PureSdn | Method::Backup => true,
                    Method::Migration => self.nodes[&at].fsm.mode() == Mode::Sdn,
                    Method::PureDist | Method::Cluster => false,
                };
                let reason = if sdn {
                    let dst = pkt.dst;
                    self.send_ctrl(at, self.ctrl.id, ControlPayload::MissReport { dst }, None);
                    DropReason::Miss
                } else if queried {
                    // the controller answered from a partition this node has not adopted yet
                    DropReason::Miss
                } else if self.nodes[&at].rules_epoch < self.nodes[&at].epoch {
                    DropReason::StaleEpoch
                } else {
                    DropReason::DeadEnd
                };
                self.finish_packet(
                    *pkt,
                    Fate::Dropped {
                        at: now,
                        node: at,
                        reason,
                    },
                );
            }
        }
    }

    /// Cluster method: an untagged packet for a destination this node
    /// places in another cluster.
    fn foreign_without_route(&self, at: NodeId, pkt: &Packet) -> bool {
        if self.p.method != Method::Cluster || !pkt.stack.is_empty() {
            return false;
        }
        let m = &self.nodes[&at].member_of;
        m.get(&pkt.dst).is_some_and(|c| m.get(&at) != Some(c))
    }

    /// Adopts a partition. On time, the rules were precomputed while the
    /// assignment was staged and go in at once; late, they are computed now.
    fn switch_partition(&mut self, id: NodeId, s: Staged, on_time: bool) {
        let now = self.now();
        let nd = self.node(id);
        nd.epoch = s.epoch;
        nd.member_of = s.members;
        nd.switched_at = now;
        nd.floor = s.msg;
        // push rules name clusters of the old partition
        let Node {
            table, versions, ..
        } = nd;
        table.retain(|r| {
            r.origin != RuleOrigin::Controller || versions.get(&r.key()).is_some_and(|v| *v > s.msg)
        });
        if on_time {
            let rules = self.local_rules(id);
            let nd = self.node(id);
            let keys: BTreeSet<RuleKey> = rules.iter().map(|r| r.key()).collect();
            nd.table
                .retain(|r| r.origin != RuleOrigin::LocalAgent || keys.contains(&r.key()));
            for r in rules {
                let _ = nd.table.install(r);
            }
            nd.rules_epoch = s.epoch;
        } else {
            self.request_agent_compute(id, Vec::new());
        }
        self.originate_lsa(id);
    }

    /// Rewrites a stale tag stack from the controller's current partition.
    /// Costs one query and one reply on the control channel.
    fn retag(&mut self, at: NodeId, pkt: &mut Packet) {
        for kind in [
            crate::controller::MsgKind::ClusterRouteQuery,
            crate::controller::MsgKind::ClusterRouteReply,
        ] {
            *self.report.overhead.by_kind.entry(kind).or_default() += 1;
            self.report.overhead.controller += 1;
        }
        let (Some(p), Some(o)) = (&self.ctrl.partition, &self.ctrl.overlay) else {
            return;
        };
        pkt.stack = match compute_cluster_sequence(at, pkt.dst, p, o) {
            Ok(seq) => TagStack::from_clusters(&seq, self.p.depth)
                .unwrap_or_else(|_| TagStack::new(self.p.depth)),
            Err(_) => TagStack::new(self.p.depth),
        };
        pkt.epoch = p.epoch;
    }

    fn send_packet(&mut self, from: NodeId, to: NodeId, pkt: Box<Packet>) {
        let now = self.now();
        let key = LinkKey::new(from, to);
        let (latency, loss) = match self.truth.link(from, to) {
            Some(a) if a.up => (a.latency, a.loss_prob),
            _ => {
                self.finish_packet(
                    *pkt,
                    Fate::Dropped {
                        at: now,
                        node: from,
                        reason: DropReason::LinkDown,
                    },
                );
                return;
            }
        };
        if loss > 0.0 && self.rng_data.random::<f64>() < loss {
            self.finish_packet(
                *pkt,
                Fate::Dropped {
                    at: now,
                    node: from,
                    reason: DropReason::Loss,
                },
            );
            return;
        }
        let flap = self.flap(key);
        self.sched.schedule_in(
            latency,
            Ev::Packet {
                node: to,
                from,
                flap,
                pkt,
            },
        );
    }

    fn finish_packet(&mut self, pkt: Packet, fate: Fate) {
        match &fate {
            Fate::Delivered { .. } => self.report.delivered += 1,
            Fate::Dropped { reason, .. } => {
                self.report.dropped += 1;
                *self
                    .report
                    .drops_by_reason
                    .entry(reason.label().to_string())
                    .or_default() += 1;
            }
            Fate::InFlight => self.report.in_flight += 1,
        }
        self.records.push(PacketRecord {
            id: pkt.id,
            src: pkt.src,
            dst: pkt.dst,
            injected_at: pkt.injected_at,
            fate,
            path: pkt.path_log,
        });
    }

    // ---- liveness and link state ----

    fn on_tick(&mut self, id: NodeId) {
        let now = self.now();
        let (tau, k) = (self.p.tau, self.p.k);
        let dets = self.node(id).nbrs.check_liveness(now, tau, k);
        for d in dets {
            self.on_detection(id, d);
        }
        for n in self.nodes[&id].links.clone() {
            let hb = self.node(id).nbrs.next_heartbeat(id, n, now);
            self.report.overhead.heartbeats += 1;
            if let Some(lat) = self.carry(id, n) {
                let flap = self.flap(LinkKey::new(id, n));
                self.sched
                    .schedule_in(lat, Ev::Heartbeat { to: n, hb, flap });
            }
        }
        self.sched.schedule_in(tau, Ev::Tick { node: id });
    }

    /// Latency for a control-plane frame on a data link, or None if it is lost.
    fn carry(&mut self, a: NodeId, b: NodeId) -> Option<SimTime> {
        let attr = self.truth.link(a, b).filter(|l| l.up)?;
        let (lat, loss) = (attr.latency, attr.loss_prob);
        if loss > 0.0 && self.rng_data.random::<f64>() < loss {
            return None;
        }
        Some(lat)
    }

    fn open_incident(&self, link: LinkKey) -> Option<usize> {
        self.active
            .get(&link)
            .copied()
            .filter(|&i| !self.incidents[i].done)
    }

    fn on_detection(&mut self, me: NodeId, d: Detection) {
        let now = self.now();
        let link = LinkKey::new(me, d.neighbor);
        self.detections.push((now, me, d.neighbor, d.up));
        let inc = if d.up { None } else { self.open_incident(link) };
        if let Some(i) = inc {
            if self.incidents[i].detected.is_none() {
                self.incidents[i].detected = Some((now, me));
                self.report.incidents.detected += 1;
            }
        }
        self.originate_lsa(me);
        let incs: Vec<usize> = inc.into_iter().collect();
        match self.p.method {
            Method::PureSdn => self.report_link(me, link, d.up, inc),
            Method::Backup => {
                if !d.up {
                    let act = activate_backup(&self.nodes[&me].table, d.neighbor);
                    if act.fully_covered() {
                        if let Some(i) = inc.filter(|&i| !self.incidents[i].reported) {
                            self.complete(i, [0, 0, 0, 0]);
                        }
                    } else {
                        self.report.incidents.uncovered += 1;
                        self.report_link(me, link, false, inc);
                    }
                } else if self.nodes[&me].reported_down.contains(&d.neighbor) {
                    self.report_link(me, link, true, None);
                }
            }
            Method::PureDist => self.request_agent_compute(me, incs),
            Method::Migration => {
                match self.nodes[&me].fsm.mode() {
                    Mode::Sdn => self.report_link(me, link, d.up, inc),
                    _ => {
                        if d.up {
                            self.node(me).reported_down.remove(&d.neighbor);
                        } else {
                            self.node(me).reported_down.insert(d.neighbor);
                        }
                        self.node(me).pending.insert(link, (d.up, None));
                    }
                }
                if self.nodes[&me].fsm.mode() == Mode::Distributed {
                    self.request_agent_compute(me, incs);
                }
            }
            Method::Cluster => {
                let report = if d.up {
                    self.nodes[&me].reported_down.contains(&d.neighbor)
                } else {
                    !self.cluster_local(me, d.neighbor)
                };
                if report {
                    self.report_link(me, link, d.up, inc);
                }
                self.request_agent_compute(me, incs);
            }
        }
    }

    /// A failure toward `nb` needs no controller help when another link still
    /// joins the two clusters, or when `nb` is in the same cluster and the
    /// cluster either stays connected or splits off a part that only it can
    /// reach (reclustering could not help there).
    fn cluster_local(&self, me: NodeId, nb: NodeId) -> bool {
        let nd = &self.nodes[&me];
        let (Some(a), Some(b)) = (nd.member_of.get(&me), nd.member_of.get(&nb)) else {
            return false;
        };
        let of = |c: &ClusterId| -> BTreeSet<NodeId> {
            nd.member_of
                .iter()
                .filter(|(_, x)| *x == c)
                .map(|(n, _)| *n)
                .collect()
        };
        if a != b {
            return !nd.lsdb.links_between(&of(a), &of(b)).is_empty();
        }
        let members = of(a);
        let intra = nd.lsdb.graph(Some(&members));
        let mine = intra.bfs(me);
        if mine.contains_key(&nb) {
            return true;
        }
        let whole = nd.lsdb.graph(None);
        let exits = |part: &BTreeSet<NodeId>| {
            part.iter()
                .any(|&x| whole.neighbors(x).any(|y| !members.contains(&y)))
        };
        let theirs: BTreeSet<NodeId> = intra.bfs(nb).into_keys().collect();
        !(exits(&mine.into_keys().collect()) && exits(&theirs))
    }

    fn originate_lsa(&mut self, id: NodeId) {
        let now = self.now();
        let nd = self.node(id);
        nd.lsa_seq += 1;
        let lsa = Lsa {
            origin: id,
            seq: nd.lsa_seq,
            links: nd.links.iter().map(|&n| (n, nd.nbrs.is_alive(n))).collect(),
            mode: nd.fsm.mode(),
        };
        nd.lsdb.update(lsa.clone(), now);
        if nd.syncing {
            let ttl = self.p.lsa_ttl;
            self.flood(id, None, lsa, ttl);
        }
    }

    fn flood(&mut self, from: NodeId, except: Option<NodeId>, lsa: Lsa, ttl: u32) {
        let nd = &self.nodes[&from];
        let cluster = self.p.method == Method::Cluster;
        let targets: Vec<NodeId> = nd
            .links
            .iter()
            .copied()
            .filter(|&n| Some(n) != except && nd.nbrs.is_alive(n))
            .filter(|n| !cluster || nd.member_of.get(n) == nd.member_of.get(&from))
            .collect();
        for n in targets {
            self.report.overhead.lsas += 1;
            if let Some(lat) = self.carry(from, n) {
                let flap = self.flap(LinkKey::new(from, n));
                self.sched.schedule_in(
                    lat,
                    Ev::Lsa {
                        to: n,
                        from,
                        lsa: lsa.clone(),
                        ttl,
                        flap,
                    },
                );
            }
        }
    }

    fn on_lsa(&mut self, to: NodeId, from: NodeId, lsa: Lsa, ttl: u32) {
        let now = self.now();
        if self.p.method == Method::Cluster {
            let nd = &self.nodes[&to];
            if nd.member_of.get(&lsa.origin) != nd.member_of.get(&to) {
                return;
            }
        }
        if !self.nodes[&to].syncing {
            if self.p.method != Method::Migration {
                return;
            }
            self.start_sync(to);
        }
        let upd = self.node(to).lsdb.update(lsa.clone(), now);
        if upd.is_newer() && ttl > 1 {
            self.flood(to, Some(from), lsa, ttl - 1);
        }
        if upd == LsaUpdate::Changed && self.computes_locally(to) {
            self.request_agent_compute(to, Vec::new());
        }
    }

    fn start_sync(&mut self, id: NodeId) {
        if self.nodes[&id].syncing {
            return;
        }
        self.node(id).syncing = true;
        self.originate_lsa(id);
        self.sched
            .schedule_in(self.p.sigma, Ev::LsaTick { node: id });
    }

    fn on_lsa_tick(&mut self, id: NodeId) {
        if !self.nodes[&id].syncing {
            return;
        }
        let now = self.now();
        let age = self.p.lsa_max_age;
        if self.node(id).lsdb.expire(now, age) && self.computes_locally(id) {
            self.request_agent_compute(id, Vec::new());
        }
        self.originate_lsa(id);
        self.sched
            .schedule_in(self.p.sigma, Ev::LsaTick { node: id });
    }

    // ---- local computation ----

    fn computes_locally(&self, id: NodeId) -> bool {
        match self.p.method {
            Method::PureDist | Method::Cluster => true,
            Method::Migration => self.nodes[&id].fsm.mode() == Mode::Distributed,
            Method::PureSdn | Method::Backup => false,
        }
    }

    fn local_rules(&self, id: NodeId) -> Vec<FlowRule> {
        let nd = &self.nodes[&id];
        let g = nd.lsdb.graph(None);
        match self.p.method {
            Method::Cluster => cluster_rules(id, &nd.member_of, &g, self.p.width),
            _ => {
                let mut dist: BTreeSet<NodeId> = g
                    .nodes()
                    .filter(|&n| nd.lsdb.mode_of(n) == Some(Mode::Distributed))
                    .collect();
                dist.insert(id);
                distributed_rules(id, &g, &dist, self.p.width)
            }
        }
    }

    fn request_agent_compute(&mut self, id: NodeId, incidents: Vec<usize>) {
        let now = self.now();
        let a_proc = self.p.a_proc;
        let nd = self.node(id);
        match &mut nd.compute {
            Some((_, v)) => v.extend(incidents),
            None => {
                nd.compute = Some((now, incidents));
                self.sched
                    .schedule_in(a_proc, Ev::AgentCompute { node: id });
            }
        }
    }

    fn on_agent_compute(&mut self, id: NodeId) {
        let Some((started, incidents)) = self.node(id).compute.take() else {
            return;
        };
        if !self.computes_locally(id) {
            return;
        }
        let rules = self.local_rules(id);
        let computed = self.now();
        self.sched.schedule_in(
            self.p.t_install,
            Ev::AgentCommit {
                node: id,
                epoch: self.nodes[&id].epoch,
                rules,
                incidents,
                started,
                computed,
            },
        );
    }

    fn on_agent_commit(
        &mut self,
        id: NodeId,
        epoch: u64,
        rules: Vec<FlowRule>,
        incidents: Vec<usize>,
        started: SimTime,
        computed: SimTime,
    ) {
        if !self.computes_locally(id) {
            return;
        }
        if epoch < self.nodes[&id].epoch {
            // computed for a partition this node has left
            self.request_agent_compute(id, incidents);
            return;
        }
        let now = self.now();
        let nd = self.node(id);
        nd.rules_epoch = nd.rules_epoch.max(epoch);
        let keys: BTreeSet<RuleKey> = rules.iter().map(|r| r.key()).collect();
        nd.table
            .retain(|r| r.origin != RuleOrigin::LocalAgent || keys.contains(&r.key()));
        for r in rules {
            let _ = nd.table.install(r);
        }
        let distributed = nd.fsm.mode() == Mode::Distributed;
        for i in incidents {
            let inc = &self.incidents[i];
            let Some((det, _)) = inc.detected else {
                continue;
            };
            if inc.done || (inc.reported && !distributed) {
                continue;
            }
            let begin = started.max(det);
            self.complete(
                i,
                [
                    started.saturating_sub(det).0,
                    computed.saturating_sub(begin).0,
                    0,
                    now.saturating_sub(computed).0,
                ],
            );
        }
    }

    fn complete(&mut self, i: usize, parts: [u64; 4]) {
        let inc = &mut self.incidents[i];
        if inc.done {
            return;
        }
        inc.done = true;
        self.report.incidents.completed += 1;
        self.report.samples.push(DelaySample {
            trial: self.trial,
            method: self.p.method,
            link: inc.link,
            delay_us: parts.iter().sum(),
            signal_up_us: parts[0],
            compute_us: parts[1],
            signal_down_us: parts[2],
            install_us: parts[3],
            retries: inc.retries,
        });
    }

    fn fsm_event(&mut self, id: NodeId, ev: MigrationEvent) {
        let now = self.now();
        match self.node(id).fsm.step(ev, now) {
            Some(Mode::Migrating) => {
                self.start_sync(id);
                self.originate_lsa(id);
                if self.p.pre_exec {
                    self.fsm_event(id, MigrationEvent::LsdbReady);
                } else {
                    self.sched
                        .schedule_in(self.p.discovery, Ev::DiscoveryDone { node: id });
                }
            }
            Some(Mode::Distributed) => {
                self.originate_lsa(id);
                let incs: Vec<usize> = self
                    .incidents
                    .iter()
                    .enumerate()
                    .filter(|(_, inc)| !inc.done && inc.detected.is_some() && inc.link.touches(id))
                    .map(|(i, _)| i)
                    .collect();
                self.request_agent_compute(id, incs);
            }
            Some(Mode::Sdn) => {
                let nd = self.node(id);
                nd.table.retain(|r| r.origin != RuleOrigin::LocalAgent);
                nd.compute = None;
                self.originate_lsa(id);
            }
            None => {}
        }
    }

    // ---- control channel ----

    fn send_ctrl(
        &mut self,
        from: NodeId,
        to: NodeId,
        payload: ControlPayload,
        incident: Option<usize>,
    ) -> MsgId {
        let id = MsgId(self.next_msg);
        self.next_msg += 1;
        let msg = ControlMsg::new(id, from, to, payload);
        if msg.payload.reliable() {
            let timer = self.sched.schedule_in(self.p.rto, Ev::CtrlRetry { id });
            self.outgoing.insert(
                id,
                Outgoing {
                    msg: msg.clone(),
                    timer,
                    incident,
                },
            );
        }
        self.transmit(msg);
        id
    }

    fn transmit(&mut self, msg: ControlMsg) {
        *self.report.overhead.by_kind.entry(msg.kind).or_default() += 1;
        self.report.overhead.controller += 1;
        let node = if msg.from == self.ctrl.id {
            msg.to
        } else {
            msg.from
        };
        let Some(attr) = self.truth.link(node, self.ctrl.id).filter(|a| a.up) else {
            return;
        };
        let loss = attr.loss_prob;
        let lat = self.p.latency.sample(&mut self.rng_ctrl);
        let lost = self.rng_ctrl.random::<f64>() < loss;
        if !lost {
            self.sched.schedule_in(lat, Ev::CtrlDeliver { msg });
        }
    }

    fn on_retry(&mut self, id: MsgId) {
        let Some(o) = self.outgoing.get_mut(&id) else {
            return;
        };
        if o.msg.retry >= self.p.max_retries {
            let o = self.outgoing.remove(&id).expect("present");
            self.report.incidents.undeliverable += 1;
            if matches!(
                o.msg.payload,
                ControlPayload::RuleInstall { .. } | ControlPayload::RuleRemove { .. }
            ) {
                self.ctrl.dirty.insert(o.msg.to);
            }
            return;
        }
        o.msg.retry += 1;
        let msg = o.msg.clone();
        let inc = o.incident;
        let timer = self.sched.schedule_in(self.p.rto, Ev::CtrlRetry { id });
        self.outgoing.get_mut(&id).expect("present").timer = timer;
        self.report.overhead.retransmissions += 1;
        if let Some(i) = inc {
            self.incidents[i].retries += 1;
        }
        if let Some(b) = self
            .ctrl
            .msg_batch
            .get(&id)
            .and_then(|b| self.ctrl.batches.get(b))
        {
            for &i in &b.incidents {
                self.incidents[i].retries += 1;
            }
        }
        self.transmit(msg);
    }

    fn on_deliver(&mut self, msg: ControlMsg) {
        let node = if msg.from == self.ctrl.id {
            msg.to
        } else {
            msg.from
        };
        if !self.truth.is_up(node, self.ctrl.id) {
            return;
        }
        if msg.payload.reliable() {
            self.send_ctrl(msg.to, msg.from, ControlPayload::Ack { of: msg.id }, None);
            let fresh = if msg.to == self.ctrl.id {
                self.ctrl.seen.insert(msg.id)
            } else {
                self.node(msg.to).seen.insert(msg.id)
            };
            if !fresh {
                return;
            }
        }
        if msg.to == self.ctrl.id {
            self.controller_rx(msg);
        } else {
            self.node_rx(msg);
        }
    }

    fn acked(&mut self, of: MsgId) {
        let Some(o) = self.outgoing.remove(&of) else {
            return;
        };
        self.sched.cancel(o.timer);
        if let ControlPayload::LinkReport { link, .. } = o.msg.payload {
            let nd = self.node(o.msg.from);
            if nd.pending.get(&link).is_some_and(|(_, id)| *id == Some(of)) {
                nd.pending.remove(&link);
            }
        }
    }

    fn report_link(&mut self, me: NodeId, link: LinkKey, up: bool, inc: Option<usize>) {
        let now = self.now();
        let nb = link.other(me).expect("link touches node");
        if up {
            self.node(me).reported_down.remove(&nb);
        } else {
            self.node(me).reported_down.insert(nb);
        }
        if let Some(i) = inc {
            self.incidents[i].reported = true;
        }
        let id = self.send_ctrl(
            me,
            self.ctrl.id,
            ControlPayload::LinkReport {
                link,
                up,
                detected_at: now,
            },
            inc,
        );
        self.node(me).pending.insert(link, (up, Some(id)));
    }

    fn flush_reports(&mut self, me: NodeId) {
        let owed: Vec<(LinkKey, bool)> = self.nodes[&me]
            .pending
            .iter()
            .filter(|(_, (_, id))| id.is_none_or(|id| !self.outgoing.contains_key(&id)))
            .map(|(l, (up, _))| (*l, *up))
            .collect();
        for (link, up) in owed {
            let inc = if up { None } else { self.open_incident(link) };
            self.report_link(me, link, up, inc);
        }
    }

    fn node_rx(&mut self, msg: ControlMsg) {
        let id = msg.to;
        let now = self.now();
        match msg.payload {
            ControlPayload::Ack { of } => self.acked(of),
            ControlPayload::RuleInstall { rules } => {
                if let Some(b) = self
                    .ctrl
                    .msg_batch
                    .get(&msg.id)
                    .and_then(|b| self.ctrl.batches.get_mut(b))
                {
                    b.last_delivery = b.last_delivery.max(now);
                }
                let t = self.p.t_install;
                self.sched.schedule_in(
                    t,
                    Ev::Install {
                        node: id,
                        msg: msg.id,
                        rules,
                        removes: Vec::new(),
                    },
                );
            }
            ControlPayload::RuleRemove { keys } => {
                if let Some(b) = self
                    .ctrl
                    .msg_batch
                    .get(&msg.id)
                    .and_then(|b| self.ctrl.batches.get_mut(b))
                {
                    b.last_delivery = b.last_delivery.max(now);
                }
                let t = self.p.t_install;
                self.sched.schedule_in(
                    t,
                    Ev::Install {
                        node: id,
                        msg: msg.id,
                        rules: Vec::new(),
                        removes: keys,
                    },
                );
            }
            ControlPayload::MigrateCmd => self.fsm_event(id, MigrationEvent::MigrateCmd),
            ControlPayload::ResyncCmd { installs } => {
                if self.nodes[&id].fsm.mode() == Mode::Distributed {
                    self.node(id).resync_wait = Some(installs.into_iter().collect());
                    self.check_resync(id);
                }
            }
            ControlPayload::ClusterAssign {
                epoch,
                members,
                activate_at,
            } => {
                let nd = &self.nodes[&id];
                if epoch > nd.epoch && nd.staged.as_ref().is_none_or(|s| epoch > s.epoch) {
                    let s = Staged {
                        epoch,
                        members: members.into_iter().collect(),
                        msg: msg.id,
                    };
                    if now >= activate_at {
                        self.switch_partition(id, s, false);
                    } else {
                        self.node(id).staged = Some(s);
                        self.sched
                            .schedule_at(activate_at, Ev::NodeActivate { node: id, epoch })
                            .expect("future");
                    }
                }
            }
            ControlPayload::Keepalive { seq } => {
                if let Some(h) = self.node(id).ka_timer.take() {
                    self.sched.cancel(h);
                }
                let h = self.sched.schedule_in(
                    self.p.ka_period * self.p.ka_misses as u64,
                    Ev::KeepaliveTimeout { node: id },
                );
                self.node(id).ka_timer = Some(h);
                self.fsm_event(id, MigrationEvent::KeepaliveRx);
                let mode = self.nodes[&id].fsm.mode();
                self.send_ctrl(
                    id,
                    self.ctrl.id,
                    ControlPayload::KeepaliveEcho { seq, mode },
                    None,
                );
                self.flush_reports(id);
            }
            _ => {}
        }
    }

    fn on_install(
        &mut self,
        id: NodeId,
        msg: MsgId,
        mut rules: Vec<FlowRule>,
        mut removes: Vec<RuleKey>,
    ) {
        let now = self.now();
        let nd = self.node(id);
        if msg < nd.floor {
            // issued for a partition this node has left
            rules.clear();
            removes.clear();
        }
        for r in rules {
            let k = r.key();
            if nd.versions.get(&k).is_some_and(|v| *v > msg) {
                continue;
            }
            nd.versions.insert(k, msg);
            let _ = nd.table.install(r);
        }
        for k in removes {
            if nd.versions.get(&k).is_some_and(|v| *v > msg) {
                continue;
            }
            nd.versions.insert(k, msg);
            nd.table.remove_key(&k);
        }
        nd.applied.insert(msg);
        if let Some(bid) = self.ctrl.msg_batch.remove(&msg) {
            let b = self.ctrl.batches.get_mut(&bid).expect("batch");
            b.outstanding.remove(&msg);
            if b.outstanding.is_empty() {
                let b = self.ctrl.batches.remove(&bid).expect("batch");
                for i in b.incidents {
                    self.complete_via_controller(i, b.computed, b.last_delivery, now);
                }
            }
        }
        self.check_resync(id);
    }

    fn complete_via_controller(
        &mut self,
        i: usize,
        computed: SimTime,
        delivered: SimTime,
        committed: SimTime,
    ) {
        let inc = &self.incidents[i];
        let Some((det, _)) = inc.detected else { return };
        let rx = inc.report_rx.unwrap_or(det).max(det);
        self.complete(
            i,
            [
                rx.saturating_sub(det).0,
                computed.saturating_sub(rx).0,
                delivered.saturating_sub(computed).0,
                committed.saturating_sub(delivered).0,
            ],
        );
    }

    fn check_resync(&mut self, id: NodeId) {
        let nd = self.node(id);
        let Some(wait) = nd.resync_wait.as_mut() else {
            return;
        };
        let applied = &nd.applied;
        wait.retain(|m| !applied.contains(m));
        if wait.is_empty() {
            nd.resync_wait = None;
            self.fsm_event(
                id,
                MigrationEvent::ResyncReady {
                    controller_reachable: true,
                },
            );
        }
    }

    // ---- controller ----

    fn controller_rx(&mut self, msg: ControlMsg) {
        let now = self.now();
        let from = msg.from;
        if self.ctrl.dirty.contains(&from) {
            self.request_ctrl_compute();
        }
        match msg.payload {
            ControlPayload::Ack { of } => self.acked(of),
            ControlPayload::LinkReport {
                link,
                up,
                detected_at,
            } => {
                let newest = self
                    .ctrl
                    .report_at
                    .get(&link)
                    .is_none_or(|&t| detected_at >= t);
                if newest {
                    self.ctrl.report_at.insert(link, detected_at);
                }
                if !up {
                    if let Some(i) = self.open_incident(link) {
                        let inc = &mut self.incidents[i];
                        if inc.report_rx.is_none() {
                            inc.report_rx = Some(now);
                            inc.reported = true;
                            self.ctrl.queued.push(i);
                            self.request_ctrl_compute();
                        }
                    }
                }
                if newest && apply_link_report(&mut self.ctrl.believed, link, up) {
                    self.request_ctrl_compute();
                    let latest = self.ctrl.staged.as_ref().map(|s| &s.0);
                    if let Some(p) = latest.or(self.ctrl.partition.as_ref()) {
                        let g = &self.ctrl.believed;
                        // a split cluster is reclustered whatever the policy
                        let split = p.cluster_of(link.0).filter(|&c| {
                            p.cluster_of(link.1) == Some(c)
                                && !g.induced(p.members(c)).is_connected()
                        });
                        let policy = self
                            .p
                            .recluster
                            .as_ref()
                            .is_some_and(|pol| pol.triggered(p, &self.ctrl.partition_graph, g));
                        if self.p.method == Method::Cluster && (split.is_some() || policy) {
                            self.do_recluster();
                        }
                    }
                }
            }
            ControlPayload::KeepaliveEcho { mode, .. } => {
                self.ctrl.last_echo.insert(from, now);
                let view = self.ctrl.view[&from];
                if mode != Mode::Sdn {
                    self.ctrl.commanded.remove(&from);
                }
                let next = match view {
                    View::Sdn if mode != Mode::Sdn => Some(View::Migrated {
                        reachable_since: Some(now),
                    }),
                    View::Migrated { .. }
                        if mode == Mode::Sdn && !self.ctrl.commanded.contains(&from) =>
                    {
                        Some(View::Sdn)
                    }
                    View::Migrated {
                        reachable_since: None,
                    } => Some(View::Migrated {
                        reachable_since: Some(now),
                    }),
                    View::Resyncing { .. } if mode == Mode::Sdn => Some(View::Sdn),
                    View::Resyncing { since } if now.saturating_sub(since) > self.p.window * 2 => {
                        Some(View::Migrated {
                            reachable_since: Some(now),
                        })
                    }
                    _ => None,
                };
                if let Some(v) = next {
                    let recompute =
                        matches!(v, View::Migrated { .. }) != matches!(view, View::Migrated { .. });
                    self.ctrl.view.insert(from, v);
                    if recompute {
                        self.request_ctrl_compute();
                    }
                }
            }
            _ => {}
        }
    }

    fn on_keepalive_tick(&mut self) {
        let now = self.now();
        self.ctrl.ka_seq += 1;
        let seq = self.ctrl.ka_seq;
        for n in self.ids.clone() {
            self.send_ctrl(self.ctrl.id, n, ControlPayload::Keepalive { seq }, None);
        }
        let limit = self.p.ka_period * self.p.ka_misses as u64;
        let mut changed = false;
        for n in self.ids.clone() {
            let miss = now.saturating_sub(self.ctrl.last_echo[&n]) >= limit;
            let next = match self.ctrl.view[&n] {
                View::Sdn | View::Resyncing { .. } if miss => {
                    changed = true;
                    Some(View::Migrated {
                        reachable_since: None,
                    })
                }
                View::Migrated {
                    reachable_since: Some(_),
                } if miss => Some(View::Migrated {
                    reachable_since: None,
                }),
                View::Migrated {
                    reachable_since: Some(t),
                } if now.saturating_sub(t) >= self.p.window => {
                    if self.ctrl.resync.insert(n) {
                        changed = true;
                    }
                    None
                }
                _ => None,
            };
            if let Some(v) = next {
                self.ctrl.view.insert(n, v);
            }
        }
        if changed {
            self.request_ctrl_compute();
        }
        self.sched.schedule_in(self.p.ka_period, Ev::KeepaliveTick);
    }

    fn request_ctrl_compute(&mut self) {
        if !self.ctrl.compute_pending {
            self.ctrl.compute_pending = true;
            self.sched.schedule_in(self.p.c_proc, Ev::CtrlCompute);
        }
    }

    fn migrated(&self) -> BTreeSet<NodeId> {
        self.ctrl
            .view
            .iter()
            .filter(|(_, v)| matches!(v, View::Migrated { .. }))
            .map(|(n, _)| *n)
            .collect()
    }

    /// Rules the controller wants at each node it currently manages.
    fn controller_desired(&mut self) -> BTreeMap<NodeId, BTreeMap<RuleKey, FlowRule>> {
        let w = self.p.width;
        let migrated = self.migrated();
        let g = &self.ctrl.believed;
        let mut per: BTreeMap<NodeId, Vec<FlowRule>> = self
            .ids
            .iter()
            .filter(|n| !migrated.contains(n))
            .map(|&n| (n, Vec::new()))
            .collect();
        match self.p.method {
            Method::PureDist => return BTreeMap::new(),
            Method::PureSdn | Method::Backup => {
                let plan = compute_paths(g, &self.demands, w);
                let backups = (self.p.method == Method::Backup)
                    .then(|| compute_backup_rules(g, &plan, &self.demands, self.p.budget, w));
                for (n, v) in per.iter_mut() {
                    v.extend(plan.node_rules(*n));
                    if let Some(b) = &backups {
                        v.extend(b.node_rules(*n));
                    }
                }
            }
            Method::Migration => {
                if migrated.is_empty() {
                    let plan = compute_paths(g, &self.demands, w);
                    for (n, v) in per.iter_mut() {
                        v.extend(plan.node_rules(*n));
                    }
                } else {
                    let dsts: BTreeSet<NodeId> = self.ids.iter().copied().collect();
                    match reconcile_boundary(g, &migrated, &migrated, &dsts, w) {
                        Ok(plan) => {
                            for (n, v) in per.iter_mut() {
                                v.extend(plan.node_rules(*n));
                            }
                        }
                        Err(_) => {
                            let sdn: BTreeSet<NodeId> = per.keys().copied().collect();
                            let demands = Demand::all_pairs(sdn.iter().copied());
                            let plan = compute_paths(&g.induced(&sdn), &demands, w);
                            for (n, v) in per.iter_mut() {
                                v.extend(plan.node_rules(*n));
                            }
                        }
                    }
                }
            }
            Method::Cluster => {
                let Some(p) = &self.ctrl.partition else {
                    return BTreeMap::new();
                };
                let overlay = overlay_graph(p, g);
                for (n, r) in source_push_rules(p, &overlay, &self.demands, w) {
                    if let Some(v) = per.get_mut(&n) {
                        v.push(r);
                    }
                }
                self.ctrl.overlay = Some(overlay);
            }
        }
        per.into_iter()
            .map(|(n, v)| (n, v.into_iter().map(|r| (r.key(), r)).collect()))
            .collect()
    }

    fn on_ctrl_compute(&mut self) {
        let now = self.now();
        self.ctrl.compute_pending = false;
        if self.ctrl.staged.is_some() {
            // nodes still use the old partition; rules wait for the switch
            return;
        }
        let incidents = std::mem::take(&mut self.ctrl.queued);
        let resync = std::mem::take(&mut self.ctrl.resync);
        for &n in &resync {
            self.ctrl.view.insert(n, View::Resyncing { since: now });
        }
        let desired = self.controller_desired();
        let mut sent: BTreeMap<NodeId, Vec<MsgId>> = BTreeMap::new();
        for (n, new) in desired {
            let old = self.ctrl.desired.remove(&n).unwrap_or_default();
            let full = self.ctrl.dirty.remove(&n) || resync.contains(&n);
            let (adds, removes) = diff_table(&old, &new, full);
            if !adds.is_empty() {
                let id = self.send_ctrl(
                    self.ctrl.id,
                    n,
                    ControlPayload::RuleInstall { rules: adds },
                    None,
                );
                sent.entry(n).or_default().push(id);
            }
            if !removes.is_empty() {
                let id = self.send_ctrl(
                    self.ctrl.id,
                    n,
                    ControlPayload::RuleRemove { keys: removes },
                    None,
                );
                sent.entry(n).or_default().push(id);
            }
            self.ctrl.desired.insert(n, new);
        }
        for n in resync {
            let installs = sent.get(&n).cloned().unwrap_or_default();
            self.send_ctrl(
                self.ctrl.id,
                n,
                ControlPayload::ResyncCmd { installs },
                None,
            );
        }
        let incidents: Vec<usize> = incidents
            .into_iter()
            .filter(|&i| !self.incidents[i].done)
            .collect();
        if incidents.is_empty() {
            return;
        }
        let outstanding: BTreeSet<MsgId> = sent.values().flatten().copied().collect();
        if outstanding.is_empty() {
            for i in incidents {
                self.complete_via_controller(i, now, now, now);
            }
            return;
        }
        let bid = self.ctrl.next_batch;
        self.ctrl.next_batch += 1;
        for &m in &outstanding {
            self.ctrl.msg_batch.insert(m, bid);
        }
        self.ctrl.batches.insert(
            bid,
            Batch {
                incidents,
                outstanding,
                computed: now,
                last_delivery: now,
            },
        );
    }

    fn do_recluster(&mut self) {
        if self.p.method != Method::Cluster {
            return;
        }
        if self.ctrl.staged.is_some() {
            self.ctrl.recluster_again = true;
            return;
        }
        let Some(prev) = &self.ctrl.partition else {
            return;
        };
        let Ok(p) = recluster(prev, &self.ctrl.believed, self.p.size) else {
            return;
        };
        let members: Vec<(NodeId, ClusterId)> = p.member_of.iter().map(|(n, c)| (*n, *c)).collect();
        let epoch = p.epoch as u64;
        let activate_at = self.now() + self.p.activation;
        self.ctrl.staged = Some((p, self.ctrl.believed.clone(), activate_at));
        for n in self.ids.clone() {
            self.send_ctrl(
                self.ctrl.id,
                n,
                ControlPayload::ClusterAssign {
                    epoch,
                    members: members.clone(),
                    activate_at,
                },
                None,
            );
        }
        self.sched
            .schedule_at(activate_at, Ev::CtrlActivate { epoch })
            .expect("future");
    }

    fn on_ctrl_activate(&mut self, epoch: u64) {
        let Some((p, g, _)) = self.ctrl.staged.take() else {
            return;
        };
        debug_assert_eq!(p.epoch as u64, epoch);
        self.ctrl.overlay = Some(overlay_graph(&p, &self.ctrl.believed));
        self.ctrl.partition = Some(p);
        self.ctrl.partition_graph = g;
        // every node dropped its push rules when it switched
        self.ctrl.dirty.extend(self.ids.iter().copied());
        self.request_ctrl_compute();
        let again = std::mem::take(&mut self.ctrl.recluster_again);
        let split = self.ctrl.partition.as_ref().is_some_and(|p| {
            p.clusters
                .values()
                .any(|m| !self.ctrl.believed.induced(m).is_connected())
        });
        if again || split {
            self.do_recluster();
        }
    }

    fn apply_change(&mut self, change: Change) {
        let ctrl = self.ctrl.id;
        match change {
            Change::Link(key, up) => {
                if self.truth.link_by_key(key).map(|a| a.up) != Some(!up) {
                    return;
                }
                self.truth.set_link_state(key, up).expect("known link");
                *self.flaps.entry(key).or_default() += 1;
                if up {
                    self.active.remove(&key);
                } else {
                    self.incidents.push(Incident {
                        link: key,
                        detected: None,
                        reported: false,
                        report_rx: None,
                        retries: 0,
                        done: false,
                    });
                    self.active.insert(key, self.incidents.len() - 1);
                    self.report.incidents.failures += 1;
                }
            }
            Change::ControlAll(up) => {
                for n in self.ids.clone() {
                    let _ = self.truth.set_link_state(LinkKey::new(n, ctrl), up);
                }
            }
            Change::Control(n, up) => {
                let _ = self.truth.set_link_state(LinkKey::new(n, ctrl), up);
            }
            Change::Migrate(n) => {
                if self.p.method != Method::Migration {
                    return;
                }
                self.ctrl.view.insert(
                    n,
                    View::Migrated {
                        reachable_since: Some(self.now()),
                    },
                );
                self.ctrl.commanded.insert(n);
                self.send_ctrl(ctrl, n, ControlPayload::MigrateCmd, None);
                self.request_ctrl_compute();
            }
            Change::Resync(n) => {
                if matches!(self.ctrl.view[&n], View::Migrated { .. }) {
                    self.ctrl.resync.insert(n);
                    self.request_ctrl_compute();
                }
            }
            Change::Recluster => self.do_recluster(),
        }
    }
}
