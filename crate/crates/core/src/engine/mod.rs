//! Discrete-event simulation of the monitored network: radio traffic and
//! attacks on the sensor tier, the three agent tiers above it, response,
//! policy dissemination and failover.

mod net;
mod tiers;

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    AnomalyProfile, Finding, Report, ReportSummary, Tier, WindowObservations,
};
use crate::attacks::{AttackKind, Attacker};
use crate::detectors::{ChildWindow, RssiBaseline};
use crate::error::{Error, Result};
use crate::failover::LivenessTable;
use crate::policy::{IdtChange, PolicySet, PolicyStore, Scope, Staged};
use crate::response::{NodeClassRecord, NodeState, ResponseTable};
use crate::scenario::{IdsMode, Scenario};
use crate::simcore::{
    EnergyLedger, EventQueue, Packet, PacketKind, SimTime, SmacSchedule, TdmaSchedule, Trace,
    TraceKind,
};
use crate::topology::{build_topology, CellId, NodeId, NodeRole, Point, RegionId, Topology};

/// Per-cell MAC schedules.
#[derive(Debug, Clone)]
pub struct CellMac {
    pub tdma: TdmaSchedule,
    pub smac: SmacSchedule,
    /// Offset of each sensor's own slot within the frame.
    pub offsets: BTreeMap<NodeId, SimTime>,
}

/// One radio hop in flight.
#[derive(Debug, Clone)]
pub(crate) struct Hop {
    pub pkt: Packet,
    /// Planned route, `route[idx]` being the current transmitter.
    pub route: Option<Rc<[NodeId]>>,
    pub idx: usize,
    pub range: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum Msg {
    Report(Report),
    /// Danger alert; `escalate` asks the base station to blacklist.
    Alert { finding: Finding, escalate: bool },
    Policy {
        scope: Scope,
        set: PolicySet,
        targets: Vec<NodeId>,
        resupply: bool,
    },
    Directive(Finding),
}

#[derive(Debug, Clone)]
pub(crate) enum Event {
    WindowClose(u64),
    RpaTick(u64),
    BpdpTick(u64),
    Originate { node: NodeId, kind: PacketKind },
    Send(Box<Hop>),
    Arrive(Box<Hop>),
    Tunnel(Box<Hop>),
    AttackTick(usize),
    Settle { relay: NodeId, seq: u64 },
    Kill(NodeId),
    Relocate(NodeId, Point),
    Backbone { from: NodeId, to: NodeId, msg: Box<Msg> },
}

/// Local agent on a cluster node.
#[derive(Debug, Clone)]
pub struct Lpa {
    pub node: NodeId,
    pub home_cell: CellId,
    pub cells: BTreeSet<CellId>,
    pub parent: NodeId,
    pub acting: bool,
    pub table: ResponseTable,
    pub store: PolicyStore,
    pub(crate) staged: Staged,
    pub profile: AnomalyProfile,
    pub baseline: RssiBaseline,
    pub(crate) pending_init: BTreeSet<NodeId>,
    /// First window whose traffic feeds the anomaly processor.
    pub learn_after: u64,
    pub(crate) obs: WindowObservations,
    pub(crate) layer: Vec<Finding>,
    pub(crate) directives: Vec<Finding>,
    pub(crate) summary: ReportSummary,
    pub(crate) uplink: crate::agent::Uplink,
    pub local_blacklist: BTreeSet<NodeId>,
}

/// Regional agent.
#[derive(Debug, Clone)]
pub struct Rpa {
    pub node: NodeId,
    pub regions: BTreeSet<RegionId>,
    pub children: BTreeSet<NodeId>,
    pub acting: bool,
    pub liveness: LivenessTable,
    pub(crate) history: BTreeMap<NodeId, Vec<ChildWindow>>,
    pub(crate) inbox: Vec<Report>,
    pub(crate) delivered: BTreeMap<(NodeId, u64), u64>,
    /// Adopted children are judged only on windows observed in full.
    pub(crate) judged_from: BTreeMap<NodeId, u64>,
    pub store: PolicyStore,
    pub(crate) staged: Staged,
}

/// Base-station decision point.
#[derive(Debug, Clone)]
pub struct Bpdp {
    pub node: NodeId,
    pub store: PolicyStore,
    pub liveness: LivenessTable,
    pub(crate) inbox: Vec<Report>,
    pub(crate) escalations: BTreeSet<NodeId>,
}

/// A finding as logged by the tier that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedFinding {
    pub tier: Tier,
    pub agent: NodeId,
    pub finding: Finding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailoverRecord {
    pub failed: NodeId,
    pub role: NodeRole,
    pub successor: Option<NodeId>,
    pub adopted: Vec<NodeId>,
    pub killed_at: Option<SimTime>,
    pub takeover_at: SimTime,
    /// Arrival of the successor's first report covering adopted children.
    pub first_report_at: Option<SimTime>,
}

impl FailoverRecord {
    /// Windows from the kill to the first adopted report, rounded up.
    pub fn disruption_windows(&self, window_ms: SimTime) -> Option<u64> {
        let (k, r) = (self.killed_at?, self.first_report_at?);
        Some((r.saturating_sub(k)).div_ceil(window_ms))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub transmissions: u64,
    pub data_originated: u64,
    pub data_delivered: u64,
    pub data_at_base: u64,
    pub broadcast_messages: u64,
    pub alert_messages: u64,
    pub alert_broadcasts: u64,
    pub policy_messages: u64,
    pub resupply_messages: u64,
    pub reports: u64,
    pub discarded: u64,
    pub dropped: u64,
    pub jammed: u64,
    pub orphaned_sensors: u64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PendingRelay {
    pub planned: NodeId,
    pub payload: u64,
}

pub struct Simulation {
    pub(crate) scenario: Scenario,
    pub(crate) topo: Topology,
    pub(crate) queue: EventQueue<Event>,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) trace: Trace,
    pub(crate) energy: EnergyLedger,
    pub(crate) alive: Vec<bool>,
    pub(crate) pos: Vec<Point>,
    pub(crate) macs: Vec<CellMac>,
    pub(crate) cell_lpa: Vec<Option<NodeId>>,
    pub(crate) lpas: BTreeMap<NodeId, Lpa>,
    pub(crate) rpas: BTreeMap<NodeId, Rpa>,
    pub(crate) bpdp: Bpdp,
    pub(crate) attackers: Vec<Attacker>,
    pub(crate) tx_free_at: Vec<SimTime>,
    pub(crate) next_seq: u64,
    pub(crate) pending: BTreeMap<(NodeId, u64), PendingRelay>,
    pub(crate) pdr_book: BTreeMap<(NodeId, u64), (u32, u32)>,
    pub(crate) excl_history: Vec<(SimTime, BTreeSet<NodeId>)>,
    pub(crate) route_cache: BTreeMap<(NodeId, NodeId), Option<Rc<[NodeId]>>>,
    pub(crate) alert_sent: BTreeSet<(NodeId, &'static str, NodeId, u64)>,
    pub(crate) findings: Vec<LoggedFinding>,
    pub(crate) counters: Counters,
    pub(crate) timeline: BTreeMap<NodeId, Vec<(SimTime, NodeState)>>,
    pub(crate) failovers: Vec<FailoverRecord>,
    pub(crate) killed_at: BTreeMap<NodeId, SimTime>,
    pub(crate) revoked: BTreeSet<NodeId>,
    pub(crate) finished: bool,
}

impl Simulation {
    /// Builds the network and schedules everything known up front. The
    /// trace is recorded when `trace` is set.
    pub fn new(scenario: Scenario, trace: bool) -> Result<Self> {
        scenario.validate()?;
        let topo = build_topology(&scenario.topology_config())?;
        scenario.check_references(&topo)?;
        let n = topo.nodes().len();
        let sched = &scenario.schedules;
        let w = sched.window_ms;

        let mut macs = Vec::with_capacity(topo.cells().len());
        for cell in 0..topo.cells().len() {
            let members = topo.sensors_in_cell(cell);
            let m = sched.frame_slots(members.len());
            let slots: Vec<NodeId> = if members.is_empty() {
                vec![topo.cluster_of_cell(cell); m]
            } else {
                (0..m).map(|i| members[i % members.len()]).collect()
            };
            let tdma = TdmaSchedule::new(sched.slot_len, slots)?;
            let period = tdma.frame_len();
            let mut smac = SmacSchedule::new(period)?;
            let mut offsets = BTreeMap::new();
            for (i, &s) in members.iter().enumerate() {
                let o = i as SimTime * sched.slot_len;
                let dur = (sched.awake_slots * sched.slot_len).min(period - o);
                smac.set_window(s, o, dur)?;
                offsets.insert(s, o);
            }
            macs.push(CellMac {
                tdma,
                smac,
                offsets,
            });
        }

        let global = scenario.policy.clone();
        let learn_after = scenario.policy.response.t_fresh + 1;
        let mut lpas = BTreeMap::new();
        let mut cell_lpa = Vec::new();
        for cell in 0..topo.cells().len() {
            let c = topo.cluster_of_cell(cell);
            let parent = topo
                .region_of(c)
                .ok_or_else(|| Error::Invariant(format!("cluster {c} has no regional node")))?;
            let mut table = ResponseTable::new();
            for &s in topo.sensors_in_cell(cell) {
                table.admit(s, 0)?;
            }
            lpas.insert(
                c,
                Lpa {
                    node: c,
                    home_cell: cell,
                    cells: BTreeSet::from([cell]),
                    parent,
                    acting: true,
                    table,
                    store: PolicyStore::new(global.clone()),
                    staged: Staged::default(),
                    profile: AnomalyProfile::new(global.anomaly.clone()),
                    baseline: RssiBaseline::default(),
                    pending_init: topo.sensors_in_cell(cell).iter().copied().collect(),
                    learn_after,
                    obs: WindowObservations::default(),
                    layer: Vec::new(),
                    directives: Vec::new(),
                    summary: ReportSummary::default(),
                    uplink: Default::default(),
                    local_blacklist: BTreeSet::new(),
                },
            );
            cell_lpa.push(Some(c));
        }
        let mut rpas = BTreeMap::new();
        let mut bpdp_live = LivenessTable::new();
        for (r, &g) in topo.regionals().iter().enumerate() {
            let children: BTreeSet<NodeId> = topo
                .cells_of_region(g)
                .iter()
                .map(|&c| topo.cluster_of_cell(c))
                .collect();
            let mut liveness = LivenessTable::new();
            for &c in &children {
                liveness.watch(c);
            }
            bpdp_live.watch(g);
            rpas.insert(
                g,
                Rpa {
                    node: g,
                    regions: BTreeSet::from([r]),
                    children,
                    acting: true,
                    liveness,
                    history: BTreeMap::new(),
                    inbox: Vec::new(),
                    delivered: BTreeMap::new(),
                    judged_from: BTreeMap::new(),
                    store: PolicyStore::new(global.clone()),
                    staged: Staged::default(),
                },
            );
        }
        let bpdp = Bpdp {
            node: topo.base_station(),
            store: PolicyStore::new(global),
            liveness: bpdp_live,
            inbox: Vec::new(),
            escalations: BTreeSet::new(),
        };

        let mut timeline = BTreeMap::new();
        for s in topo.sensors() {
            timeline.insert(s, vec![(0, NodeState::Fresh)]);
        }
        let pos = topo.nodes().iter().map(|i| i.pos).collect();
        let energy = EnergyLedger::new(scenario.energy.clone());
        let mut sim = Self {
            attackers: scenario.attacks.iter().cloned().map(Attacker::new).collect(),
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            queue: EventQueue::new(),
            trace: Trace::new(trace),
            energy,
            alive: vec![true; n],
            pos,
            macs,
            cell_lpa,
            lpas,
            rpas,
            bpdp,
            tx_free_at: vec![0; n],
            next_seq: 0,
            pending: BTreeMap::new(),
            pdr_book: BTreeMap::new(),
            excl_history: vec![(0, BTreeSet::new())],
            route_cache: BTreeMap::new(),
            alert_sent: BTreeSet::new(),
            findings: Vec::new(),
            counters: Counters::default(),
            timeline,
            failovers: Vec::new(),
            killed_at: BTreeMap::new(),
            revoked: BTreeSet::new(),
            finished: false,
            topo,
            scenario,
        };

        for i in 0..sim.attackers.len() {
            let spec = &sim.attackers[i].spec;
            let step = spec.emission_interval();
            let times = spec.emission_times();
            for t in times {
                let jitter = sim.rng.gen_range(0..step);
                sim.schedule(t + jitter, Event::AttackTick(i))?;
            }
        }
        for f in sim.scenario.failures.clone() {
            sim.schedule(f.at, Event::Kill(f.node))?;
        }
        for r in sim.scenario.relocations.clone() {
            sim.schedule(r.at, Event::Relocate(r.node, Point::new(r.x, r.y)))?;
        }
        sim.schedule_originations(0)?;
        if w <= sim.scenario.duration {
            sim.schedule(w, Event::WindowClose(0))?;
        }
        Ok(sim)
    }

    pub(crate) fn schedule(&mut self, at: SimTime, e: Event) -> Result<()> {
        self.queue.schedule(at, e)
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub(crate) fn window_ms(&self) -> SimTime {
        self.scenario.schedules.window_ms
    }

    /// Index of the window containing the current time.
    pub fn window(&self) -> u64 {
        self.now() / self.window_ms()
    }

    /// Runs to the scenario's end and checks the end-of-run invariants.
    pub fn run(&mut self) -> Result<()> {
        let end = self.scenario.duration;
        self.run_until(end)?;
        self.finished = true;
        self.check_invariants()
    }

    /// Processes every event due at or before `until`.
    pub fn run_until(&mut self, until: SimTime) -> Result<()> {
        while let Some(t) = self.queue.peek_time() {
            if t > until {
                break;
            }
            let (_, e) = self.queue.pop().expect("peeked");
            self.dispatch(e)?;
        }
        Ok(())
    }

    fn dispatch(&mut self, e: Event) -> Result<()> {
        match e {
            Event::WindowClose(k) => self.close_window(k),
            Event::RpaTick(k) => self.rpa_tick(k),
            Event::BpdpTick(k) => self.bpdp_tick(k),
            Event::Originate { node, kind } => self.originate(node, kind),
            Event::Send(hop) => self.send(*hop),
            Event::Arrive(hop) => self.arrive(*hop),
            Event::Tunnel(hop) => self.tunnel_exit(*hop),
            Event::AttackTick(i) => self.attack_tick(i),
            Event::Settle { relay, seq } => {
                if self.pending.remove(&(relay, seq)).is_some() {
                    self.book_relay(relay, false, false);
                }
                Ok(())
            }
            Event::Kill(node) => self.kill_now(node),
            Event::Relocate(node, p) => {
                self.pos[node as usize] = p;
                Ok(())
            }
            Event::Backbone { from, to, msg } => self.backbone_arrive(from, to, *msg),
        }
    }

    fn kill_now(&mut self, node: NodeId) -> Result<()> {
        if !self.alive[node as usize] {
            return Ok(());
        }
        self.alive[node as usize] = false;
        let now = self.now();
        self.killed_at.insert(node, now);
        self.trace.push(now, TraceKind::Kill, node, None, || {
            format!("role={}", self.topo.role(node).map_or("?", |r| r.as_str()))
        });
        self.update_exclusion();
        Ok(())
    }

    /// Schedules `node` to fail at `at`.
    pub fn kill(&mut self, node: NodeId, at: SimTime) -> Result<()> {
        if !self.topo.contains(node) {
            return Err(Error::UnknownNode(node));
        }
        self.schedule(at.max(self.now()), Event::Kill(node))
    }

    /// Schedules `node` to move to `p` at `at`.
    pub fn relocate(&mut self, node: NodeId, p: Point, at: SimTime) -> Result<()> {
        if !self.topo.contains(node) {
            return Err(Error::UnknownNode(node));
        }
        self.schedule(at.max(self.now()), Event::Relocate(node, p))
    }

    /// Applies an intrusion-detection-table operation at the base station
    /// and starts disseminating the new version.
    pub fn idt(
        &mut self,
        scope: Scope,
        change: IdtChange,
    ) -> Result<Option<crate::agent::SignatureRule>> {
        let out = self.bpdp.store.edit(scope, change)?;
        self.sync_policy()?;
        Ok(out)
    }

    // ---- routing ----

    /// Nodes routes must avoid: failed nodes and isolated sensors.
    pub(crate) fn compute_exclusion(&self) -> BTreeSet<NodeId> {
        let w = self.window();
        let mut out: BTreeSet<NodeId> = (0..self.alive.len())
            .filter(|&i| !self.alive[i])
            .map(|i| i as NodeId)
            .collect();
        for l in self.lpas.values() {
            out.extend(l.table.isolated(w));
        }
        out
    }

    pub(crate) fn update_exclusion(&mut self) {
        let next = self.compute_exclusion();
        if self.excl_history.last().map(|e| &e.1) == Some(&next) {
            return;
        }
        let now = self.now();
        self.excl_history.push((now, next));
        self.route_cache.clear();
        // traffic shifts onto other relays: profiles must be relearned
        let from = self.window() + 1;
        for l in self.lpas.values_mut() {
            l.profile = AnomalyProfile::new(l.profile.policy.clone());
            l.learn_after = l.learn_after.max(from);
        }
    }

    pub(crate) fn exclusion_at(&self, t: SimTime) -> &BTreeSet<NodeId> {
        let i = self.excl_history.partition_point(|e| e.0 <= t);
        &self.excl_history[i.saturating_sub(1)].1
    }

    pub(crate) fn route(&mut self, src: NodeId, dst: NodeId) -> Option<Rc<[NodeId]>> {
        if let Some(r) = self.route_cache.get(&(src, dst)) {
            return r.clone();
        }
        let excl = &self.excl_history.last().expect("never empty").1;
        let r = self
            .topo
            .expected_route_avoiding(src, dst, excl)
            .ok()
            .map(Rc::from);
        self.route_cache.insert((src, dst), r.clone());
        r
    }

    // ---- lookups ----

    pub(crate) fn is_alive(&self, n: NodeId) -> bool {
        self.alive.get(n as usize).copied().unwrap_or(false)
    }

    /// Acting, alive local agent responsible for `cell`.
    pub(crate) fn active_lpa(&self, cell: CellId) -> Option<NodeId> {
        let l = self.cell_lpa.get(cell).copied().flatten()?;
        (self.is_alive(l) && self.lpas[&l].acting).then_some(l)
    }

    /// Classification record of a sensor, wherever it lives.
    pub fn record(&self, node: NodeId) -> Option<&NodeClassRecord> {
        let cell = self.topo.cell_of(node)?;
        if let Some(l) = self.cell_lpa[cell] {
            if let Some(r) = self.lpas[&l].table.get(node) {
                return Some(r);
            }
        }
        self.lpas.values().find_map(|l| l.table.get(node))
    }

    pub fn class_of(&self, node: NodeId) -> Option<NodeState> {
        self.record(node).map(|r| r.state)
    }

    pub(crate) fn is_isolated(&self, node: NodeId) -> bool {
        let w = self.window();
        self.record(node).is_some_and(|r| r.is_isolated(w))
    }

    pub(crate) fn actor_attack(&self, node: NodeId, relay_only: bool) -> Option<usize> {
        self.attackers.iter().position(|a| {
            a.spec.attacker == node
                && (!relay_only
                    || matches!(
                        a.spec.kind,
                        AttackKind::BlackHole
                            | AttackKind::SinkHole
                            | AttackKind::SelectiveForwarding
                            | AttackKind::Misdirection
                            | AttackKind::Wormhole
                            | AttackKind::DataAlteration
                    ))
        })
    }

    pub(crate) fn is_actor(&self, node: NodeId) -> bool {
        self.attackers.iter().any(|a| a.spec.actors().contains(&node))
    }

    pub(crate) fn log_finding(&mut self, tier: Tier, agent: NodeId, f: Finding) {
        let tier_name = match tier {
            Tier::Local => "lpa",
            Tier::Regional => "rpa",
            Tier::Base => "bpdp",
        };
        let now = self.now();
        self.trace
            .push(now, TraceKind::Finding, agent, f.evidence.seq, || {
                format!("tier={tier_name} {f}")
            });
        self.findings.push(LoggedFinding {
            tier,
            agent,
            finding: f,
        });
    }

    pub(crate) fn region_index(&self, cell: CellId) -> RegionId {
        self.topo
            .node(self.topo.cluster_of_cell(cell))
            .ok()
            .and_then(|i| i.region)
            .unwrap_or(0)
    }

    // ---- accessors ----

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn energy(&self) -> &EnergyLedger {
        &self.energy
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn findings(&self) -> &[LoggedFinding] {
        &self.findings
    }

    pub fn failovers(&self) -> &[FailoverRecord] {
        &self.failovers
    }

    pub fn timeline(&self) -> &BTreeMap<NodeId, Vec<(SimTime, NodeState)>> {
        &self.timeline
    }

    pub fn mac(&self, cell: CellId) -> &CellMac {
        &self.macs[cell]
    }

    pub fn lpa(&self, node: NodeId) -> Option<&Lpa> {
        self.lpas.get(&node)
    }

    pub fn lpa_mut(&mut self, node: NodeId) -> Option<&mut Lpa> {
        self.lpas.get_mut(&node)
    }

    pub fn lpas(&self) -> impl Iterator<Item = &Lpa> {
        self.lpas.values()
    }

    pub fn rpa(&self, node: NodeId) -> Option<&Rpa> {
        self.rpas.get(&node)
    }

    pub fn bpdp(&self) -> &Bpdp {
        &self.bpdp
    }

    pub fn is_node_alive(&self, n: NodeId) -> bool {
        self.is_alive(n)
    }

    pub fn mode(&self) -> IdsMode {
        self.scenario.mode
    }

    /// Acting local agent currently responsible for a sensor.
    pub fn monitor_of(&self, sensor: NodeId) -> Option<NodeId> {
        self.active_lpa(self.topo.cell_of(sensor)?)
    }

    /// Effective policy an LPA applies.
    pub fn lpa_policy(&self, node: NodeId) -> Option<&PolicySet> {
        let l = self.lpas.get(&node)?;
        Some(l.store.effective(self.region_index(l.home_cell), l.home_cell))
    }

    /// Nodes that failed or were revoked during the run.
    pub fn failed_nodes(&self) -> BTreeSet<NodeId> {
        let mut out: BTreeSet<NodeId> = self.killed_at.keys().copied().collect();
        out.extend(self.revoked.iter().copied());
        out
    }

    /// End-of-run structural checks.
    pub fn check_invariants(&self) -> Result<()> {
        for s in self.topo.sensors() {
            if !self.is_alive(s) {
                continue;
            }
            let holders = self
                .lpas
                .values()
                .filter(|l| l.acting && self.is_alive(l.node) && l.table.get(s).is_some())
                .count();
            let cell = self.topo.cell_of(s).expect("sensors have cells");
            let orphaned = self.cell_lpa[cell].is_none();
            if holders > 1 || (holders == 0 && !orphaned && self.active_lpa(cell).is_some()) {
                return Err(Error::Invariant(format!(
                    "sensor {s} is held by {holders} local agents"
                )));
            }
        }
        Ok(())
    }
}
