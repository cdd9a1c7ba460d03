//! Scenario builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use wsn_hids::attacks::{AttackKind, AttackSpec};
use wsn_hids::engine::Simulation;
use wsn_hids::scenario::Scenario;
use wsn_hids::simcore::SimTime;
use wsn_hids::topology::{build_topology, NodeId, Topology};

pub fn topology(s: &Scenario) -> Topology {
    build_topology(&s.topology_config()).expect("topology builds")
}

/// The sensor that relays for the most other sensors on their expected
/// routes, restricted to sensors accepted by `keep`.
pub fn busiest_relay_where(s: &Scenario, keep: impl Fn(NodeId) -> bool) -> NodeId {
    let topo = topology(s);
    let mut load: BTreeMap<NodeId, u32> = BTreeMap::new();
    for src in topo.sensors() {
        let c = topo.cluster_of(src).expect("sensor has a cluster");
        let Ok(r) = topo.expected_route(src, c) else {
            continue;
        };
        for &n in &r[1..r.len() - 1] {
            if keep(n) {
                *load.entry(n).or_default() += 1;
            }
        }
    }
    load.into_iter()
        .max_by_key(|&(n, l)| (l, std::cmp::Reverse(n)))
        .map(|(n, _)| n)
        .expect("some sensor relays")
}

pub fn busiest_relay(s: &Scenario) -> NodeId {
    busiest_relay_where(s, |_| true)
}

/// Attacks start one window after detection is fully armed.
pub fn attack_start(s: &Scenario) -> SimTime {
    s.warmup_ms() + s.schedules.window_ms
}

/// A sensor in cell `cell` other than the relay's, used as the borrowed
/// identity or the far end of a tunnel.
pub fn sensor_in_cell(s: &Scenario, cell: usize, idx: usize) -> NodeId {
    let topo = topology(s);
    topo.sensors_in_cell(cell)[idx]
}

/// One attack of `kind` from the busiest relay, configured the way the
/// detection suite exercises it.
pub fn attack(s: &Scenario, kind: AttackKind, start: SimTime, stop: SimTime) -> AttackSpec {
    let topo = topology(s);
    let relay = busiest_relay(s);
    let relay_cell = topo.cell_of(relay).expect("sensor cell");
    let other = (0..topo.cells().len()).find(|&c| c != relay_cell && c >= 3).unwrap_or(0);
    let far_cell = (0..topo.cells().len())
        .find(|&c| c != relay_cell && c != other && c >= 5)
        .unwrap_or(0);
    let fake = topo.sensors_in_cell(other)[0];
    let far = topo.sensors_in_cell(far_cell)[2.min(topo.sensors_in_cell(far_cell).len() - 1)];
    let mut a = AttackSpec::new(kind, relay, start, stop);
    match kind {
        AttackKind::SelectiveForwarding => a.drop_ratio = 0.5,
        AttackKind::Sybil => a.fake_ids = vec![fake],
        AttackKind::FalseIdBroadcastFlood => {
            a.fake_ids = vec![fake];
            a.rate = 200.0;
        }
        AttackKind::FalseIdTargetFlood => {
            a.fake_ids = vec![fake];
            a.rate = 200.0;
            a.target = topo.cluster_of(relay);
        }
        AttackKind::BroadcastFlood => a.rate = 200.0,
        AttackKind::TargetFlood => {
            a.rate = 200.0;
            a.target = topo.cluster_of(relay);
        }
        AttackKind::Misdirection => a.target = Some(far),
        AttackKind::Wormhole => a.peer = Some(far),
        AttackKind::Replay => a.rate = 20.0,
        _ => {}
    }
    a
}

/// Default scenario with one attack running from the usual start until
/// `window_s` seconds later, which is also where the run ends.
pub fn attack_scenario(kind: AttackKind, window_s: SimTime) -> Scenario {
    let mut s = Scenario::default();
    let start = attack_start(&s);
    s.duration = start + window_s * 1000;
    let a = attack(&s, kind, start, s.duration);
    s.attacks.push(a);
    s
}

pub fn run(s: Scenario, trace: bool) -> Simulation {
    let mut sim = Simulation::new(s, trace).expect("scenario is valid");
    sim.run().expect("run completes");
    sim
}

/// Pulls `key=value` out of a trace detail string.
pub fn field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    detail
        .split_whitespace()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}
