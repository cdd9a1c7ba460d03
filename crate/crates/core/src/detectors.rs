//! Layer-specific detection: physical (RSSI, PDR, carrier sense), link
//! (TDMA slot and S-MAC sleep checks), network (route tracing) and the
//! application-layer watchdog between adjacent tiers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agent::{Detector, Evidence, Finding, ReportSummary, Severity, StimulusVector};
use crate::simcore::{Destination, Packet, SimTime, SmacSchedule, TdmaSchedule};
use crate::topology::{NodeId, NodeRole, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    /// dB
    pub rssi_tolerance: f64,
    pub pdr_floor: f64,
    pub busy_ceiling: f64,
    /// Consecutive missed reports before a child is declared failed.
    pub miss_limit: u32,
    /// Minimum delivered/seen ratio a child must sustain while reporting.
    pub watchdog_forward_floor: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            rssi_tolerance: 6.0,
            pdr_floor: 0.6,
            busy_ceiling: 0.7,
            miss_limit: 3,
            watchdog_forward_floor: 0.6,
        }
    }
}

/// Expected RSSI per (source, observer) link, recorded at initialization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RssiBaseline {
    expected: BTreeMap<(NodeId, NodeId), f64>,
}

impl RssiBaseline {
    /// Records the first value seen for a link; later calls are ignored.
    pub fn record(&mut self, src: NodeId, observer: NodeId, rssi: f64) {
        self.expected.entry((src, observer)).or_insert(rssi);
    }

    pub fn expected(&self, src: NodeId, observer: NodeId) -> Option<f64> {
        self.expected.get(&(src, observer)).copied()
    }

    /// Drops every recorded link of `src` so it is learned again.
    pub fn reinit(&mut self, src: NodeId) {
        self.expected.retain(|(s, _), _| *s != src);
    }

    pub fn len(&self) -> usize {
        self.expected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expected.is_empty()
    }
}

pub fn check_physical(
    v: &StimulusVector,
    baseline: &RssiBaseline,
    observer: NodeId,
    params: &DetectorParams,
) -> Vec<Finding> {
    let at = v.window.1;
    let mut out = Vec::new();
    for (&src, s) in &v.sources {
        let subject = s.culprit(src);
        if let Some(mean) = s.mean_rssi() {
            match baseline.expected(src, observer) {
                None => out.push(
                    Finding::new(
                        at,
                        subject,
                        Detector::Rssi,
                        Severity::Info,
                        "UnknownSource",
                        Evidence::new("mean_rssi", mean, f64::NAN),
                    )
                    .claiming(src),
                ),
                Some(exp) if (mean - exp).abs() > params.rssi_tolerance => out.push(
                    Finding::new(
                        at,
                        subject,
                        Detector::Rssi,
                        Severity::Misbehavior,
                        "RssiDeviation",
                        Evidence::new("mean_rssi", mean, exp),
                    )
                    .claiming(src),
                ),
                Some(_) => {}
            }
        }
        if s.pdr_expected > 0 && s.pdr() < params.pdr_floor {
            // low delivery marks the victim, not a culprit
            out.push(Finding::new(
                at,
                src,
                Detector::Pdr,
                Severity::Info,
                "Jamming",
                Evidence::new("pdr", s.pdr(), params.pdr_floor),
            ));
        }
        if s.carrier_busy_frac() > params.busy_ceiling {
            out.push(
                Finding::new(
                    at,
                    subject,
                    Detector::CarrierSense,
                    Severity::Misbehavior,
                    "Jamming",
                    Evidence::new("carrier_busy_frac", s.carrier_busy_frac(), params.busy_ceiling),
                )
                .claiming(src),
            );
        }
    }
    out
}

/// Flags a transmission sent outside its sender's TDMA slot. The sender is
/// the MAC-layer source, which is the claimed source on the first hop.
pub fn check_tdma(pkt: &Packet, sched: &TdmaSchedule) -> Option<Finding> {
    let owner = sched.slot_owner(pkt.sent_at);
    (owner != pkt.link_src).then(|| {
        Finding::new(
            pkt.sent_at,
            pkt.transmitter(),
            Detector::Tdma,
            Severity::Misbehavior,
            "SlotViolation",
            Evidence::new("slot_owner", owner as f64, pkt.link_src as f64).with_seq(pkt.seq),
        )
        .claiming(pkt.link_src)
    })
}

/// Flags a transmission sent while its sender should be asleep.
pub fn check_smac(pkt: &Packet, sched: &SmacSchedule) -> Option<Finding> {
    let asleep = sched.is_asleep(pkt.link_src, pkt.sent_at).ok()?;
    asleep.then(|| {
        Finding::new(
            pkt.sent_at,
            pkt.transmitter(),
            Detector::Smac,
            Severity::Misbehavior,
            "SleepViolation",
            Evidence::new("phase", (pkt.sent_at % sched.period()) as f64, 0.0).with_seq(pkt.seq),
        )
        .claiming(pkt.link_src)
    })
}

fn render_path(p: &[NodeId]) -> String {
    p.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(">")
}

/// The node held responsible for a trace that left the expected path: the
/// last node on the common prefix, or the first transmitter when even that
/// differs.
pub fn deviation_point(trace: &[NodeId], expected: &[NodeId]) -> NodeId {
    let common = trace
        .iter()
        .zip(expected)
        .take_while(|(a, b)| a == b)
        .count();
    if common == 0 {
        trace[0]
    } else {
        trace[common - 1]
    }
}

/// Destination-side route tracing against the expected best route.
pub fn check_route(
    pkt: &Packet,
    topo: &Topology,
    excluded: &BTreeSet<NodeId>,
    at: SimTime,
) -> Option<Finding> {
    let dst = match pkt.dst {
        Destination::Node(d) => d,
        Destination::Broadcast => return None,
    };
    let mut trace = pkt.hop_trace.clone();
    if trace.last() != Some(&dst) {
        trace.push(dst);
    }
    match topo.expected_route_avoiding(pkt.claimed_src, dst, excluded) {
        Err(_) => Some(
            Finding::new(
                at,
                pkt.hop_trace[0],
                Detector::Route,
                Severity::Info,
                "RouteUnknown",
                Evidence::new("hops", trace.len() as f64, f64::NAN).with_seq(pkt.seq),
            )
            .claiming(pkt.claimed_src),
        ),
        Ok(expected) if expected != trace => Some(
            Finding::new(
                at,
                deviation_point(&trace, &expected),
                Detector::Route,
                Severity::Misbehavior,
                "RouteDeviation",
                Evidence::new("hops", trace.len() as f64, expected.len() as f64)
                    .with_seq(pkt.seq)
                    .with_note(format!(
                        "trace={} expected={}",
                        render_path(&trace),
                        render_path(&expected)
                    )),
            )
            .claiming(pkt.claimed_src),
        ),
        Ok(_) => None,
    }
}

/// What a parent knows about one child for one window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChildWindow {
    /// The child's own report, if one arrived.
    pub report: Option<ReportSummary>,
    /// Data the parent actually received from the child.
    pub delivered: u64,
}

/// Watchdog monitoring only spans adjacent tiers.
pub fn is_direct_parent(parent: NodeRole, child: NodeRole) -> bool {
    matches!(
        (parent, child),
        (NodeRole::BaseStation, NodeRole::RegionalNode)
            | (NodeRole::RegionalNode, NodeRole::ClusterNode)
            | (NodeRole::ClusterNode, NodeRole::Sensor)
    )
}

/// Checks a child's report history (oldest first) for silence or an
/// inconsistent summary in the latest window.
pub fn watchdog_check(
    parent: NodeId,
    child: NodeId,
    history: &[ChildWindow],
    params: &DetectorParams,
    at: SimTime,
) -> Option<Finding> {
    let missed = history.iter().rev().take_while(|w| w.report.is_none()).count() as u32;
    if missed >= params.miss_limit {
        return Some(Finding::new(
            at,
            child,
            Detector::Watchdog,
            Severity::Misbehavior,
            "MissedReports",
            Evidence::new("missed", missed as f64, params.miss_limit as f64)
                .with_note(format!("parent={parent}")),
        ));
    }
    let last = history.last()?;
    let summary = last.report?;
    if summary.forwarded > summary.packets_seen {
        return Some(Finding::new(
            at,
            child,
            Detector::Watchdog,
            Severity::Misbehavior,
            "InconsistentSummary",
            Evidence::new("forwarded", summary.forwarded as f64, summary.packets_seen as f64)
                .with_note(format!("parent={parent}")),
        ));
    }
    if summary.packets_seen > 0 {
        let ratio = last.delivered as f64 / summary.packets_seen as f64;
        if ratio < params.watchdog_forward_floor {
            return Some(Finding::new(
                at,
                child,
                Detector::Watchdog,
                Severity::Misbehavior,
                "ForwardShortfall",
                Evidence::new("forward_ratio", ratio, params.watchdog_forward_floor)
                    .with_note(format!(
                        "parent={parent} claimed={} delivered={}",
                        summary.forwarded, last.delivered
                    )),
            ));
        }
    }
    None
}
