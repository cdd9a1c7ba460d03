use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::simcore::{PacketKind, SimTime};
use crate::topology::{CellId, NodeId};

/// A numeric feature of a source's window aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    PktCount,
    HelloCount,
    MeanRssi,
    Pdr,
    CarrierBusyFrac,
    SlotViolations,
    SleepViolations,
    RouteDeviations,
    ForwardRatio,
    DistinctCellsSeen,
    AdvertCount,
    AlteredForwards,
    RelayedIn,
}

impl Feature {
    pub const ALL: [Feature; 13] = [
        Feature::PktCount,
        Feature::HelloCount,
        Feature::MeanRssi,
        Feature::Pdr,
        Feature::CarrierBusyFrac,
        Feature::SlotViolations,
        Feature::SleepViolations,
        Feature::RouteDeviations,
        Feature::ForwardRatio,
        Feature::DistinctCellsSeen,
        Feature::AdvertCount,
        Feature::AlteredForwards,
        Feature::RelayedIn,
    ];

    /// Whether a move from `mean` to `x` points at the source itself
    /// misbehaving. Falling delivery hurts the victim and relay load is
    /// imposed by others, so neither ever does.
    pub fn is_suspicious(&self, x: f64, mean: f64) -> bool {
        match self {
            Feature::MeanRssi => true,
            Feature::Pdr | Feature::RelayedIn => false,
            Feature::ForwardRatio => x < mean,
            _ => x > mean,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Feature::PktCount => "pkt_count",
            Feature::HelloCount => "hello_count",
            Feature::MeanRssi => "mean_rssi",
            Feature::Pdr => "pdr",
            Feature::CarrierBusyFrac => "carrier_busy_frac",
            Feature::SlotViolations => "slot_violations",
            Feature::SleepViolations => "sleep_violations",
            Feature::RouteDeviations => "route_deviations",
            Feature::ForwardRatio => "forward_ratio",
            Feature::DistinctCellsSeen => "distinct_cells_seen",
            Feature::AdvertCount => "advert_count",
            Feature::AlteredForwards => "altered_forwards",
            Feature::RelayedIn => "relayed_in",
        }
    }
}

/// Per-source window aggregate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceStats {
    pub pkt_count: u32,
    pub hello_count: u32,
    pub rssi_sum: f64,
    pub rssi_samples: u32,
    pub pdr_expected: u32,
    pub pdr_delivered: u32,
    pub busy_ms: u64,
    pub window_ms: u64,
    pub slot_violations: u32,
    pub sleep_violations: u32,
    pub route_deviations: u32,
    pub relayed_in: u32,
    pub relayed_out: u32,
    pub altered_forwards: u32,
    pub advert_count: u32,
    pub cells: BTreeSet<CellId>,
    /// Physical transmitter counts behind this identity.
    pub transmitters: BTreeMap<NodeId, u32>,
}

impl SourceStats {
    pub fn mean_rssi(&self) -> Option<f64> {
        (self.rssi_samples > 0).then(|| self.rssi_sum / self.rssi_samples as f64)
    }

    pub fn pdr(&self) -> f64 {
        if self.pdr_expected == 0 {
            1.0
        } else {
            (self.pdr_delivered as f64 / self.pdr_expected as f64).min(1.0)
        }
    }

    pub fn carrier_busy_frac(&self) -> f64 {
        if self.window_ms == 0 {
            0.0
        } else {
            (self.busy_ms as f64 / self.window_ms as f64).min(1.0)
        }
    }

    pub fn forward_ratio(&self) -> f64 {
        if self.relayed_in == 0 {
            1.0
        } else {
            (self.relayed_out as f64 / self.relayed_in as f64).min(1.0)
        }
    }

    pub fn distinct_cells_seen(&self) -> usize {
        self.cells.len()
    }

    pub fn value(&self, f: Feature) -> Option<f64> {
        Some(match f {
            Feature::PktCount => self.pkt_count as f64,
            Feature::HelloCount => self.hello_count as f64,
            Feature::MeanRssi => return self.mean_rssi(),
            Feature::Pdr => self.pdr(),
            Feature::CarrierBusyFrac => self.carrier_busy_frac(),
            Feature::SlotViolations => self.slot_violations as f64,
            Feature::SleepViolations => self.sleep_violations as f64,
            Feature::RouteDeviations => self.route_deviations as f64,
            Feature::ForwardRatio => self.forward_ratio(),
            Feature::DistinctCellsSeen => self.cells.len() as f64,
            Feature::AdvertCount => self.advert_count as f64,
            Feature::AlteredForwards => self.altered_forwards as f64,
            Feature::RelayedIn => self.relayed_in as f64,
        })
    }

    /// Most frequent physical transmitter behind this identity, ties to the
    /// lowest id; `fallback` when nothing was transmitted.
    pub fn attributed(&self, fallback: NodeId) -> NodeId {
        self.transmitters
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(n, _)| *n)
            .unwrap_or(fallback)
    }

    /// Node held responsible for this identity's behavior: the lowest-id
    /// transmitter other than `src` when the identity was borrowed, else
    /// `src` itself.
    pub fn culprit(&self, src: NodeId) -> NodeId {
        self.impostors(src).next().unwrap_or(src)
    }

    /// Physical transmitters other than `claimed` that used this identity.
    pub fn impostors(&self, claimed: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.transmitters
            .keys()
            .copied()
            .filter(move |&n| n != claimed)
    }

    pub fn merge(&mut self, other: &SourceStats) {
        self.pkt_count += other.pkt_count;
        self.hello_count += other.hello_count;
        self.rssi_sum += other.rssi_sum;
        self.rssi_samples += other.rssi_samples;
        self.pdr_expected += other.pdr_expected;
        self.pdr_delivered += other.pdr_delivered;
        self.busy_ms += other.busy_ms;
        self.window_ms = self.window_ms.max(other.window_ms);
        self.slot_violations += other.slot_violations;
        self.sleep_violations += other.sleep_violations;
        self.route_deviations += other.route_deviations;
        self.relayed_in += other.relayed_in;
        self.relayed_out += other.relayed_out;
        self.altered_forwards += other.altered_forwards;
        self.advert_count += other.advert_count;
        self.cells.extend(other.cells.iter().copied());
        for (n, c) in &other.transmitters {
            *self.transmitters.entry(*n).or_default() += c;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StimulusVector {
    pub window: (SimTime, SimTime),
    pub sources: BTreeMap<NodeId, SourceStats>,
}

impl StimulusVector {
    pub fn new(window: (SimTime, SimTime)) -> Self {
        Self {
            window,
            sources: BTreeMap::new(),
        }
    }

    pub fn get(&self, src: NodeId) -> Option<&SourceStats> {
        self.sources.get(&src)
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn window_secs(&self) -> f64 {
        (self.window.1 - self.window.0) as f64 / 1000.0
    }

    pub fn merge_source(&mut self, src: NodeId, stats: &SourceStats) {
        self.sources.entry(src).or_default().merge(stats);
    }
}

/// One transmission overheard by a monitoring agent.
#[derive(Debug, Clone, PartialEq)]
pub struct TxObservation {
    pub link_src: NodeId,
    pub transmitter: NodeId,
    pub kind: PacketKind,
    pub rssi: f64,
    pub cell: CellId,
    pub sent_at: SimTime,
    pub airtime_ms: u64,
    pub is_forward: bool,
    pub slot_violation: bool,
    pub sleep_violation: bool,
}

/// Settled outcome of one packet handed to a relay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayOutcome {
    pub relay: NodeId,
    pub forwarded: bool,
    pub altered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PdrSample {
    pub src: NodeId,
    pub expected: u32,
    pub delivered: u32,
}

/// Raw material for one window at one monitoring agent.
#[derive(Debug, Clone, Default)]
pub struct WindowObservations {
    pub transmissions: Vec<TxObservation>,
    /// Channel occupancy not tied to a decodable frame: (transmitter, ms).
    pub channel_busy: Vec<(NodeId, u64)>,
    pub relays: Vec<RelayOutcome>,
    pub pdr: Vec<PdrSample>,
    /// Nodes blamed for a route deviation, one entry per delivery.
    pub route_deviations: Vec<NodeId>,
}

impl WindowObservations {
    pub fn clear(&mut self) {
        self.transmissions.clear();
        self.channel_busy.clear();
        self.relays.clear();
        self.pdr.clear();
        self.route_deviations.clear();
    }
}

fn slot(v: &mut StimulusVector, src: NodeId, window_ms: u64) -> &mut SourceStats {
    let e = v.sources.entry(src).or_default();
    e.window_ms = window_ms;
    e
}

/// Abstracts a window's observations into per-source features.
pub fn preprocess(obs: &WindowObservations, window: (SimTime, SimTime)) -> StimulusVector {
    let mut v = StimulusVector::new(window);
    let window_ms = window.1.saturating_sub(window.0);
    for t in &obs.transmissions {
        let e = slot(&mut v, t.link_src, window_ms);
        // forwarded load belongs to the originators, not the relay
        if !t.is_forward {
            e.pkt_count += 1;
            e.busy_ms += t.airtime_ms;
        }
        if t.kind == PacketKind::Hello {
            e.hello_count += 1;
        }
        if t.kind == PacketKind::RouteAdvert {
            e.advert_count += 1;
        }
        e.rssi_sum += t.rssi;
        e.rssi_samples += 1;
        e.cells.insert(t.cell);
        *e.transmitters.entry(t.transmitter).or_default() += 1;
        if t.slot_violation {
            e.slot_violations += 1;
        }
        if t.sleep_violation {
            e.sleep_violations += 1;
        }
    }
    for &(tx, ms) in &obs.channel_busy {
        let e = slot(&mut v, tx, window_ms);
        e.busy_ms += ms;
        e.transmitters.entry(tx).or_default();
    }
    for r in &obs.relays {
        let e = slot(&mut v, r.relay, window_ms);
        e.relayed_in += 1;
        if r.forwarded {
            e.relayed_out += 1;
        }
        if r.altered {
            e.altered_forwards += 1;
        }
    }
    for p in &obs.pdr {
        if p.expected == 0 && p.delivered == 0 {
            continue;
        }
        let e = slot(&mut v, p.src, window_ms);
        e.pdr_expected += p.expected;
        e.pdr_delivered += p.delivered;
    }
    for &n in &obs.route_deviations {
        slot(&mut v, n, window_ms).route_deviations += 1;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(link: NodeId, phys: NodeId, cell: CellId, kind: PacketKind) -> TxObservation {
        TxObservation {
            link_src: link,
            transmitter: phys,
            kind,
            rssi: -60.0,
            cell,
            sent_at: 0,
            airtime_ms: 1,
            is_forward: false,
            slot_violation: false,
            sleep_violation: false,
        }
    }

    #[test]
    fn empty_window_empty_vector() {
        let v = preprocess(&WindowObservations::default(), (0, 1000));
        assert!(v.is_empty());
    }

    #[test]
    fn full_delivery_gives_unit_pdr() {
        let mut o = WindowObservations::default();
        o.pdr.push(PdrSample {
            src: 4,
            expected: 10,
            delivered: 10,
        });
        let v = preprocess(&o, (0, 1000));
        assert_eq!(v.get(4).unwrap().pdr(), 1.0);
    }

    #[test]
    fn same_identity_in_two_cells() {
        // identity 7 heard honestly in cell 0 and spoofed by node 9 in cell 1
        let mut a = WindowObservations::default();
        a.transmissions.push(tx(7, 7, 0, PacketKind::Hello));
        let mut b = WindowObservations::default();
        b.transmissions.push(tx(7, 9, 1, PacketKind::Hello));
        b.transmissions.push(tx(7, 9, 1, PacketKind::Hello));
        let va = preprocess(&a, (0, 1000));
        let vb = preprocess(&b, (0, 1000));
        assert_eq!(va.get(7).unwrap().distinct_cells_seen(), 1);
        let mut merged = StimulusVector::new((0, 1000));
        merged.merge_source(7, va.get(7).unwrap());
        merged.merge_source(7, vb.get(7).unwrap());
        let s = merged.get(7).unwrap();
        assert_eq!(s.distinct_cells_seen(), 2);
        assert_eq!(s.hello_count, 3);
        assert_eq!(s.attributed(7), 9);
        assert_eq!(s.impostors(7).collect::<Vec<_>>(), vec![9]);
    }

    #[test]
    fn relay_accounting() {
        let mut o = WindowObservations::default();
        for i in 0..4 {
            o.relays.push(RelayOutcome {
                relay: 3,
                forwarded: i % 2 == 0,
                altered: false,
            });
        }
        let v = preprocess(&o, (0, 1000));
        assert_eq!(v.get(3).unwrap().forward_ratio(), 0.5);
        assert_eq!(v.get(3).unwrap().value(Feature::RelayedIn), Some(4.0));
    }

    #[test]
    fn busy_fraction() {
        let mut o = WindowObservations::default();
        o.channel_busy.push((5, 800));
        let v = preprocess(&o, (1000, 2000));
        assert!((v.get(5).unwrap().carrier_busy_frac() - 0.8).abs() < 1e-12);
    }
}
