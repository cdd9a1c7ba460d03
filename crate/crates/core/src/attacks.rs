//! Attacker behaviors injected into selected nodes.
//!
//! An attacker keeps behaving like an ordinary sensor and additionally
//! overrides how it forwards packets ([`on_forward`]) or emits extra traffic
//! ([`Attacker::on_generate`]) while its attack window is active.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::{Destination, Packet, PacketKind, SimTime};
use crate::topology::NodeId;

pub const REPLAY_BUFFER_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackKind {
    HelloFlood,
    Sybil,
    Wormhole,
    BlackHole,
    SinkHole,
    SelectiveForwarding,
    BroadcastFlood,
    TargetFlood,
    FalseIdBroadcastFlood,
    FalseIdTargetFlood,
    Misdirection,
    Jamming,
    Replay,
    DataAlteration,
}

impl AttackKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttackKind::HelloFlood => "HelloFlood",
            AttackKind::Sybil => "Sybil",
            AttackKind::Wormhole => "Wormhole",
            AttackKind::BlackHole => "BlackHole",
            AttackKind::SinkHole => "SinkHole",
            AttackKind::SelectiveForwarding => "SelectiveForwarding",
            AttackKind::BroadcastFlood => "BroadcastFlood",
            AttackKind::TargetFlood => "TargetFlood",
            AttackKind::FalseIdBroadcastFlood => "FalseIdBroadcastFlood",
            AttackKind::FalseIdTargetFlood => "FalseIdTargetFlood",
            AttackKind::Misdirection => "Misdirection",
            AttackKind::Jamming => "Jamming",
            AttackKind::Replay => "Replay",
            AttackKind::DataAlteration => "DataAlteration",
        }
    }

    /// Kinds that emit their own traffic on a rate schedule.
    pub fn generates(&self) -> bool {
        matches!(
            self,
            AttackKind::HelloFlood
                | AttackKind::Sybil
                | AttackKind::SinkHole
                | AttackKind::BroadcastFlood
                | AttackKind::TargetFlood
                | AttackKind::FalseIdBroadcastFlood
                | AttackKind::FalseIdTargetFlood
                | AttackKind::Replay
                | AttackKind::Jamming
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub attacker: NodeId,
    /// Wormhole exit node.
    #[serde(default)]
    pub peer: Option<NodeId>,
    /// Emissions per second for generating kinds.
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// Selective-forwarding drop ratio.
    #[serde(default = "default_drop_ratio")]
    pub drop_ratio: f64,
    /// Drop only packets carrying this payload tag (selective forwarding).
    #[serde(default)]
    pub drop_tag: Option<u64>,
    /// Identities used by Sybil and false-identity floods.
    #[serde(default)]
    pub fake_ids: Vec<NodeId>,
    /// Flood target, or the misdirection destination.
    #[serde(default)]
    pub target: Option<NodeId>,
    /// Per-reception corruption probability while jamming.
    #[serde(default = "default_jam_prob")]
    pub jam_prob: f64,
    /// Fraction of each frame the jammer keeps the channel busy.
    #[serde(default = "default_jam_duty")]
    pub jam_duty: f64,
    /// Range multiplier for hello floods.
    #[serde(default = "default_range_boost")]
    pub range_boost: f64,
    pub start: SimTime,
    pub stop: SimTime,
}

fn default_rate() -> f64 {
    100.0
}
fn default_drop_ratio() -> f64 {
    0.5
}
fn default_jam_prob() -> f64 {
    0.8
}
fn default_jam_duty() -> f64 {
    0.9
}
fn default_range_boost() -> f64 {
    3.0
}

impl AttackSpec {
    pub fn new(kind: AttackKind, attacker: NodeId, start: SimTime, stop: SimTime) -> Self {
        Self {
            kind,
            attacker,
            peer: None,
            rate: default_rate(),
            drop_ratio: default_drop_ratio(),
            drop_tag: None,
            fake_ids: Vec::new(),
            target: None,
            jam_prob: default_jam_prob(),
            jam_duty: default_jam_duty(),
            range_boost: default_range_boost(),
            start,
            stop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("{}: {m}", self.kind.as_str())));
        if self.start >= self.stop {
            return bad("start must be before stop");
        }
        if self.kind.generates() && !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate must be positive");
        }
        match self.kind {
            AttackKind::SelectiveForwarding
                if !(self.drop_ratio > 0.0 && self.drop_ratio <= 1.0) =>
            {
                bad("drop_ratio must be in (0, 1]")
            }
            AttackKind::Wormhole if self.peer.is_none() => bad("wormhole needs a peer"),
            AttackKind::Wormhole if self.peer == Some(self.attacker) => {
                bad("wormhole peer must differ from the attacker")
            }
            AttackKind::Sybil | AttackKind::FalseIdBroadcastFlood | AttackKind::FalseIdTargetFlood
                if self.fake_ids.is_empty() =>
            {
                bad("fake_ids must not be empty")
            }
            AttackKind::TargetFlood | AttackKind::FalseIdTargetFlood if self.target.is_none() => {
                bad("target flood needs a target")
            }
            AttackKind::Jamming
                if !(0.0..=1.0).contains(&self.jam_prob) || !(0.0..=1.0).contains(&self.jam_duty) =>
            {
                bad("jam_prob and jam_duty must be in [0, 1]")
            }
            AttackKind::HelloFlood if !(self.range_boost >= 1.0) => {
                bad("range_boost must be >= 1")
            }
            _ => Ok(()),
        }
    }

    pub fn is_active(&self, at: SimTime) -> bool {
        at >= self.start && at < self.stop
    }

    /// Nodes whose behavior this spec overrides.
    pub fn actors(&self) -> Vec<NodeId> {
        let mut v = vec![self.attacker];
        if let Some(p) = self.peer {
            v.push(p);
        }
        v
    }

    /// Interval between emissions, in ms.
    pub fn emission_interval(&self) -> SimTime {
        ((1000.0 / self.rate).round() as SimTime).max(1)
    }

    /// Nominal emission times over the active window (before jitter).
    pub fn emission_times(&self) -> Vec<SimTime> {
        if !self.kind.generates() {
            return Vec::new();
        }
        let step = self.emission_interval();
        (0..)
            .map(|k| self.start + k * step)
            .take_while(|&t| t < self.stop)
            .collect()
    }
}

/// What an attacker does with a packet it was asked to forward.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardAction {
    Forward,
    Drop,
    Modify(Packet),
    Misroute(NodeId),
    Tunnel(NodeId),
}

/// Deterministic selection hash mapped to `[0, 1)`.
pub fn selection_hash(seq: u64) -> f64 {
    // splitmix64 finalizer
    let mut z = seq.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

pub fn on_forward(spec: &AttackSpec, pkt: &Packet, at: SimTime) -> ForwardAction {
    if !spec.is_active(at) {
        return ForwardAction::Forward;
    }
    match spec.kind {
        AttackKind::BlackHole | AttackKind::SinkHole => ForwardAction::Drop,
        AttackKind::SelectiveForwarding => {
            let selected = match spec.drop_tag {
                Some(tag) => pkt.payload_tag == tag,
                None => selection_hash(pkt.seq) < spec.drop_ratio,
            };
            if selected {
                ForwardAction::Drop
            } else {
                ForwardAction::Forward
            }
        }
        AttackKind::Misdirection => match spec.target {
            Some(t) => ForwardAction::Misroute(t),
            None => ForwardAction::Forward,
        },
        AttackKind::Wormhole => match spec.peer {
            Some(p) => ForwardAction::Tunnel(p),
            None => ForwardAction::Forward,
        },
        AttackKind::DataAlteration => {
            let mut altered = pkt.clone();
            altered.payload_tag ^= 0xa5a5_a5a5;
            ForwardAction::Modify(altered)
        }
        _ => ForwardAction::Forward,
    }
}

/// Mutable per-attack state: emission counter and the replay buffer.
#[derive(Debug, Clone)]
pub struct Attacker {
    pub spec: AttackSpec,
    emitted: u64,
    replay: VecDeque<Packet>,
}

impl Attacker {
    pub fn new(spec: AttackSpec) -> Self {
        Self {
            spec,
            emitted: 0,
            replay: VecDeque::new(),
        }
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Records an overheard data packet for later replay.
    pub fn overhear(&mut self, pkt: &Packet) {
        if self.spec.kind != AttackKind::Replay || pkt.kind != PacketKind::Data {
            return;
        }
        if pkt.true_src == self.spec.attacker {
            return;
        }
        if self.replay.len() == REPLAY_BUFFER_CAP {
            self.replay.pop_front();
        }
        self.replay.push_back(pkt.clone());
    }

    pub fn replay_buffer_len(&self) -> usize {
        self.replay.len()
    }

    /// Packets emitted by one generation tick at `at`. `next_seq` allocates
    /// fresh sequence numbers.
    pub fn on_generate(&mut self, at: SimTime, next_seq: &mut impl FnMut() -> u64) -> Vec<Packet> {
        let spec = &self.spec;
        if !spec.is_active(at) {
            return Vec::new();
        }
        let me = spec.attacker;
        let fake = |k: u64| spec.fake_ids[(k % spec.fake_ids.len() as u64) as usize];
        let spoof = |mut p: Packet, claimed: NodeId| {
            p.claimed_src = claimed;
            p.link_src = claimed;
            p
        };
        let out = match spec.kind {
            AttackKind::HelloFlood => vec![Packet::originate(
                me,
                Destination::Broadcast,
                PacketKind::Hello,
                at,
                next_seq(),
            )],
            AttackKind::SinkHole => vec![Packet::originate(
                me,
                Destination::Broadcast,
                PacketKind::RouteAdvert,
                at,
                next_seq(),
            )],
            AttackKind::BroadcastFlood => vec![Packet::originate(
                me,
                Destination::Broadcast,
                PacketKind::Data,
                at,
                next_seq(),
            )],
            AttackKind::TargetFlood => vec![Packet::originate(
                me,
                Destination::Node(spec.target.unwrap_or(me)),
                PacketKind::Data,
                at,
                next_seq(),
            )],
            AttackKind::Sybil => vec![spoof(
                Packet::originate(me, Destination::Broadcast, PacketKind::Hello, at, next_seq()),
                fake(self.emitted),
            )],
            AttackKind::FalseIdBroadcastFlood => vec![spoof(
                Packet::originate(me, Destination::Broadcast, PacketKind::Data, at, next_seq()),
                fake(self.emitted),
            )],
            AttackKind::FalseIdTargetFlood => vec![spoof(
                Packet::originate(
                    me,
                    Destination::Node(spec.target.unwrap_or(me)),
                    PacketKind::Data,
                    at,
                    next_seq(),
                ),
                fake(self.emitted),
            )],
            AttackKind::Replay => match self.replay.pop_front() {
                Some(orig) => {
                    let mut p = orig.clone();
                    p.true_src = me;
                    p.hop_trace = vec![me];
                    p.sent_at = at;
                    p.next_hop = p.dst;
                    self.replay.push_back(orig);
                    vec![p]
                }
                None => Vec::new(),
            },
            _ => Vec::new(),
        };
        self.emitted += out.len() as u64;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(seq: u64) -> Packet {
        Packet::originate(5, Destination::Node(1), PacketKind::Data, 0, seq)
    }

    #[test]
    fn blackhole_drops_everything() {
        let s = AttackSpec::new(AttackKind::BlackHole, 9, 0, 1000);
        for seq in 0..100 {
            assert_eq!(on_forward(&s, &pkt(seq), 10), ForwardAction::Drop);
        }
    }

    #[test]
    fn inactive_window_forwards_and_emits_nothing() {
        let s = AttackSpec::new(AttackKind::BlackHole, 9, 100, 200);
        assert_eq!(on_forward(&s, &pkt(1), 50), ForwardAction::Forward);
        assert_eq!(on_forward(&s, &pkt(1), 200), ForwardAction::Forward);
        let mut a = Attacker::new(AttackSpec::new(AttackKind::HelloFlood, 9, 100, 200));
        let mut seq = 0;
        assert!(a.on_generate(50, &mut || {
            seq += 1;
            seq
        })
        .is_empty());
    }

    #[test]
    fn selective_forwarding_ratio_one_is_blackhole() {
        let mut s = AttackSpec::new(AttackKind::SelectiveForwarding, 9, 0, 1000);
        s.drop_ratio = 1.0;
        let b = AttackSpec::new(AttackKind::BlackHole, 9, 0, 1000);
        for seq in 0..1000 {
            assert_eq!(on_forward(&s, &pkt(seq), 1), on_forward(&b, &pkt(seq), 1));
        }
    }

    #[test]
    fn selective_forwarding_drop_fraction() {
        let mut s = AttackSpec::new(AttackKind::SelectiveForwarding, 9, 0, 1000);
        s.drop_ratio = 0.3;
        let n = 10_000;
        let dropped = (0..n)
            .filter(|&seq| on_forward(&s, &pkt(seq), 1) == ForwardAction::Drop)
            .count();
        let frac = dropped as f64 / n as f64;
        assert!((frac - 0.3).abs() <= 0.02, "drop fraction {frac}");
    }

    #[test]
    fn selective_forwarding_by_tag() {
        let mut s = AttackSpec::new(AttackKind::SelectiveForwarding, 9, 0, 1000);
        s.drop_tag = Some(42);
        let mut p = pkt(1);
        assert_eq!(on_forward(&s, &p, 1), ForwardAction::Forward);
        p.payload_tag = 42;
        assert_eq!(on_forward(&s, &p, 1), ForwardAction::Drop);
    }

    #[test]
    fn misdirection_wormhole_alteration() {
        let mut m = AttackSpec::new(AttackKind::Misdirection, 9, 0, 1000);
        m.target = Some(33);
        assert_eq!(on_forward(&m, &pkt(1), 1), ForwardAction::Misroute(33));
        let mut w = AttackSpec::new(AttackKind::Wormhole, 9, 0, 1000);
        w.peer = Some(40);
        assert_eq!(on_forward(&w, &pkt(1), 1), ForwardAction::Tunnel(40));
        let d = AttackSpec::new(AttackKind::DataAlteration, 9, 0, 1000);
        match on_forward(&d, &pkt(1), 1) {
            ForwardAction::Modify(p) => {
                assert_ne!(p.payload_tag, pkt(1).payload_tag);
                assert_eq!(p.claimed_src, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hello_flood_rate_times_duration() {
        let mut s = AttackSpec::new(AttackKind::HelloFlood, 9, 0, 2000);
        s.rate = 10.0;
        let times = s.emission_times();
        assert_eq!(times.len(), 20);
        let mut a = Attacker::new(s);
        let mut seq = 0;
        let mut alloc = || {
            seq += 1;
            seq
        };
        let total: usize = times
            .iter()
            .map(|&t| a.on_generate(t, &mut alloc).len())
            .sum();
        assert_eq!(total, 20);
    }

    #[test]
    fn sybil_round_robin() {
        let mut s = AttackSpec::new(AttackKind::Sybil, 9, 0, 10_000);
        s.fake_ids = vec![100, 101, 102];
        let mut a = Attacker::new(s);
        let mut seq = 0;
        let mut counts = std::collections::BTreeMap::new();
        for k in 0..6 {
            let p = a
                .on_generate(k * 10, &mut || {
                    seq += 1;
                    seq
                })
                .pop()
                .unwrap();
            assert_eq!(p.true_src, 9);
            assert_eq!(p.hop_trace, vec![9]);
            *counts.entry(p.claimed_src).or_insert(0) += 1;
        }
        assert_eq!(counts.into_iter().collect::<Vec<_>>(), vec![(100, 2), (101, 2), (102, 2)]);
    }

    #[test]
    fn false_id_sets_wrong_source() {
        let mut s = AttackSpec::new(AttackKind::FalseIdTargetFlood, 9, 0, 1000);
        s.fake_ids = vec![12];
        s.target = Some(2);
        let mut a = Attacker::new(s);
        let p = a.on_generate(5, &mut || 77).pop().unwrap();
        assert_eq!(p.claimed_src, 12);
        assert_eq!(p.link_src, 12);
        assert_eq!(p.true_src, 9);
        assert!(p.is_spoofed());
        assert_eq!(p.dst, Destination::Node(2));
    }

    #[test]
    fn replay_keeps_claimed_source_and_caps_buffer() {
        let s = AttackSpec::new(AttackKind::Replay, 9, 0, 100_000);
        let mut a = Attacker::new(s);
        for seq in 0..100 {
            a.overhear(&pkt(seq));
        }
        assert_eq!(a.replay_buffer_len(), REPLAY_BUFFER_CAP);
        let p = a.on_generate(500, &mut || unreachable!()).pop().unwrap();
        assert_eq!(p.claimed_src, 5);
        assert_eq!(p.seq, 100 - REPLAY_BUFFER_CAP as u64);
        assert_eq!(p.sent_at, 500);
        assert_eq!(p.hop_trace, vec![9]);
    }

    #[test]
    fn validation() {
        let mut s = AttackSpec::new(AttackKind::SelectiveForwarding, 9, 10, 10);
        assert!(s.validate().is_err());
        s.stop = 20;
        s.drop_ratio = 0.0;
        assert!(s.validate().is_err());
        s.drop_ratio = 1.0;
        assert!(s.validate().is_ok());
        let w = AttackSpec::new(AttackKind::Wormhole, 9, 0, 1);
        assert!(w.validate().is_err());
    }
}
