use serde::{Deserialize, Serialize};

use super::SimTime;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PacketKind {
    Data,
    Hello,
    RouteAdvert,
    Report,
    Heartbeat,
    PolicyUpdate,
    Alert,
}

impl PacketKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PacketKind::Data => "Data",
            PacketKind::Hello => "Hello",
            PacketKind::RouteAdvert => "RouteAdvert",
            PacketKind::Report => "Report",
            PacketKind::Heartbeat => "Heartbeat",
            PacketKind::PolicyUpdate => "PolicyUpdate",
            PacketKind::Alert => "Alert",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Destination {
    Node(NodeId),
    Broadcast,
}

impl Destination {
    pub fn node(&self) -> Option<NodeId> {
        match self {
            Destination::Node(n) => Some(*n),
            Destination::Broadcast => None,
        }
    }
}

/// A radio frame as seen on the air.
///
/// `hop_trace` is trusted metadata: it starts with the physical node that
/// first put the packet on the air and grows by one entry per forward.
/// `link_src` is the MAC-layer sender address of the current transmission;
/// it equals `claimed_src` on the first hop.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub claimed_src: NodeId,
    pub true_src: NodeId,
    pub link_src: NodeId,
    pub dst: Destination,
    pub next_hop: Destination,
    pub kind: PacketKind,
    pub hop_trace: Vec<NodeId>,
    /// Origination time.
    pub origin_at: SimTime,
    /// Time of the current transmission.
    pub sent_at: SimTime,
    pub seq: u64,
    pub payload_tag: u64,
}

impl Packet {
    pub fn originate(
        src: NodeId,
        dst: Destination,
        kind: PacketKind,
        at: SimTime,
        seq: u64,
    ) -> Self {
        Self {
            claimed_src: src,
            true_src: src,
            link_src: src,
            dst,
            next_hop: dst,
            kind,
            hop_trace: vec![src],
            origin_at: at,
            sent_at: at,
            seq,
            payload_tag: seq,
        }
    }

    /// Physical transmitter of the current hop.
    pub fn transmitter(&self) -> NodeId {
        *self.hop_trace.last().expect("hop_trace is never empty")
    }

    pub fn is_forward(&self) -> bool {
        self.hop_trace.len() > 1
    }

    pub fn is_spoofed(&self) -> bool {
        self.claimed_src != self.true_src
    }

    /// The packet as re-transmitted by `relay` toward `next`.
    pub fn forwarded_by(&self, relay: NodeId, next: Destination, at: SimTime) -> Packet {
        let mut p = self.clone();
        p.hop_trace.push(relay);
        p.link_src = relay;
        p.next_hop = next;
        p.sent_at = at;
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forwarding_grows_trace_by_one() {
        let p = Packet::originate(7, Destination::Node(2), PacketKind::Data, 10, 1);
        assert_eq!(p.transmitter(), 7);
        assert!(!p.is_forward());
        let f = p.forwarded_by(8, Destination::Node(2), 20);
        assert_eq!(f.hop_trace, vec![7, 8]);
        assert_eq!(f.link_src, 8);
        assert_eq!(f.claimed_src, 7);
        assert_eq!(f.transmitter(), 8);
        let g = f.forwarded_by(9, Destination::Node(2), 30);
        assert_eq!(g.hop_trace.len(), f.hop_trace.len() + 1);
    }
}
