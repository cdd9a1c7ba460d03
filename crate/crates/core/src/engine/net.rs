//! Sensor-tier traffic: origination in TDMA slots, hop-by-hop forwarding,
//! attack behavior, jamming, delivery at the cluster node and the
//! promiscuous monitoring that feeds the local agent.

use std::rc::Rc;

use rand::Rng;

use super::{Event, Hop, PendingRelay, Simulation};
use crate::agent::{RelayOutcome, TxObservation};
use crate::attacks::{on_forward, AttackKind, ForwardAction};
use crate::detectors::{check_route, check_smac, check_tdma};
use crate::error::Result;
use crate::response::Operation;
use crate::scenario::IdsMode;
use crate::simcore::{Destination, Packet, PacketKind, SimTime, TraceKind};
use crate::topology::{NodeId, NodeRole};

/// Air time of one frame transmission.
pub(crate) const AIRTIME_MS: SimTime = 1;

/// Whether one reception is lost to a jamming burst.
pub fn jam_corrupts(rng: &mut impl Rng, jam_prob: f64) -> bool {
    rng.gen_bool(jam_prob.clamp(0.0, 1.0))
}

fn path(p: &[NodeId]) -> String {
    p.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(">")
}

fn dst_str(d: Destination) -> String {
    match d {
        Destination::Node(n) => n.to_string(),
        Destination::Broadcast => "*".into(),
    }
}

impl Simulation {
    /// Schedules the originations of window `k` for every alive sensor.
    pub(crate) fn schedule_originations(&mut self, k: u64) -> Result<()> {
        let w = self.window_ms();
        let start = k * w;
        let mut due = Vec::new();
        for (cell, mac) in self.macs.iter().enumerate() {
            let frame = mac.tdma.frame_len();
            let frames = w / frame;
            for &s in self.topo.sensors_in_cell(cell) {
                if !self.is_alive(s) {
                    continue;
                }
                let o = mac.offsets[&s];
                for j in 0..frames.min(10) {
                    let kind = match j {
                        0 => PacketKind::Hello,
                        j if j % 2 == 1 => PacketKind::Data,
                        _ => continue,
                    };
                    let t = start + j * frame + o;
                    if t < self.scenario.duration {
                        due.push((t, s, kind));
                    }
                }
            }
        }
        due.sort_by_key(|&(t, s, _)| (t, s));
        for (t, node, kind) in due {
            self.schedule(t, Event::Originate { node, kind })?;
        }
        Ok(())
    }

    /// Earliest transmit time at or after `ready` inside `node`'s own slot,
    /// reserving the air time.
    pub(crate) fn slot_time(&mut self, node: NodeId, ready: SimTime) -> SimTime {
        let Some(cell) = self.topo.cell_of(node) else {
            return ready;
        };
        let mac = &self.macs[cell];
        let frame = mac.tdma.frame_len();
        let slot = mac.tdma.slot_len();
        let o = mac.offsets.get(&node).copied().unwrap_or(0);
        let mut t = ready.max(self.tx_free_at[node as usize]);
        loop {
            let s = t - t % frame + o;
            if t < s {
                t = s;
            }
            if t + AIRTIME_MS <= s + slot {
                break;
            }
            t = s + frame;
        }
        self.tx_free_at[node as usize] = t + AIRTIME_MS;
        t
    }

    fn send_in_slot(&mut self, node: NodeId, mut hop: Hop) -> Result<()> {
        let t = self.slot_time(node, self.now());
        hop.pkt.sent_at = t;
        self.schedule(t, Event::Send(Box::new(hop)))
    }

    pub(crate) fn originate(&mut self, node: NodeId, kind: PacketKind) -> Result<()> {
        if !self.is_alive(node) {
            return Ok(());
        }
        let w = self.window();
        let Some(rec) = self.record(node) else {
            return Ok(());
        };
        let range = self.topo.graph().range();
        match kind {
            PacketKind::Hello => {
                if !crate::response::permit(rec, Operation::Forward, w) {
                    return Ok(());
                }
                self.next_seq += 1;
                let pkt = Packet::originate(
                    node,
                    Destination::Broadcast,
                    PacketKind::Hello,
                    self.now(),
                    self.next_seq,
                );
                self.send_in_slot(
                    node,
                    Hop {
                        pkt,
                        route: None,
                        idx: 0,
                        range,
                    },
                )
            }
            _ => {
                if !crate::response::permit(rec, Operation::Originate, w) {
                    return Ok(());
                }
                let Some(dst) = self.topo.cell_of(node).and_then(|c| self.cell_lpa[c]) else {
                    return Ok(());
                };
                let Some(route) = self.route(node, dst) else {
                    return Ok(());
                };
                if route.len() < 2 {
                    return Ok(());
                }
                self.next_seq += 1;
                let mut pkt =
                    Packet::originate(node, Destination::Node(dst), kind, self.now(), self.next_seq);
                pkt.next_hop = Destination::Node(route[1]);
                self.counters.data_originated += 1;
                self.pdr_book.entry((node, w)).or_default().0 += 1;
                self.send_in_slot(
                    node,
                    Hop {
                        pkt,
                        route: Some(route),
                        idx: 0,
                        range,
                    },
                )
            }
        }
    }

    pub(crate) fn send(&mut self, hop: Hop) -> Result<()> {
        if !self.is_alive(hop.pkt.transmitter()) {
            return Ok(());
        }
        self.transmit(hop)
    }

    /// Puts a frame on the air now.
    pub(crate) fn transmit(&mut self, mut hop: Hop) -> Result<()> {
        let now = self.now();
        hop.pkt.sent_at = now;
        let pkt = &hop.pkt;
        let tx = pkt.transmitter();
        self.counters.transmissions += 1;
        self.energy.charge_tx(tx);
        if pkt.dst == Destination::Broadcast {
            self.counters.broadcast_messages += 1;
        }
        self.trace.push(now, TraceKind::Tx, tx, Some(pkt.seq), || {
            format!(
                "kind={} src={} true={} link={} dst={} next={} hops={}",
                pkt.kind.as_str(),
                pkt.claimed_src,
                pkt.true_src,
                pkt.link_src,
                dst_str(pkt.dst),
                dst_str(pkt.next_hop),
                pkt.hop_trace.len()
            )
        });
        if pkt.is_forward() {
            if let Some(p) = self.pending.remove(&(tx, pkt.seq)) {
                let forwarded = pkt.next_hop == Destination::Node(p.planned);
                let altered = pkt.payload_tag != p.payload;
                self.book_relay(tx, forwarded, altered);
            }
        }
        if pkt.kind != PacketKind::Alert {
            self.monitor_tx(&hop.pkt);
        }
        let at = now + self.scenario.schedules.hop_delay;
        self.schedule(at, Event::Arrive(Box::new(hop)))
    }

    /// The transmitter's local agent overhears every frame in its cells.
    fn monitor_tx(&mut self, pkt: &Packet) {
        let txr = pkt.transmitter();
        let Some(home) = self.topo.cell_of(txr) else {
            return;
        };
        let Some(l) = self.active_lpa(home) else {
            return;
        };
        let rssi = self
            .scenario
            .radio
            .rssi_between(self.pos[txr as usize], self.pos[l as usize]);
        let sched_cell = self
            .topo
            .cell_of(pkt.link_src)
            .filter(|&c| self.cell_lpa[c] == Some(l))
            .unwrap_or(home);
        let mac = &self.macs[sched_cell];
        let slot = check_tdma(pkt, &mac.tdma);
        let sleep = check_smac(pkt, &mac.smac);
        let hierarchical = self.scenario.mode == IdsMode::Hierarchical;
        if hierarchical {
            self.energy.charge_ids(l, 1);
        }
        let lpa = self.lpas.get_mut(&l).expect("active agent exists");
        lpa.obs.transmissions.push(TxObservation {
            link_src: pkt.link_src,
            transmitter: txr,
            kind: pkt.kind,
            rssi,
            cell: home,
            sent_at: pkt.sent_at,
            airtime_ms: AIRTIME_MS,
            is_forward: pkt.is_forward(),
            slot_violation: slot.is_some(),
            sleep_violation: sleep.is_some(),
        });
        lpa.layer.extend(slot);
        lpa.layer.extend(sleep);
    }

    pub(crate) fn book_relay(&mut self, relay: NodeId, forwarded: bool, altered: bool) {
        let Some(l) = self.topo.cell_of(relay).and_then(|c| self.active_lpa(c)) else {
            return;
        };
        self.lpas
            .get_mut(&l)
            .expect("active agent exists")
            .obs
            .relays
            .push(RelayOutcome {
                relay,
                forwarded,
                altered,
            });
    }

    fn jammed(&mut self, r: NodeId, t: SimTime) -> bool {
        let mut hit = false;
        for i in 0..self.attackers.len() {
            let spec = &self.attackers[i].spec;
            if spec.kind != AttackKind::Jamming || !spec.is_active(t) || spec.attacker == r {
                continue;
            }
            let j = spec.attacker;
            if !self.is_alive(j) {
                continue;
            }
            let frame = self
                .topo
                .cell_of(j)
                .map_or(100, |c| self.macs[c].tdma.frame_len());
            let phase = (t - spec.start) % frame;
            let burst = (spec.jam_duty * frame as f64) as SimTime;
            let near = self.pos[j as usize].distance(&self.pos[r as usize]) <= self.topo.graph().range();
            if phase < burst && near {
                let p = spec.jam_prob;
                hit |= jam_corrupts(&mut self.rng, p);
            }
        }
        hit
    }

    pub(crate) fn arrive(&mut self, hop: Hop) -> Result<()> {
        let now = self.now();
        let txr = hop.pkt.transmitter();
        let base_range = self.topo.graph().range();
        let receivers: Vec<NodeId> = if hop.range <= base_range {
            self.topo.graph().neighbors(txr).to_vec()
        } else {
            let p = self.pos[txr as usize];
            self.topo
                .nodes()
                .iter()
                .filter(|n| {
                    n.id != txr
                        && matches!(n.role, NodeRole::Sensor | NodeRole::ClusterNode)
                        && n.pos.distance(&p) <= hop.range
                })
                .map(|n| n.id)
                .collect()
        };
        let intended = hop.pkt.next_hop.node();
        let isolated_tx = self.is_isolated(txr);
        let every_sensor = self.scenario.mode == IdsMode::EverySensor;
        let mut handoff = None;
        for r in receivers {
            if !self.is_alive(r) {
                continue;
            }
            self.energy.charge_rx(r);
            if self.jammed(r, now) {
                self.counters.jammed += 1;
                if Some(r) == intended {
                    self.trace
                        .push(now, TraceKind::Drop, r, Some(hop.pkt.seq), || "reason=jammed".into());
                }
                continue;
            }
            for a in self.attackers.iter_mut() {
                if a.spec.attacker == r {
                    a.overhear(&hop.pkt);
                }
            }
            if every_sensor
                && hop.pkt.kind != PacketKind::Alert
                && self.topo.role(r) == Some(NodeRole::Sensor)
                && !self.is_actor(r)
            {
                self.sensor_inspect(r, &hop.pkt)?;
            }
            if Some(r) == intended {
                if isolated_tx {
                    self.counters.discarded += 1;
                    self.trace.push(now, TraceKind::Discard, r, Some(hop.pkt.seq), || {
                        format!("from={txr} reason=isolated")
                    });
                } else {
                    handoff = Some(r);
                }
            }
        }
        if let Some(r) = handoff {
            self.trace.push(now, TraceKind::Rx, r, Some(hop.pkt.seq), || {
                format!("from={txr} kind={}", hop.pkt.kind.as_str())
            });
            self.receive(r, hop)?;
        }
        Ok(())
    }

    /// Every-sensor mode: the receiver checks the frame against its own
    /// cell's schedules and broadcasts an alert on a violation.
    fn sensor_inspect(&mut self, r: NodeId, pkt: &Packet) -> Result<()> {
        self.energy.charge_ids(r, 1);
        let Some(cell) = self.topo.cell_of(r) else {
            return Ok(());
        };
        let mac = &self.macs[cell];
        if !mac.offsets.contains_key(&pkt.link_src) {
            return Ok(());
        }
        let found = check_tdma(pkt, &mac.tdma).or_else(|| check_smac(pkt, &mac.smac));
        let Some(f) = found else { return Ok(()) };
        let key = (r, f.detector.as_str(), f.subject, self.window());
        if !self.alert_sent.insert(key) {
            return Ok(());
        }
        self.counters.alert_messages += 1;
        self.counters.alert_broadcasts += 1;
        self.counters.broadcast_messages += 1;
        self.energy.charge_tx(r);
        let neighbors = self.topo.graph().neighbors(r).to_vec();
        for n in neighbors {
            if self.is_alive(n) {
                self.energy.charge_rx(n);
            }
        }
        let now = self.now();
        self.trace.push(now, TraceKind::Alert, r, f.evidence.seq, || {
            format!("broadcast subject={} detector={}", f.subject, f.detector.as_str())
        });
        Ok(())
    }

    /// The addressed next hop got the frame.
    fn receive(&mut self, r: NodeId, hop: Hop) -> Result<()> {
        let now = self.now();
        if hop.pkt.dst == Destination::Node(r) {
            return self.deliver(r, hop.pkt);
        }
        if self.topo.role(r) != Some(NodeRole::Sensor) {
            return Ok(());
        }
        let Some(route) = hop.route.clone() else {
            return Ok(());
        };
        let idx = hop.idx + 1;
        if route.get(idx) != Some(&r) {
            return Ok(());
        }
        let Some(&next) = route.get(idx + 1) else {
            return Ok(());
        };
        let pkt = hop.pkt;
        self.pending.insert(
            (r, pkt.seq),
            PendingRelay {
                planned: next,
                payload: pkt.payload_tag,
            },
        );
        let frame = self
            .topo
            .cell_of(r)
            .map_or(100, |c| self.macs[c].tdma.frame_len());
        self.schedule(now + 3 * frame, Event::Settle { relay: r, seq: pkt.seq })?;

        let action = match self.actor_attack(r, true) {
            Some(i) => on_forward(&self.attackers[i].spec, &pkt, now),
            None => {
                let w = self.window();
                if self
                    .record(r)
                    .is_some_and(|rec| crate::response::permit(rec, Operation::Forward, w))
                {
                    ForwardAction::Forward
                } else {
                    ForwardAction::Drop
                }
            }
        };
        let range = hop.range;
        match action {
            ForwardAction::Forward => {
                let out = pkt.forwarded_by(r, Destination::Node(next), now);
                self.send_in_slot(r, Hop { pkt: out, route: Some(route), idx, range })
            }
            ForwardAction::Modify(p) => {
                let out = p.forwarded_by(r, Destination::Node(next), now);
                self.send_in_slot(r, Hop { pkt: out, route: Some(route), idx, range })
            }
            ForwardAction::Drop => {
                self.counters.dropped += 1;
                self.trace
                    .push(now, TraceKind::Drop, r, Some(pkt.seq), || "reason=relay".into());
                Ok(())
            }
            ForwardAction::Misroute(target) => {
                let dst = pkt.dst.node().unwrap_or(target);
                let mut detour = vec![r];
                match self.route(target, dst) {
                    Some(rest) => detour.extend(rest.iter().copied()),
                    None => detour.push(target),
                }
                let out = pkt.forwarded_by(r, Destination::Node(target), now);
                self.send_in_slot(
                    r,
                    Hop {
                        pkt: out,
                        route: Some(Rc::from(detour)),
                        idx: 0,
                        range,
                    },
                )
            }
            ForwardAction::Tunnel(peer) => {
                self.trace.push(now, TraceKind::Tunnel, r, Some(pkt.seq), || {
                    format!("peer={peer}")
                });
                let out = pkt.forwarded_by(r, Destination::Node(peer), now);
                let at = now + self.scenario.schedules.hop_delay;
                self.schedule(
                    at,
                    Event::Tunnel(Box::new(Hop {
                        pkt: out,
                        route: None,
                        idx: 0,
                        range,
                    })),
                )
            }
        }
    }

    /// A tunneled packet reappears at the wormhole exit.
    pub(crate) fn tunnel_exit(&mut self, hop: Hop) -> Result<()> {
        let Destination::Node(peer) = hop.pkt.next_hop else {
            return Ok(());
        };
        if !self.is_alive(peer) {
            return Ok(());
        }
        let Some(dst) = hop.pkt.dst.node() else {
            return Ok(());
        };
        if dst == peer {
            return self.deliver(peer, hop.pkt);
        }
        let Some(route) = self.route(peer, dst) else {
            return Ok(());
        };
        if route.len() < 2 {
            return Ok(());
        }
        let out = hop.pkt.forwarded_by(peer, Destination::Node(route[1]), self.now());
        self.send_in_slot(
            peer,
            Hop {
                pkt: out,
                route: Some(route),
                idx: 0,
                range: hop.range,
            },
        )
    }

    /// Destination processing at a cluster node.
    fn deliver(&mut self, c: NodeId, pkt: Packet) -> Result<()> {
        let now = self.now();
        self.trace.push(now, TraceKind::Deliver, c, Some(pkt.seq), || {
            format!(
                "kind={} src={} true={} trace={}",
                pkt.kind.as_str(),
                pkt.claimed_src,
                pkt.true_src,
                path(&pkt.hop_trace)
            )
        });
        let acting = self.lpas.get(&c).is_some_and(|l| l.acting) && self.is_alive(c);
        if !acting || pkt.kind != PacketKind::Data {
            return Ok(());
        }
        let w = self.window_ms();
        let finding = check_route(&pkt, &self.topo, self.exclusion_at(pkt.origin_at), now);
        if !pkt.is_spoofed() {
            if let Some(e) = self.pdr_book.get_mut(&(pkt.claimed_src, pkt.origin_at / w)) {
                e.1 += 1;
                self.counters.data_delivered += 1;
            }
        }
        let compromised = self
            .actor_attack(c, true)
            .is_some_and(|i| self.attackers[i].spec.is_active(now));
        let lpa = self.lpas.get_mut(&c).expect("acting agent exists");
        if let Some(f) = finding {
            if f.counts_as_misbehavior() {
                lpa.obs.route_deviations.push(f.subject);
            }
            lpa.layer.push(f);
        }
        lpa.summary.packets_seen += 1;
        // a compromised cluster swallows traffic but claims it forwarded
        lpa.summary.forwarded += 1;
        let parent = lpa.parent;
        if compromised {
            self.counters.dropped += 1;
            self.trace
                .push(now, TraceKind::Drop, c, Some(pkt.seq), || "reason=cluster".into());
            return Ok(());
        }
        if self.is_alive(parent) && self.rpas.get(&parent).is_some_and(|g| g.acting) {
            self.energy.charge_tx(c);
            self.energy.charge_rx(parent);
            let k = now / w;
            *self
                .rpas
                .get_mut(&parent)
                .expect("checked")
                .delivered
                .entry((c, k))
                .or_default() += 1;
            self.energy.charge_tx(parent);
            self.energy.charge_rx(self.topo.base_station());
            self.counters.data_at_base += 1;
        }
        Ok(())
    }

    pub(crate) fn attack_tick(&mut self, i: usize) -> Result<()> {
        let me = self.attackers[i].spec.attacker;
        if !self.is_alive(me) {
            return Ok(());
        }
        let now = self.now();
        let mut seq = self.next_seq;
        let pkts = self.attackers[i].on_generate(now, &mut || {
            seq += 1;
            seq
        });
        self.next_seq = seq;
        let spec = &self.attackers[i].spec;
        let range = if spec.kind == AttackKind::HelloFlood {
            self.topo.graph().range() * spec.range_boost
        } else {
            self.topo.graph().range()
        };
        for pkt in pkts {
            self.transmit(Hop {
                pkt,
                route: None,
                idx: 0,
                range,
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jam_corruption_rate_matches_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 10_000;
        let hits = (0..trials).filter(|_| jam_corrupts(&mut rng, 0.8)).count();
        let rate = hits as f64 / trials as f64;
        assert!((rate - 0.8).abs() <= 0.02, "rate {rate}");
    }
}
