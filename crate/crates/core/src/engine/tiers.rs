//! The agent hierarchy at work: window close at the local agents,
//! regional and base ticks, backbone messages, policy dissemination and
//! takeover of failed monitors.

use std::collections::{BTreeMap, BTreeSet};

use super::{Event, FailoverRecord, Msg, Simulation};
use crate::agent::{
    detect_anomaly, match_signatures, postprocess, preprocess, AnomalyProfile, Detector, Evidence,
    Finding, PdrSample, Report, ReportSummary, Severity, SourceStats, StimulusVector, Tier,
};
use crate::detectors::{check_physical, watchdog_check, ChildWindow};
use crate::error::Result;
use crate::failover::{detect_failure, plan_takeover};
use crate::policy::{PolicySet, PolicyStore, Scope, Staged};
use crate::response::{Action, NodeState, Verdict};
use crate::simcore::{SimTime, TraceKind};
use crate::topology::{CellId, NodeId, NodeRole};

/// Offsets of the regional and base ticks after a window closes.
const RPA_TICK_MS: SimTime = 300;
const BPDP_TICK_MS: SimTime = 600;
/// Watchdog history kept per child.
const HISTORY: usize = 16;

fn known_version(store: &PolicyStore, staged: &Staged, scope: Scope) -> u64 {
    store.version(scope).max(staged.version(scope))
}

fn history_push(h: &mut Vec<ChildWindow>, w: ChildWindow) {
    h.push(w);
    if h.len() > HISTORY {
        h.remove(0);
    }
}

impl Simulation {
    pub(crate) fn close_window(&mut self, k: u64) -> Result<()> {
        let w = self.window_ms();
        let window = (k * w, (k + 1) * w);
        self.book_jamming(window);
        let lpas: Vec<NodeId> = self.lpas.keys().copied().collect();
        for l in lpas {
            if self.lpas[&l].acting && self.is_alive(l) {
                self.lpa_close(l, k)?;
            }
        }
        // staged policy takes effect at the boundary
        for g in self.rpas.values_mut() {
            g.staged.commit(&mut g.store);
        }
        let regions: BTreeMap<CellId, usize> = self
            .lpas
            .values()
            .map(|l| (l.home_cell, self.region_index(l.home_cell)))
            .collect();
        for l in self.lpas.values_mut() {
            if l.staged.is_empty() {
                continue;
            }
            l.staged.commit(&mut l.store);
            let eff = l.store.effective(regions[&l.home_cell], l.home_cell);
            l.profile.policy = eff.anomaly.clone();
        }
        self.update_exclusion();
        for n in 0..self.alive.len() {
            if self.alive[n] {
                self.energy.charge_idle(n as NodeId, w);
            }
        }
        let now = self.now();
        let end = self.scenario.duration;
        if now + RPA_TICK_MS <= end {
            self.schedule(now + RPA_TICK_MS, Event::RpaTick(k))?;
        }
        if now + BPDP_TICK_MS <= end {
            self.schedule(now + BPDP_TICK_MS, Event::BpdpTick(k))?;
        }
        self.schedule_originations(k + 1)?;
        if (k + 2) * w <= end {
            self.schedule((k + 2) * w, Event::WindowClose(k + 1))?;
        }
        Ok(())
    }

    /// Carrier-sense time a jammer held the channel during the window,
    /// booked at the jammer's local agent.
    fn book_jamming(&mut self, window: (SimTime, SimTime)) {
        let mut busy = Vec::new();
        for a in &self.attackers {
            let s = &a.spec;
            if s.kind != crate::attacks::AttackKind::Jamming || !self.is_alive(s.attacker) {
                continue;
            }
            let lo = window.0.max(s.start);
            let hi = window.1.min(s.stop);
            if hi <= lo {
                continue;
            }
            let ms = ((hi - lo) as f64 * s.jam_duty).round() as u64;
            if let Some(l) = self.topo.cell_of(s.attacker).and_then(|c| self.active_lpa(c)) {
                busy.push((l, s.attacker, ms));
            }
        }
        for (l, j, ms) in busy {
            self.lpas.get_mut(&l).expect("active").obs.channel_busy.push((j, ms));
        }
    }

    fn lpa_close(&mut self, l: NodeId, k: u64) -> Result<()> {
        let w = self.window_ms();
        let window = (k * w, (k + 1) * w);
        let now = self.now();
        let policy = self.lpa_policy(l).expect("agent exists").clone();
        let lpa = self.lpas.get_mut(&l).expect("agent exists");
        if k >= 1 {
            for src in lpa.table.nodes().collect::<Vec<_>>() {
                if let Some((expected, delivered)) = self.pdr_book.remove(&(src, k - 1)) {
                    lpa.obs.pdr.push(PdrSample {
                        src,
                        expected,
                        delivered,
                    });
                }
            }
        }
        let v = preprocess(&lpa.obs, window);
        let pending: Vec<NodeId> = lpa.pending_init.iter().copied().collect();
        for src in pending {
            if let Some(m) = v.get(src).and_then(|s| s.mean_rssi()) {
                lpa.baseline.record(src, l, m);
                lpa.pending_init.remove(&src);
            }
        }
        let mut findings = std::mem::take(&mut lpa.layer);
        findings.extend(check_physical(&v, &lpa.baseline, l, &policy.detectors));
        findings.append(&mut lpa.directives);
        let mut record = policy.signatures.clone();
        for &n in &lpa.local_blacklist {
            record.blacklist(n);
        }
        findings.extend(match_signatures(&record, &v));
        if k >= lpa.learn_after {
            findings.extend(detect_anomaly(&mut lpa.profile, &v));
        }
        let summary = std::mem::take(&mut lpa.summary);
        lpa.obs.clear();

        for f in &findings {
            self.log_finding(Tier::Local, l, f.clone());
        }
        let bad: BTreeSet<NodeId> = findings
            .iter()
            .filter(|f| f.counts_as_misbehavior())
            .map(|f| f.subject)
            .collect();
        let nodes: Vec<NodeId> = self.lpas[&l].table.nodes().collect();
        let mut actions = Vec::new();
        for n in nodes {
            let verdict = if bad.contains(&n) {
                Verdict::Misbehaved
            } else {
                Verdict::Good
            };
            let lpa = self.lpas.get_mut(&l).expect("agent exists");
            let before = lpa.table.state(n);
            actions.extend(lpa.table.step(n, verdict, k, &policy.response)?);
            let after = lpa.table.state(n);
            if before != after {
                let after = after.expect("record exists");
                self.timeline.entry(n).or_default().push((now, after));
                self.trace.push(now, TraceKind::State, l, None, || {
                    format!(
                        "node={n} from={} to={}",
                        before.map_or("-", |s| s.as_str()),
                        after.as_str()
                    )
                });
            }
        }
        let parent = self.lpas[&l].parent;
        for a in actions {
            match a {
                Action::Isolate(_) | Action::Release(_) => {}
                Action::Alert(n) => {
                    let f = Finding::new(
                        now,
                        n,
                        Detector::Response,
                        Severity::Danger,
                        "Suspect",
                        Evidence::new("state", 1.0, 0.0),
                    );
                    self.send_alert(l, parent, f, false)?;
                }
                Action::Blacklist(n) => {
                    self.lpas.get_mut(&l).expect("exists").local_blacklist.insert(n);
                    let f = Finding::new(
                        now,
                        n,
                        Detector::Response,
                        Severity::Danger,
                        "Malicious",
                        Evidence::new("state", 1.0, 0.0),
                    );
                    self.send_alert(l, parent, f, true)?;
                }
            }
        }
        let watched: Vec<NodeId> = self.lpas[&l]
            .table
            .records()
            .filter(|r| r.state == NodeState::Suspect && !r.is_banned(k))
            .map(|r| r.node)
            .collect();
        let out = postprocess(l, window, findings, summary, &v, watched);
        for f in out.alerts {
            self.send_alert(l, parent, f, false)?;
        }
        let reachable = self.is_alive(parent) && self.rpas.get(&parent).is_some_and(|g| g.acting);
        let lpa = self.lpas.get_mut(&l).expect("exists");
        let ready = lpa.uplink.submit(out.report, reachable);
        for rep in ready {
            self.send_report(l, parent, rep)?;
        }
        Ok(())
    }

    fn send_alert(&mut self, from: NodeId, to: NodeId, f: Finding, escalate: bool) -> Result<()> {
        if !self.is_alive(to) {
            return Ok(());
        }
        self.counters.alert_messages += 1;
        let now = self.now();
        self.trace.push(now, TraceKind::Alert, from, None, || {
            format!("to={to} subject={} label={}", f.subject, f.label)
        });
        self.backbone(from, to, Msg::Alert { finding: f, escalate })
    }

    fn send_report(&mut self, from: NodeId, to: NodeId, rep: Report) -> Result<()> {
        self.counters.reports += 1;
        let now = self.now();
        self.trace.push(now, TraceKind::Report, from, None, || {
            format!(
                "to={to} window={}..{} findings={} sources={}",
                rep.window.0,
                rep.window.1,
                rep.findings.len(),
                rep.sources.len()
            )
        });
        self.backbone(from, to, Msg::Report(rep))
    }

    pub(crate) fn backbone(&mut self, from: NodeId, to: NodeId, msg: Msg) -> Result<()> {
        self.energy.charge_tx(from);
        let at = self.now() + self.scenario.schedules.backbone_delay;
        self.schedule(
            at,
            Event::Backbone {
                from,
                to,
                msg: Box::new(msg),
            },
        )
    }

    pub(crate) fn backbone_arrive(&mut self, from: NodeId, to: NodeId, msg: Msg) -> Result<()> {
        if !self.is_alive(to) {
            return Ok(());
        }
        self.energy.charge_rx(to);
        let now = self.now();
        let base = self.bpdp.node;
        match msg {
            Msg::Report(rep) if to == base => {
                self.bpdp.liveness.heard(from);
                self.bpdp.inbox.push(rep);
            }
            Msg::Report(rep) => {
                let Some(g) = self.rpas.get_mut(&to) else {
                    return Ok(());
                };
                g.liveness.heard(from);
                let covers = |adopted: &[NodeId]| {
                    adopted.iter().any(|a| {
                        *a == from || rep.sources.iter().any(|(s, _)| s == a)
                    })
                };
                for f in self.failovers.iter_mut() {
                    if f.successor == Some(from) || (f.successor == Some(to) && f.role == NodeRole::RegionalNode) {
                        if f.first_report_at.is_none() && rep.window.1 > f.takeover_at && covers(&f.adopted) {
                            f.first_report_at = Some(now);
                        }
                    }
                }
                g.inbox.push(rep);
            }
            Msg::Alert { finding, escalate } if to == base => {
                if escalate {
                    self.bpdp.escalations.insert(finding.subject);
                }
            }
            Msg::Alert { finding, escalate } => {
                if escalate {
                    self.counters.alert_messages += 1;
                    self.backbone(to, base, Msg::Alert { finding, escalate })?;
                }
            }
            Msg::Policy {
                scope,
                set,
                targets,
                resupply,
            } => {
                if let Some(g) = self.rpas.get_mut(&to) {
                    if set.version > known_version(&g.store, &g.staged, scope) {
                        g.staged.push(scope, set.clone());
                    }
                    for t in targets {
                        self.policy_hop(to, t, scope, &set, resupply)?;
                    }
                } else if let Some(l) = self.lpas.get_mut(&to) {
                    if set.version > known_version(&l.store, &l.staged, scope) {
                        l.staged.push(scope, set);
                    }
                }
            }
            Msg::Directive(f) => {
                if let Some(l) = self.lpas.get_mut(&to) {
                    l.directives.push(f);
                }
            }
        }
        Ok(())
    }

    fn policy_hop(
        &mut self,
        from: NodeId,
        to: NodeId,
        scope: Scope,
        set: &PolicySet,
        resupply: bool,
    ) -> Result<()> {
        let now = self.now();
        let kind = if resupply {
            self.counters.resupply_messages += 1;
            TraceKind::Resupply
        } else {
            self.counters.policy_messages += 1;
            TraceKind::Policy
        };
        self.trace.push(now, kind, from, None, || {
            format!("to={to} scope={scope} version={}", set.version)
        });
        self.backbone(
            from,
            to,
            Msg::Policy {
                scope,
                set: set.clone(),
                targets: Vec::new(),
                resupply,
            },
        )
    }

    /// Scopes a local agent mirrors.
    fn lpa_scopes(&self, l: NodeId) -> Vec<Scope> {
        let lpa = &self.lpas[&l];
        let mut out = vec![Scope::Global];
        let regions: BTreeSet<usize> = lpa.cells.iter().map(|&c| self.region_index(c)).collect();
        out.extend(regions.into_iter().map(Scope::Region));
        out.extend(lpa.cells.iter().map(|&c| Scope::Cluster(c)));
        out
    }

    /// Scopes a regional agent mirrors.
    fn rpa_scopes(&self, g: NodeId) -> Vec<Scope> {
        let rpa = &self.rpas[&g];
        let mut out = vec![Scope::Global];
        out.extend(rpa.regions.iter().map(|&r| Scope::Region(r)));
        for &c in &rpa.children {
            if let Some(l) = self.lpas.get(&c) {
                out.extend(l.cells.iter().map(|&c| Scope::Cluster(c)));
            }
        }
        out
    }

    /// Sends every scope an agent is behind on down the hierarchy.
    pub(crate) fn sync_policy(&mut self) -> Result<()> {
        let base = self.bpdp.node;
        let rpas: Vec<NodeId> = self.rpas.keys().copied().collect();
        for g in rpas {
            if !self.is_alive(g) || !self.rpas[&g].acting {
                continue;
            }
            let mut batches: BTreeMap<Scope, Vec<NodeId>> = BTreeMap::new();
            for scope in self.rpa_scopes(g) {
                let latest = self.bpdp.store.version(scope);
                let rpa = &self.rpas[&g];
                if latest > known_version(&rpa.store, &rpa.staged, scope) {
                    batches.entry(scope).or_default();
                }
            }
            let children: Vec<NodeId> = self.rpas[&g].children.iter().copied().collect();
            for c in children {
                let Some(l) = self.lpas.get(&c) else { continue };
                if !l.acting || !self.is_alive(c) {
                    continue;
                }
                for scope in self.lpa_scopes(c) {
                    let l = &self.lpas[&c];
                    if self.bpdp.store.version(scope) > known_version(&l.store, &l.staged, scope) {
                        batches.entry(scope).or_default().push(c);
                    }
                }
            }
            for (scope, targets) in batches {
                let Some(set) = self.bpdp.store.get(scope).cloned() else {
                    continue;
                };
                let now = self.now();
                self.counters.policy_messages += 1;
                self.trace.push(now, TraceKind::Policy, base, None, || {
                    format!("to={g} scope={scope} version={}", set.version)
                });
                self.backbone(
                    base,
                    g,
                    Msg::Policy {
                        scope,
                        set,
                        targets,
                        resupply: false,
                    },
                )?;
            }
        }
        Ok(())
    }

    pub(crate) fn rpa_tick(&mut self, k: u64) -> Result<()> {
        let w = self.window_ms();
        let window = (k * w, (k + 1) * w);
        let now = self.now();
        let rpas: Vec<NodeId> = self.rpas.keys().copied().collect();
        for g in rpas {
            if !self.is_alive(g) || !self.rpas[&g].acting {
                continue;
            }
            let params = {
                let rpa = &self.rpas[&g];
                let r = rpa.regions.iter().next().copied().unwrap_or(0);
                rpa.store
                    .get(Scope::Region(r))
                    .or_else(|| rpa.store.get(Scope::Global))
                    .expect("global policy present")
                    .clone()
            };
            let rpa = self.rpas.get_mut(&g).expect("exists");
            let inbox = std::mem::take(&mut rpa.inbox);
            rpa.liveness.tick();

            let mut revoke = Vec::new();
            let mut local = Vec::new();
            let children: Vec<NodeId> = rpa.children.iter().copied().collect();
            for &c in &children {
                if rpa.judged_from.get(&c).is_some_and(|&from| k < from) {
                    continue;
                }
                let report = inbox
                    .iter()
                    .find(|r| r.from_agent == c && r.window == window)
                    .map(|r| r.summary);
                let delivered = rpa.delivered.remove(&(c, k)).unwrap_or(0);
                let h = rpa.history.entry(c).or_default();
                history_push(h, ChildWindow { report, delivered });
                if let Some(f) = watchdog_check(g, c, h, &params.detectors, now) {
                    if f.label != "MissedReports" {
                        revoke.push(c);
                    }
                    local.push(f);
                }
            }
            rpa.delivered.retain(|&(_, wk), _| wk > k);
            let failed = detect_failure(&rpa.liveness, params.detectors.miss_limit);

            // identities seen in more than one cell
            let mut merged: BTreeMap<NodeId, SourceStats> = BTreeMap::new();
            let mut summary = ReportSummary::default();
            let mut watched = BTreeSet::new();
            for rep in inbox.iter().filter(|r| r.window == window) {
                for (src, s) in &rep.sources {
                    merged.entry(*src).or_default().merge(s);
                }
                summary.packets_seen += rep.summary.packets_seen;
                summary.forwarded += rep.summary.forwarded;
                watched.extend(rep.watched.iter().copied());
            }
            let mut v = StimulusVector::new(window);
            for (src, s) in &merged {
                if s.cells.len() >= 2 {
                    v.sources.insert(*src, s.clone());
                }
            }
            let cross = if v.is_empty() {
                Vec::new()
            } else {
                match_signatures(&params.signatures, &v)
            };
            for f in local {
                self.log_finding(Tier::Regional, g, f);
            }
            let mut all = Vec::new();
            for f in cross {
                self.log_finding(Tier::Regional, g, f.clone());
                if f.counts_as_misbehavior() {
                    if let Some(l) = self.topo.cell_of(f.subject).and_then(|c| self.active_lpa(c)) {
                        self.backbone(g, l, Msg::Directive(f.clone()))?;
                    }
                }
                all.push(f);
            }
            for c in failed {
                self.cluster_failover(g, c, "missed_reports")?;
            }
            for c in revoke {
                if self.rpas[&g].children.contains(&c) {
                    self.revoked.insert(c);
                    self.cluster_failover(g, c, "watchdog")?;
                }
            }
            let base = self.bpdp.node;
            let mut sources: Vec<(NodeId, SourceStats)> = merged.into_iter().collect();
            sources.retain(|(_, s)| s.pkt_count > 0 || !s.cells.is_empty());
            let rep = Report {
                from_agent: g,
                window,
                findings: all,
                summary,
                sources,
                watched: watched.into_iter().collect(),
            };
            self.send_report(g, base, rep)?;
        }
        Ok(())
    }

    pub(crate) fn bpdp_tick(&mut self, k: u64) -> Result<()> {
        let w = self.window_ms();
        let window = (k * w, (k + 1) * w);
        let base = self.bpdp.node;
        let miss_limit = self
            .bpdp
            .store
            .get(Scope::Global)
            .expect("global policy present")
            .detectors
            .miss_limit;
        self.bpdp.liveness.tick();
        let inbox = std::mem::take(&mut self.bpdp.inbox);
        for g in detect_failure(&self.bpdp.liveness, miss_limit) {
            self.regional_failover(g)?;
        }

        // identities seen across regions
        let mut merged: BTreeMap<NodeId, SourceStats> = BTreeMap::new();
        let mut seen_by: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for rep in inbox.iter().filter(|r| r.window == window) {
            for (src, s) in &rep.sources {
                merged.entry(*src).or_default().merge(s);
                seen_by.entry(*src).or_default().insert(rep.from_agent);
            }
        }
        let mut v = StimulusVector::new(window);
        for (src, s) in merged {
            if seen_by[&src].len() >= 2 && s.cells.len() >= 2 {
                v.sources.insert(src, s);
            }
        }
        if !v.is_empty() {
            let sigs = self.bpdp.store.get(Scope::Global).expect("present").signatures.clone();
            for f in match_signatures(&sigs, &v) {
                self.log_finding(Tier::Base, base, f.clone());
                if f.counts_as_misbehavior() {
                    if let Some(l) = self.topo.cell_of(f.subject).and_then(|c| self.active_lpa(c)) {
                        self.backbone(base, l, Msg::Directive(f))?;
                    }
                }
            }
        }

        let escalations = std::mem::take(&mut self.bpdp.escalations);
        for n in escalations {
            if self.bpdp.store.blacklist(n) {
                let now = self.now();
                self.trace
                    .push(now, TraceKind::Blacklist, base, None, || format!("node={n}"));
            }
        }
        self.sync_policy()
    }

    /// The regional agent `g` replaces a failed or revoked cluster node.
    fn cluster_failover(&mut self, g: NodeId, c: NodeId, reason: &str) -> Result<()> {
        let now = self.now();
        let sensors: Vec<NodeId> = self.lpas[&c].table.nodes().collect();
        let plan = {
            let lpas = &self.lpas;
            let alive = &self.alive;
            plan_takeover(&self.topo, c, &sensors, |n| {
                n != c
                    && alive[n as usize]
                    && lpas.get(&n).is_some_and(|l| l.acting && l.parent == g)
            })?
        };
        {
            let rpa = self.rpas.get_mut(&g).expect("exists");
            rpa.liveness.unwatch(c);
            rpa.children.remove(&c);
            rpa.history.remove(&c);
        }
        let old = self.lpas.get_mut(&c).expect("exists");
        old.acting = false;
        let cells: Vec<CellId> = std::mem::take(&mut old.cells).into_iter().collect();
        let successor = plan.successor;
        self.trace.push(now, TraceKind::Failover, g, None, || {
            format!(
                "failed={c} takeover={} role=cluster reason={reason}",
                successor.map_or("-".to_string(), |s| s.to_string())
            )
        });
        let Some(s) = successor else {
            for &cell in &cells {
                self.cell_lpa[cell] = None;
            }
            let orphans = sensors.iter().filter(|&&n| self.is_alive(n)).count() as u64;
            self.counters.orphaned_sensors += orphans;
            self.trace.push(now, TraceKind::Orphan, g, None, || {
                format!("failed={c} sensors={orphans}")
            });
            let f = Finding::new(
                now,
                c,
                Detector::Watchdog,
                Severity::Danger,
                "Orphaned",
                Evidence::new("sensors", orphans as f64, 0.0),
            );
            let base = self.bpdp.node;
            self.send_alert(g, base, f, false)?;
            self.failovers.push(FailoverRecord {
                failed: c,
                role: NodeRole::ClusterNode,
                successor: None,
                adopted: plan.adopted,
                killed_at: self.killed_at.get(&c).copied(),
                takeover_at: now,
                first_report_at: None,
            });
            return Ok(());
        };
        let old = self.lpas.get_mut(&c).expect("exists");
        let records: Vec<_> = sensors.iter().filter_map(|&n| old.table.take(n)).collect();
        let blacklist = std::mem::take(&mut old.local_blacklist);
        old.uplink.flush();
        let new = self.lpas.get_mut(&s).expect("successor exists");
        for r in records {
            new.table.insert(r);
        }
        new.local_blacklist.extend(blacklist);
        for &n in &sensors {
            new.baseline.reinit(n);
            new.pending_init.insert(n);
        }
        for &cell in &cells {
            new.cells.insert(cell);
            self.cell_lpa[cell] = Some(s);
        }
        self.reset_profiles();
        self.failovers.push(FailoverRecord {
            failed: c,
            role: NodeRole::ClusterNode,
            successor: Some(s),
            adopted: plan.adopted,
            killed_at: self.killed_at.get(&c).copied(),
            takeover_at: now,
            first_report_at: None,
        });
        // resupply the adopted cells' policy through the regional agent
        let base = self.bpdp.node;
        let mut scopes = vec![Scope::Global];
        let regions: BTreeSet<usize> = cells.iter().map(|&c| self.region_index(c)).collect();
        scopes.extend(regions.into_iter().map(Scope::Region));
        scopes.extend(cells.iter().map(|&c| Scope::Cluster(c)));
        for scope in scopes {
            let Some(set) = self.bpdp.store.get(scope).cloned() else {
                continue;
            };
            self.counters.resupply_messages += 1;
            self.trace.push(now, TraceKind::Resupply, base, None, || {
                format!("to={g} scope={scope} version={}", set.version)
            });
            self.backbone(
                base,
                g,
                Msg::Policy {
                    scope,
                    set,
                    targets: vec![s],
                    resupply: true,
                },
            )?;
        }
        Ok(())
    }

    /// The base station replaces a failed regional node.
    fn regional_failover(&mut self, g: NodeId) -> Result<()> {
        let now = self.now();
        let children: Vec<NodeId> = self.rpas[&g].children.iter().copied().collect();
        let plan = {
            let rpas = &self.rpas;
            let alive = &self.alive;
            plan_takeover(&self.topo, g, &children, |n| {
                n != g && alive[n as usize] && rpas.get(&n).is_some_and(|r| r.acting)
            })?
        };
        self.bpdp.liveness.unwatch(g);
        let old = self.rpas.get_mut(&g).expect("exists");
        old.acting = false;
        let regions = std::mem::take(&mut old.regions);
        old.children.clear();
        let base = self.bpdp.node;
        let successor = plan.successor;
        self.trace.push(now, TraceKind::Failover, base, None, || {
            format!(
                "failed={g} takeover={} role=regional reason=missed_reports",
                successor.map_or("-".to_string(), |s| s.to_string())
            )
        });
        self.failovers.push(FailoverRecord {
            failed: g,
            role: NodeRole::RegionalNode,
            successor,
            adopted: plan.adopted.clone(),
            killed_at: self.killed_at.get(&g).copied(),
            takeover_at: now,
            first_report_at: None,
        });
        let Some(s) = successor else {
            let orphans: u64 = children
                .iter()
                .map(|c| self.lpas[c].table.len() as u64)
                .sum();
            self.counters.orphaned_sensors += orphans;
            self.trace.push(now, TraceKind::Orphan, base, None, || {
                format!("failed={g} clusters={}", children.len())
            });
            return Ok(());
        };
        {
            let new = self.rpas.get_mut(&s).expect("successor exists");
            new.regions.extend(regions.iter().copied());
            let from = now / self.scenario.schedules.window_ms + 1;
            for &c in &children {
                new.children.insert(c);
                new.liveness.watch(c);
                new.judged_from.insert(c, from);
            }
        }
        for &c in &children {
            let l = self.lpas.get_mut(&c).expect("cluster agent");
            l.parent = s;
            let backlog = l.uplink.flush();
            for rep in backlog {
                self.send_report(c, s, rep)?;
            }
        }
        let mut scopes = vec![Scope::Global];
        scopes.extend(regions.iter().map(|&r| Scope::Region(r)));
        for &c in &children {
            scopes.extend(self.lpas[&c].cells.iter().map(|&c| Scope::Cluster(c)));
        }
        for scope in scopes {
            let Some(set) = self.bpdp.store.get(scope).cloned() else {
                continue;
            };
            self.counters.resupply_messages += 1;
            self.trace.push(now, TraceKind::Resupply, base, None, || {
                format!("to={s} scope={scope} version={}", set.version)
            });
            self.backbone(
                base,
                s,
                Msg::Policy {
                    scope,
                    set,
                    targets: Vec::new(),
                    resupply: true,
                },
            )?;
        }
        Ok(())
    }

    /// Monitoring responsibilities moved: every profile is relearned.
    fn reset_profiles(&mut self) {
        let from = self.window() + 1;
        for l in self.lpas.values_mut() {
            l.profile = AnomalyProfile::new(l.profile.policy.clone());
            l.learn_after = l.learn_after.max(from);
        }
    }
}
