//! Run metrics as a flat, sorted `key=value` document, plus comparison of
//! two reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::agent::{Detector, Severity, Tier};
use crate::engine::Simulation;
use crate::error::{Error, Result};
use crate::response::NodeState;
use crate::simcore::TraceKind;
use crate::topology::{NodeId, NodeRole};

/// Keys that must match for two reports to be comparable.
pub const SCALE_KEYS: [&str; 5] = [
    "scale.regions",
    "scale.cells_per_region",
    "scale.sensors_per_cell",
    "scale.nodes",
    "scale.sensors",
];

/// Keys compared as variant/baseline ratios.
pub const RATIO_KEYS: [&str; 7] = [
    "energy.total_mj",
    "energy.ids_mj",
    "broadcast_messages",
    "alerts.total",
    "alerts.broadcast",
    "findings.total",
    "findings.misbehavior",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    entries: BTreeMap<String, String>,
}

fn tier_name(t: Tier) -> &'static str {
    match t {
        Tier::Local => "lpa",
        Tier::Regional => "rpa",
        Tier::Base => "bpdp",
    }
}

fn mj(x: f64) -> String {
    format!("{x:.6}")
}

impl MetricsReport {
    fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn get_u64(&self, key: &str) -> Option<u64> {
        self.get(key)?.parse().ok()
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// Collects the metrics of a finished run. With a recorded trace, the
    /// finding totals are reconciled against the trace.
    pub fn from_simulation(sim: &Simulation) -> Result<Self> {
        let mut m = Self::default();
        let sc = sim.scenario();
        let topo = sim.topology();
        let cfg = topo.config();
        m.set("scale.regions", cfg.regions);
        m.set("scale.cells_per_region", cfg.cells_per_region);
        m.set("scale.sensors_per_cell", cfg.sensors_per_cell);
        m.set("scale.nodes", topo.nodes().len());
        m.set("scale.sensors", topo.sensors().count());
        m.set("run.seed", sc.seed);
        m.set("run.duration_ms", sc.duration);
        m.set("run.mode", sc.mode.as_str());

        let actors: BTreeSet<NodeId> = sc.attacks.iter().flat_map(|a| a.actors()).collect();
        let failed = sim.failed_nodes();
        for (i, a) in sc.attacks.iter().enumerate() {
            let own = a.actors();
            let first = sim.findings().iter().find(|f| {
                f.finding.counts_as_misbehavior()
                    && own.contains(&f.finding.subject)
                    && f.finding.at >= a.start
            });
            let p = format!("attack.{i}");
            m.set(format!("{p}.kind"), a.kind.as_str());
            m.set(format!("{p}.attacker"), a.attacker);
            m.set(format!("{p}.detected"), first.is_some());
            if let Some(f) = first {
                m.set(format!("{p}.detection_latency_ms"), f.finding.at - a.start);
            }
            let class = match topo.role(a.attacker) {
                Some(NodeRole::Sensor) => sim
                    .class_of(a.attacker)
                    .map_or("unknown", |s| s.as_str())
                    .to_string(),
                _ if failed.contains(&a.attacker) => "Revoked".to_string(),
                _ => "n/a".to_string(),
            };
            m.set(format!("{p}.final_class"), class);
        }
        m.set("attacks", sc.attacks.len());

        let findings = sim.findings();
        let mut by_detector: BTreeMap<&str, u64> =
            Detector::ALL.iter().map(|d| (d.as_str(), 0)).collect();
        let mut by_tier: BTreeMap<&str, u64> =
            [Tier::Local, Tier::Regional, Tier::Base].iter().map(|&t| (tier_name(t), 0)).collect();
        let mut by_tier_detector: BTreeMap<String, u64> = BTreeMap::new();
        for t in [Tier::Local, Tier::Regional, Tier::Base] {
            for d in Detector::ALL {
                by_tier_detector.insert(format!("findings.{}.{}", tier_name(t), d.as_str()), 0);
            }
        }
        let mut misbehavior = 0u64;
        let mut fp = 0u64;
        let mut slot = 0u64;
        let mut sleep = 0u64;
        for f in findings {
            let d = f.finding.detector.as_str();
            *by_detector.entry(d).or_default() += 1;
            *by_tier.entry(tier_name(f.tier)).or_default() += 1;
            *by_tier_detector
                .entry(format!("findings.{}.{d}", tier_name(f.tier)))
                .or_default() += 1;
            match f.finding.detector {
                Detector::Tdma => slot += 1,
                Detector::Smac => sleep += 1,
                _ => {}
            }
            if f.finding.severity >= Severity::Misbehavior {
                misbehavior += 1;
                let s = f.finding.subject;
                if !actors.contains(&s) && !failed.contains(&s) {
                    fp += 1;
                }
            }
        }
        m.set("findings.total", findings.len());
        m.set("findings.misbehavior", misbehavior);
        for (d, n) in by_detector {
            m.set(format!("findings.by_detector.{d}"), n);
        }
        for (t, n) in by_tier {
            m.set(format!("findings.by_tier.{t}"), n);
        }
        for (k, n) in by_tier_detector {
            m.set(k, n);
        }
        m.set("false_positive_count", fp);
        m.set("slot_violations", slot);
        m.set("sleep_violations", sleep);

        let mut misclassified = 0u64;
        let mut final_states: BTreeMap<&str, u64> =
            NodeState::ALL.iter().map(|s| (s.as_str(), 0)).collect();
        for s in topo.sensors() {
            if let Some(st) = sim.class_of(s) {
                *final_states.entry(st.as_str()).or_default() += 1;
            }
            let tl = sim.timeline().get(&s).map(Vec::as_slice).unwrap_or(&[]);
            if !actors.contains(&s)
                && tl
                    .iter()
                    .any(|(_, st)| !matches!(st, NodeState::Fresh | NodeState::Member))
            {
                misclassified += 1;
            }
            let rendered: Vec<String> = tl.iter().map(|(t, st)| format!("{}@{t}", st.as_str())).collect();
            m.set(format!("class.{s}"), rendered.join(","));
        }
        m.set("misclassified_honest_nodes", misclassified);
        for (st, n) in final_states {
            m.set(format!("nodes.final.{st}"), n);
        }

        let c = sim.counters();
        m.set("alerts.total", c.alert_messages);
        m.set("alerts.broadcast", c.alert_broadcasts);
        m.set("broadcast_messages", c.broadcast_messages);
        m.set("transmissions", c.transmissions);
        m.set("data.originated", c.data_originated);
        m.set("data.delivered", c.data_delivered);
        m.set("data.at_base", c.data_at_base);
        m.set("data.dropped", c.dropped);
        m.set("data.discarded", c.discarded);
        m.set("data.jammed", c.jammed);
        m.set("policy.messages", c.policy_messages);
        m.set("policy.resupply_messages", c.resupply_messages);
        m.set("reports", c.reports);
        m.set("orphaned_sensors", c.orphaned_sensors);

        let mut tiers: BTreeMap<&str, f64> = BTreeMap::new();
        let mut ids = 0.0;
        for (n, e) in sim.energy().iter() {
            let role = topo.role(n).map_or("unknown", |r| r.as_str());
            *tiers.entry(role).or_default() += e.total();
            ids += e.ids_mj;
        }
        for role in [
            NodeRole::Sensor,
            NodeRole::ClusterNode,
            NodeRole::RegionalNode,
            NodeRole::BaseStation,
        ] {
            let v = tiers.get(role.as_str()).copied().unwrap_or(0.0);
            m.set(format!("energy.tier.{}_mj", role.as_str()), mj(v));
        }
        m.set("energy.total_mj", mj(sim.energy().total()));
        m.set("energy.ids_mj", mj(ids));

        let w = sc.schedules.window_ms;
        m.set("failover.count", sim.failovers().len());
        for (i, f) in sim.failovers().iter().enumerate() {
            let p = format!("failover.{i}");
            m.set(format!("{p}.failed"), f.failed);
            m.set(format!("{p}.role"), f.role.as_str());
            m.set(
                format!("{p}.successor"),
                f.successor.map_or("none".to_string(), |s| s.to_string()),
            );
            if let Some(d) = f.disruption_windows(w) {
                m.set(format!("{p}.disruption_windows"), d);
            }
        }

        if sim.trace().is_enabled() {
            let traced = sim.trace().of_kind(TraceKind::Finding).count();
            if traced != findings.len() {
                return Err(Error::Invariant(format!(
                    "trace has {traced} findings, metrics {}",
                    findings.len()
                )));
            }
        }
        Ok(m)
    }

    /// The machine-readable document.
    pub fn to_flat(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("metrics line {}: expected key=value", i + 1))
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let g = |k: &str| self.get(k).unwrap_or("-").to_string();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scale: {} regions x {} cells x {} sensors ({} nodes), mode {}",
            g("scale.regions"),
            g("scale.cells_per_region"),
            g("scale.sensors_per_cell"),
            g("scale.nodes"),
            g("run.mode")
        );
        let attacks = self.get_u64("attacks").unwrap_or(0);
        for i in 0..attacks {
            let p = format!("attack.{i}");
            let _ = writeln!(
                out,
                "attack {i}: {} by {} detected={} latency_ms={} final={}",
                g(&format!("{p}.kind")),
                g(&format!("{p}.attacker")),
                g(&format!("{p}.detected")),
                g(&format!("{p}.detection_latency_ms")),
                g(&format!("{p}.final_class"))
            );
        }
        let _ = writeln!(
            out,
            "findings: {} ({} misbehavior), false positives: {}, misclassified honest nodes: {}",
            g("findings.total"),
            g("findings.misbehavior"),
            g("false_positive_count"),
            g("misclassified_honest_nodes")
        );
        let _ = writeln!(
            out,
            "alerts: {} ({} broadcast), broadcasts: {}",
            g("alerts.total"),
            g("alerts.broadcast"),
            g("broadcast_messages")
        );
        let _ = writeln!(
            out,
            "energy: {} mJ total, {} mJ IDS",
            g("energy.total_mj"),
            g("energy.ids_mj")
        );
        let _ = writeln!(
            out,
            "data: {} originated, {} delivered, {} at base; failovers: {}",
            g("data.originated"),
            g("data.delivered"),
            g("data.at_base"),
            g("failover.count")
        );
        out
    }
}

/// Variant/baseline ratios. Both zero compares as 1.0.
pub fn compare(baseline: &MetricsReport, variant: &MetricsReport) -> Result<BTreeMap<String, f64>> {
    for k in SCALE_KEYS {
        if baseline.get(k) != variant.get(k) {
            return Err(Error::ScaleMismatch(format!(
                "{k}: {} vs {}",
                baseline.get(k).unwrap_or("missing"),
                variant.get(k).unwrap_or("missing")
            )));
        }
    }
    let mut out = BTreeMap::new();
    for k in RATIO_KEYS {
        let b = baseline.get_f64(k).unwrap_or(0.0);
        let v = variant.get_f64(k).unwrap_or(0.0);
        let r = if b == 0.0 && v == 0.0 {
            1.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            v / b
        };
        out.insert(format!("ratio.{k}"), r);
    }
    Ok(out)
}

pub fn render_ratios(r: &BTreeMap<String, f64>) -> String {
    let mut out = String::new();
    for (k, v) in r {
        let _ = writeln!(out, "{k}={v:.6}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(pairs: &[(&str, &str)]) -> MetricsReport {
        let mut m = MetricsReport::default();
        for k in SCALE_KEYS {
            m.set(k, "1");
        }
        for (k, v) in pairs {
            m.set(*k, *v);
        }
        m
    }

    #[test]
    fn flat_round_trip() {
        let m = report(&[("energy.total_mj", "12.500000"), ("findings.total", "3")]);
        let back = MetricsReport::parse(&m.to_flat()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn self_comparison_is_unity() {
        let m = report(&[("energy.total_mj", "12.5"), ("broadcast_messages", "0")]);
        let r = compare(&m, &m).unwrap();
        assert!(r.values().all(|&v| v == 1.0), "{r:?}");
    }

    #[test]
    fn mismatched_scale_rejected() {
        let a = report(&[]);
        let mut b = report(&[]);
        b.set("scale.nodes", "2");
        assert!(matches!(compare(&a, &b), Err(Error::ScaleMismatch(_))));
    }

    #[test]
    fn malformed_line_rejected() {
        assert!(MetricsReport::parse("novalue\n").is_err());
    }
}
