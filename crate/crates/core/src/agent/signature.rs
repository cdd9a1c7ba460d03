use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::finding::{Detector, Evidence, Finding, Severity};
use super::stimulus::{Feature, StimulusVector};
use crate::error::{Error, Result};
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Op {
    pub fn holds(&self, lhs: f64, rhs: f64) -> bool {
        match self {
            Op::Lt => lhs < rhs,
            Op::Le => lhs <= rhs,
            Op::Eq => (lhs - rhs).abs() < 1e-9,
            Op::Ge => lhs >= rhs,
            Op::Gt => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub feature: Feature,
    pub op: Op,
    pub threshold: f64,
    /// Compare the feature as a rate per second of window instead of a raw
    /// window value.
    #[serde(default)]
    pub per_second: bool,
}

impl Condition {
    pub fn new(feature: Feature, op: Op, threshold: f64) -> Self {
        Self {
            feature,
            op,
            threshold,
            per_second: false,
        }
    }

    /// Observed value, or `None` when the feature is undefined for the source.
    pub fn observe(&self, v: &StimulusVector, src: NodeId) -> Option<f64> {
        let raw = v.get(src)?.value(self.feature)?;
        if self.per_second {
            let secs = v.window_secs();
            (secs > 0.0).then(|| raw / secs)
        } else {
            Some(raw)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureRule {
    pub rule_id: u32,
    /// Attack name reported when the rule fires.
    pub label: String,
    pub conditions: Vec<Condition>,
}

impl SignatureRule {
    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::MalformedRule(format!(
                "rule {} has an empty predicate",
                self.rule_id
            )));
        }
        if let Some(c) = self.conditions.iter().find(|c| !c.threshold.is_finite()) {
            return Err(Error::MalformedRule(format!(
                "rule {} has a non-finite threshold on {}",
                self.rule_id,
                c.feature.as_str()
            )));
        }
        Ok(())
    }

    fn matches(&self, v: &StimulusVector, src: NodeId) -> Option<f64> {
        let mut first = None;
        for c in &self.conditions {
            let x = c.observe(v, src)?;
            if !c.op.holds(x, c.threshold) {
                return None;
            }
            first.get_or_insert(x);
        }
        first
    }
}

/// Known-attack rules plus the blacklist of banished node ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureRecord {
    #[serde(default, with = "rule_list")]
    pub rules: BTreeMap<u32, SignatureRule>,
    #[serde(default)]
    pub blacklist: BTreeSet<NodeId>,
}

/// Rules are written as a list in config files and keyed by id in memory.
mod rule_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::SignatureRule;

    pub fn serialize<S: Serializer>(
        rules: &BTreeMap<u32, SignatureRule>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        rules.values().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<u32, SignatureRule>, D::Error> {
        let list = Vec::<SignatureRule>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for r in list {
            if out.contains_key(&r.rule_id) {
                return Err(serde::de::Error::custom(format!(
                    "duplicate rule_id {}",
                    r.rule_id
                )));
            }
            out.insert(r.rule_id, r);
        }
        Ok(out)
    }
}

impl SignatureRecord {
    pub fn with_rules(rules: impl IntoIterator<Item = SignatureRule>) -> Result<Self> {
        let mut rec = Self::default();
        for r in rules {
            r.validate()?;
            rec.rules.insert(r.rule_id, r);
        }
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, r) in &self.rules {
            if *id != r.rule_id {
                return Err(Error::MalformedRule(format!(
                    "rule keyed {id} carries id {}",
                    r.rule_id
                )));
            }
            r.validate()?;
        }
        Ok(())
    }

    pub fn is_blacklisted(&self, node: NodeId) -> bool {
        self.blacklist.contains(&node)
    }

    /// Adds a blacklist entry; returns false when it was already present.
    pub fn blacklist(&mut self, node: NodeId) -> bool {
        self.blacklist.insert(node)
    }

    /// Default rule set for the attacks the simulator injects.
    pub fn defaults() -> Self {
        use Feature::*;
        let rule = |rule_id, label: &str, conditions| SignatureRule {
            rule_id,
            label: label.to_string(),
            conditions,
        };
        Self::with_rules([
            rule(1, "HelloFlood", vec![Condition::new(HelloCount, Op::Gt, 50.0)]),
            rule(2, "Flooding", vec![Condition::new(PktCount, Op::Gt, 150.0)]),
            rule(
                3,
                "SelectiveForwarding",
                vec![
                    Condition::new(ForwardRatio, Op::Lt, 0.9),
                    Condition::new(RelayedIn, Op::Ge, 2.0),
                ],
            ),
            rule(4, "Sybil", vec![Condition::new(DistinctCellsSeen, Op::Ge, 2.0)]),
            rule(5, "SinkHole", vec![Condition::new(AdvertCount, Op::Ge, 1.0)]),
            rule(6, "DataAlteration", vec![Condition::new(AlteredForwards, Op::Ge, 1.0)]),
        ])
        .expect("default rules are well formed")
    }
}

/// Compares a stimulus vector against the signature record.
///
/// Blacklist hits come first as `Danger`, then one finding per satisfied rule
/// per source in `rule_id` order. Rule findings are held against the
/// physical transmitters behind the identity.
pub fn match_signatures(record: &SignatureRecord, v: &StimulusVector) -> Vec<Finding> {
    let at = v.window.1;
    let mut out = Vec::new();
    for (&src, stats) in &v.sources {
        let mut hit: BTreeSet<NodeId> = stats
            .transmitters
            .keys()
            .copied()
            .filter(|n| record.is_blacklisted(*n))
            .collect();
        if record.is_blacklisted(src) && stats.pkt_count > 0 {
            hit.insert(src);
        }
        for n in hit {
            out.push(
                Finding::new(
                    at,
                    n,
                    Detector::Blacklist,
                    Severity::Danger,
                    "Blacklisted",
                    Evidence::new("blacklist", 1.0, 0.0),
                )
                .claiming(src),
            );
        }
    }
    for rule in record.rules.values() {
        for (&src, stats) in &v.sources {
            let Some(observed) = rule.matches(v, src) else {
                continue;
            };
            let cond = &rule.conditions[0];
            let subjects: Vec<NodeId> = if rule.conditions.iter().any(|c| c.feature == Feature::DistinctCellsSeen) {
                let imp: Vec<NodeId> = stats.impostors(src).collect();
                if imp.is_empty() {
                    vec![src]
                } else {
                    imp
                }
            } else {
                vec![stats.culprit(src)]
            };
            for subject in subjects {
                out.push(
                    Finding::new(
                        at,
                        subject,
                        Detector::Signature,
                        Severity::Misbehavior,
                        rule.label.clone(),
                        Evidence::new(cond.feature.as_str(), observed, cond.threshold)
                            .with_note(format!("rule={}", rule.rule_id)),
                    )
                    .claiming(src),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::stimulus::SourceStats;

    fn vector_with(src: NodeId, f: impl FnOnce(&mut SourceStats)) -> StimulusVector {
        let mut v = StimulusVector::new((0, 1000));
        let mut s = SourceStats {
            window_ms: 1000,
            ..SourceStats::default()
        };
        s.transmitters.insert(src, 1);
        f(&mut s);
        v.sources.insert(src, s);
        v
    }

    #[test]
    fn empty_record_no_findings() {
        let v = vector_with(3, |s| s.hello_count = 1000);
        assert!(match_signatures(&SignatureRecord::default(), &v).is_empty());
    }

    #[test]
    fn hello_count_rule_fires() {
        let rec = SignatureRecord::defaults();
        let v = vector_with(3, |s| {
            s.hello_count = 100;
            s.pkt_count = 100;
        });
        let f = match_signatures(&rec, &v);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].label, "HelloFlood");
        assert_eq!(f[0].subject, 3);
        assert_eq!(f[0].severity, Severity::Misbehavior);
    }

    #[test]
    fn blacklisted_id_is_danger() {
        let mut rec = SignatureRecord::default();
        rec.blacklist(3);
        let v = vector_with(3, |s| s.pkt_count = 1);
        let f = match_signatures(&rec, &v);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].severity, Severity::Danger);
        assert!(!rec.clone().blacklist(3));
    }

    #[test]
    fn rule_order_is_by_id() {
        let rec = SignatureRecord::defaults();
        let v = vector_with(3, |s| {
            s.hello_count = 100;
            s.pkt_count = 200;
        });
        let labels: Vec<_> = match_signatures(&rec, &v).into_iter().map(|f| f.label).collect();
        assert_eq!(labels, vec!["HelloFlood", "Flooding"]);
    }

    #[test]
    fn sybil_rule_blames_impostors() {
        let rec = SignatureRecord::defaults();
        let v = vector_with(7, |s| {
            s.cells.insert(0);
            s.cells.insert(1);
            s.transmitters.insert(9, 3);
        });
        let f: Vec<_> = match_signatures(&rec, &v)
            .into_iter()
            .filter(|f| f.label == "Sybil")
            .collect();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].subject, 9);
        assert_eq!(f[0].claimed, 7);
    }

    #[test]
    fn malformed_rules_rejected() {
        let empty = SignatureRule {
            rule_id: 1,
            label: "x".into(),
            conditions: vec![],
        };
        assert!(SignatureRecord::with_rules([empty]).is_err());
        let nan = SignatureRule {
            rule_id: 2,
            label: "x".into(),
            conditions: vec![Condition::new(Feature::PktCount, Op::Gt, f64::NAN)],
        };
        assert!(nan.validate().is_err());
    }

    #[test]
    fn per_second_conditions() {
        let mut v = vector_with(3, |s| s.pkt_count = 100);
        v.window = (0, 2000);
        let c = Condition {
            per_second: true,
            ..Condition::new(Feature::PktCount, Op::Eq, 50.0)
        };
        assert_eq!(c.observe(&v, 3), Some(50.0));
    }
}
