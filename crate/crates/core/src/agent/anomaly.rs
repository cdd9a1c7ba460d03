use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::finding::{Detector, Evidence, Finding, Severity};
use super::signature::Condition;
use super::stimulus::{Feature, StimulusVector};
use crate::error::{Error, Result};
use crate::topology::NodeId;

/// Anomaly settings distributed with policy: sensitivity, warm-up length and
/// absolute thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnomalyPolicy {
    /// Flag when `|x - mean| > k * std`.
    pub k: f64,
    pub warmup_windows: u32,
    pub features: Vec<Feature>,
    pub absolute: Vec<Condition>,
}

impl Default for AnomalyPolicy {
    fn default() -> Self {
        Self {
            k: 3.0,
            warmup_windows: 10,
            features: Feature::ALL.to_vec(),
            absolute: Vec::new(),
        }
    }
}

impl AnomalyPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::MalformedRule("anomaly k must be positive".into()));
        }
        if self.absolute.iter().any(|c| !c.threshold.is_finite()) {
            return Err(Error::MalformedRule(
                "anomaly absolute threshold must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Baseline {
    n: u32,
    mean: f64,
    m2: f64,
}

impl Baseline {
    pub fn from_moments(mean: f64, std: f64, n: u32) -> Self {
        Self {
            n,
            mean,
            m2: std * std * n as f64,
        }
    }

    pub fn update(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0).sqrt()
        }
    }

    pub fn samples(&self) -> u32 {
        self.n
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct SourceProfile {
    windows: u32,
    features: BTreeMap<Feature, Baseline>,
}

/// Learned normal profile per source plus the distributed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyProfile {
    pub policy: AnomalyPolicy,
    sources: BTreeMap<NodeId, SourceProfile>,
}

impl AnomalyProfile {
    pub fn new(policy: AnomalyPolicy) -> Self {
        Self {
            policy,
            sources: BTreeMap::new(),
        }
    }

    pub fn is_frozen(&self, src: NodeId) -> bool {
        self.sources
            .get(&src)
            .is_some_and(|p| p.windows >= self.policy.warmup_windows)
    }

    pub fn baseline(&self, src: NodeId, f: Feature) -> Option<Baseline> {
        self.sources.get(&src)?.features.get(&f).copied()
    }

    /// Installs a frozen baseline directly (fixtures and backups).
    pub fn set_baseline(&mut self, src: NodeId, f: Feature, b: Baseline) {
        let warm = self.policy.warmup_windows;
        let p = self.sources.entry(src).or_default();
        p.windows = p.windows.max(warm);
        p.features.insert(f, b);
    }

    /// Restarts learning for `src`.
    pub fn forget(&mut self, src: NodeId) {
        self.sources.remove(&src);
    }
}

/// Flags `(source, feature)` pairs that deviate from the learned profile or
/// breach an absolute threshold. Deviations in the harmless direction are
/// reported as Info. Sources still in warm-up only update their
/// baselines and produce nothing. A zero-variance baseline flags any
/// deviation.
pub fn detect_anomaly(profile: &mut AnomalyProfile, v: &StimulusVector) -> Vec<Finding> {
    let at = v.window.1;
    let warmup = profile.policy.warmup_windows;
    let k = profile.policy.k;
    let mut out = Vec::new();
    for (&src, stats) in &v.sources {
        let p = profile.sources.entry(src).or_default();
        if p.windows < warmup {
            for f in &profile.policy.features {
                if let Some(x) = stats.value(*f) {
                    p.features.entry(*f).or_default().update(x);
                }
            }
            p.windows += 1;
            continue;
        }
        let subject = stats.culprit(src);
        for f in &profile.policy.features {
            let (Some(x), Some(b)) = (stats.value(*f), p.features.get(f)) else {
                continue;
            };
            let dev = (x - b.mean()).abs();
            let std = b.std();
            let flagged = if std <= 1e-12 { dev > 1e-9 } else { dev > k * std };
            if flagged {
                let severity = if f.is_suspicious(x, b.mean()) {
                    Severity::Misbehavior
                } else {
                    Severity::Info
                };
                out.push(
                    Finding::new(
                        at,
                        subject,
                        Detector::Anomaly,
                        severity,
                        f.as_str(),
                        Evidence::new(f.as_str(), x, b.mean())
                            .with_note(format!("std={std:.4} k={k}")),
                    )
                    .claiming(src),
                );
            }
        }
        for c in &profile.policy.absolute {
            let Some(x) = c.observe(v, src) else { continue };
            if c.op.holds(x, c.threshold) {
                out.push(
                    Finding::new(
                        at,
                        subject,
                        Detector::Anomaly,
                        Severity::Misbehavior,
                        c.feature.as_str(),
                        Evidence::new(c.feature.as_str(), x, c.threshold)
                            .with_note("absolute"),
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
    use crate::agent::signature::Op;
    use crate::agent::stimulus::SourceStats;

    fn vec_pkts(src: NodeId, pkts: u32) -> StimulusVector {
        let mut v = StimulusVector::new((0, 1000));
        v.sources.insert(
            src,
            SourceStats {
                pkt_count: pkts,
                window_ms: 1000,
                ..SourceStats::default()
            },
        );
        v
    }

    fn only(f: Feature) -> AnomalyPolicy {
        AnomalyPolicy {
            features: vec![f],
            ..AnomalyPolicy::default()
        }
    }

    #[test]
    fn at_mean_no_finding() {
        let mut p = AnomalyProfile::new(only(Feature::PktCount));
        p.set_baseline(1, Feature::PktCount, Baseline::from_moments(10.0, 2.0, 10));
        assert!(detect_anomaly(&mut p, &vec_pkts(1, 10)).is_empty());
    }

    #[test]
    fn zero_variance_any_deviation_flags() {
        let mut p = AnomalyProfile::new(only(Feature::PktCount));
        p.set_baseline(1, Feature::PktCount, Baseline::from_moments(10.0, 0.0, 10));
        let f = detect_anomaly(&mut p, &vec_pkts(1, 11));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].detector, Detector::Anomaly);
    }

    #[test]
    fn k_sigma_boundary() {
        let mut p = AnomalyProfile::new(only(Feature::PktCount));
        p.set_baseline(1, Feature::PktCount, Baseline::from_moments(10.0, 2.0, 10));
        // 2.5 sigma: quiet at k = 3, flagged at k = 2
        assert!(detect_anomaly(&mut p, &vec_pkts(1, 15)).is_empty());
        p.policy.k = 2.0;
        assert_eq!(detect_anomaly(&mut p, &vec_pkts(1, 15)).len(), 1);
    }

    #[test]
    fn warmup_learns_silently() {
        let mut p = AnomalyProfile::new(only(Feature::PktCount));
        for i in 0..10 {
            assert!(detect_anomaly(&mut p, &vec_pkts(1, 100 * (i % 2) + 1)).is_empty());
        }
        assert!(p.is_frozen(1));
        let b = p.baseline(1, Feature::PktCount).unwrap();
        assert!((b.mean() - 51.0).abs() < 1e-9);
        assert!((b.std() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn absolute_threshold() {
        let mut pol = only(Feature::HelloCount);
        pol.absolute
            .push(Condition::new(Feature::PktCount, Op::Gt, 500.0));
        let mut p = AnomalyProfile::new(pol);
        p.set_baseline(1, Feature::HelloCount, Baseline::from_moments(0.0, 0.0, 10));
        assert_eq!(detect_anomaly(&mut p, &vec_pkts(1, 501)).len(), 1);
        assert!(detect_anomaly(&mut p, &vec_pkts(1, 500)).is_empty());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [3.0, 7.0, 7.0, 19.0, 2.5];
        let mut b = Baseline::default();
        xs.iter().for_each(|&x| b.update(x));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((b.mean() - mean).abs() < 1e-12);
        assert!((b.std() - var.sqrt()).abs() < 1e-12);
    }
}
