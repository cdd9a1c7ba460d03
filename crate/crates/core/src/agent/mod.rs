//! Intrusion detection agent: preprocessor, signature processor, anomaly
//! processor and post processor, instantiated at the cluster, regional and
//! base tiers.

mod anomaly;
mod finding;
mod signature;
mod stimulus;

use std::collections::VecDeque;

pub use anomaly::{detect_anomaly, AnomalyPolicy, AnomalyProfile, Baseline};
pub use finding::{Detector, Evidence, Finding, Report, ReportSummary, Severity};
pub use signature::{match_signatures, Condition, Op, SignatureRecord, SignatureRule};
pub use stimulus::{
    preprocess, Feature, PdrSample, RelayOutcome, SourceStats, StimulusVector, TxObservation,
    WindowObservations,
};

use crate::simcore::SimTime;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    /// LPA on a cluster node.
    Local,
    /// RPA on a regional node.
    Regional,
    /// BPDP on the base station.
    Base,
}

/// Runs the fixed processing order over one closed window: layer findings
/// first, then the signature processor, then the anomaly processor.
pub fn analyze(
    record: &SignatureRecord,
    profile: &mut AnomalyProfile,
    v: &StimulusVector,
    layer_findings: Vec<Finding>,
) -> Vec<Finding> {
    let mut out = layer_findings;
    out.extend(match_signatures(record, v));
    out.extend(detect_anomaly(profile, v));
    out
}

/// Post processor output for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct PostOutput {
    pub report: Report,
    /// Danger findings that must go up as immediate alerts.
    pub alerts: Vec<Finding>,
}

pub fn postprocess(
    from_agent: NodeId,
    window: (SimTime, SimTime),
    findings: Vec<Finding>,
    summary: ReportSummary,
    v: &StimulusVector,
    watched: Vec<NodeId>,
) -> PostOutput {
    let alerts = findings
        .iter()
        .filter(|f| f.severity == Severity::Danger)
        .cloned()
        .collect();
    PostOutput {
        report: Report {
            from_agent,
            window,
            findings,
            summary,
            sources: v.sources.iter().map(|(k, s)| (*k, s.clone())).collect(),
            watched,
        },
        alerts,
    }
}

/// Upward report channel that buffers while the parent is unreachable.
#[derive(Debug, Clone, Default)]
pub struct Uplink {
    buffered: VecDeque<Report>,
}

impl Uplink {
    /// Returns the reports to deliver now, oldest first.
    pub fn submit(&mut self, report: Report, parent_reachable: bool) -> Vec<Report> {
        self.buffered.push_back(report);
        if parent_reachable {
            self.buffered.drain(..).collect()
        } else {
            Vec::new()
        }
    }

    pub fn flush(&mut self) -> Vec<Report> {
        self.buffered.drain(..).collect()
    }

    pub fn pending(&self) -> usize {
        self.buffered.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_window_still_reports() {
        let out = postprocess(
            2,
            (0, 1000),
            Vec::new(),
            ReportSummary::default(),
            &StimulusVector::new((0, 1000)),
            Vec::new(),
        );
        assert_eq!(out.report.from_agent, 2);
        assert!(out.report.findings.is_empty());
        assert!(out.alerts.is_empty());
    }

    #[test]
    fn danger_findings_become_alerts() {
        let f = Finding::new(
            10,
            5,
            Detector::Blacklist,
            Severity::Danger,
            "Blacklisted",
            Evidence::new("blacklist", 1.0, 0.0),
        );
        let out = postprocess(
            2,
            (0, 1000),
            vec![f.clone()],
            ReportSummary::default(),
            &StimulusVector::new((0, 1000)),
            Vec::new(),
        );
        assert_eq!(out.alerts, vec![f]);
    }

    #[test]
    fn uplink_buffers_until_reachable() {
        let mut u = Uplink::default();
        assert!(u.submit(Report::empty(2, (0, 1000)), false).is_empty());
        assert!(u.submit(Report::empty(2, (1000, 2000)), false).is_empty());
        assert_eq!(u.pending(), 2);
        let flushed = u.flush();
        assert_eq!(flushed.len(), 2);
        assert_eq!(flushed[0].window, (0, 1000));
        let now = u.submit(Report::empty(2, (2000, 3000)), true);
        assert_eq!(now.len(), 1);
    }

    #[test]
    fn analyze_is_pure_given_inputs() {
        let rec = SignatureRecord::defaults();
        let mut v = StimulusVector::new((0, 1000));
        let mut s = SourceStats {
            hello_count: 80,
            pkt_count: 80,
            window_ms: 1000,
            ..SourceStats::default()
        };
        s.transmitters.insert(4, 80);
        v.sources.insert(4, s);
        let mut p1 = AnomalyProfile::new(AnomalyPolicy::default());
        let mut p2 = p1.clone();
        assert_eq!(
            analyze(&rec, &mut p1, &v, Vec::new()),
            analyze(&rec, &mut p2, &v, Vec::new())
        );
    }
}
