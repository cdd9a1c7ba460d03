use std::fmt;

use serde::{Deserialize, Serialize};

use super::stimulus::SourceStats;
use crate::simcore::SimTime;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Misbehavior,
    Danger,
}

/// Which mechanism produced a finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    Rssi,
    CarrierSense,
    Pdr,
    Tdma,
    Smac,
    Route,
    Watchdog,
    Signature,
    Anomaly,
    Blacklist,
    /// Escalation by the response module.
    Response,
}

impl Detector {
    pub fn as_str(&self) -> &'static str {
        match self {
            Detector::Rssi => "rssi",
            Detector::CarrierSense => "carrier_sense",
            Detector::Pdr => "pdr",
            Detector::Tdma => "tdma",
            Detector::Smac => "smac",
            Detector::Route => "route",
            Detector::Watchdog => "watchdog",
            Detector::Signature => "signature",
            Detector::Anomaly => "anomaly",
            Detector::Blacklist => "blacklist",
            Detector::Response => "response",
        }
    }

    pub const ALL: [Detector; 11] = [
        Detector::Rssi,
        Detector::CarrierSense,
        Detector::Pdr,
        Detector::Tdma,
        Detector::Smac,
        Detector::Route,
        Detector::Watchdog,
        Detector::Signature,
        Detector::Anomaly,
        Detector::Blacklist,
        Detector::Response,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    pub feature: String,
    pub observed: f64,
    pub expected: f64,
    /// Sequence number of the offending packet, for per-packet checks.
    pub seq: Option<u64>,
    pub note: Option<String>,
}

impl Evidence {
    pub fn new(feature: impl Into<String>, observed: f64, expected: f64) -> Self {
        Self {
            feature: feature.into(),
            observed,
            expected,
            seq: None,
            note: None,
        }
    }

    pub fn with_seq(mut self, seq: u64) -> Self {
        self.seq = Some(seq);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A detection result. `subject` is the node the evidence is held against
/// (the attributed physical transmitter); `claimed` is the identity the
/// offending traffic carried.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub at: SimTime,
    pub subject: NodeId,
    pub claimed: NodeId,
    pub detector: Detector,
    pub severity: Severity,
    pub label: String,
    pub evidence: Evidence,
}

impl Finding {
    pub fn new(
        at: SimTime,
        subject: NodeId,
        detector: Detector,
        severity: Severity,
        label: impl Into<String>,
        evidence: Evidence,
    ) -> Self {
        Self {
            at,
            subject,
            claimed: subject,
            detector,
            severity,
            label: label.into(),
            evidence,
        }
    }

    pub fn claiming(mut self, claimed: NodeId) -> Self {
        self.claimed = claimed;
        self
    }

    pub fn counts_as_misbehavior(&self) -> bool {
        self.severity >= Severity::Misbehavior
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "subject={} claimed={} detector={} severity={:?} label={} feature={} observed={:.3} expected={:.3}",
            self.subject,
            self.claimed,
            self.detector.as_str(),
            self.severity,
            self.label,
            self.evidence.feature,
            self.evidence.observed,
            self.evidence.expected,
        )?;
        if let Some(seq) = self.evidence.seq {
            write!(f, " pkt={seq}")?;
        }
        if let Some(note) = &self.evidence.note {
            write!(f, " note={note}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReportSummary {
    pub packets_seen: u64,
    pub forwarded: u64,
}

/// Windowed upward report from one agent to its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub from_agent: NodeId,
    pub window: (SimTime, SimTime),
    pub findings: Vec<Finding>,
    pub summary: ReportSummary,
    /// Per-source aggregates for the parent's preprocessor.
    pub sources: Vec<(NodeId, SourceStats)>,
    /// Nodes under close post-ban observation.
    pub watched: Vec<NodeId>,
}

impl Report {
    pub fn empty(from_agent: NodeId, window: (SimTime, SimTime)) -> Self {
        Self {
            from_agent,
            window,
            findings: Vec::new(),
            summary: ReportSummary::default(),
            sources: Vec::new(),
            watched: Vec::new(),
        }
    }
}
