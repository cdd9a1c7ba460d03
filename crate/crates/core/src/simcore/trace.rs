use std::fmt;

use super::SimTime;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceKind {
    Tx,
    Rx,
    Deliver,
    Discard,
    Drop,
    Tunnel,
    Finding,
    Report,
    Alert,
    Policy,
    Resupply,
    State,
    Blacklist,
    Failover,
    Orphan,
    Kill,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Tx => "TX",
            TraceKind::Rx => "RX",
            TraceKind::Deliver => "DELIVER",
            TraceKind::Discard => "DISCARD",
            TraceKind::Drop => "DROP",
            TraceKind::Tunnel => "TUNNEL",
            TraceKind::Finding => "FINDING",
            TraceKind::Report => "REPORT",
            TraceKind::Alert => "ALERT",
            TraceKind::Policy => "POLICY",
            TraceKind::Resupply => "RESUPPLY",
            TraceKind::State => "STATE",
            TraceKind::Blacklist => "BLACKLIST",
            TraceKind::Failover => "FAILOVER",
            TraceKind::Orphan => "ORPHAN",
            TraceKind::Kill => "KILL",
        }
    }
}

/// One trace record. Rendered as
/// `<time> <KIND> actor=<id> seq=<seq|-> <detail>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLine {
    pub at: SimTime,
    pub kind: TraceKind,
    pub actor: NodeId,
    pub seq: Option<u64>,
    pub detail: String,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} actor={} seq=", self.at, self.kind.as_str(), self.actor)?;
        match self.seq {
            Some(s) => write!(f, "{s}")?,
            None => write!(f, "-")?,
        }
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    enabled: bool,
    lines: Vec<TraceLine>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            lines: Vec::new(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn push(
        &mut self,
        at: SimTime,
        kind: TraceKind,
        actor: NodeId,
        seq: Option<u64>,
        detail: impl FnOnce() -> String,
    ) {
        if self.enabled {
            self.lines.push(TraceLine {
                at,
                kind,
                actor,
                seq,
                detail: detail(),
            });
        }
    }

    pub fn lines(&self) -> &[TraceLine] {
        &self.lines
    }

    pub fn of_kind(&self, kind: TraceKind) -> impl Iterator<Item = &TraceLine> {
        self.lines.iter().filter(move |l| l.kind == kind)
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.lines.len() * 48);
        for l in &self.lines {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        out
    }
}
