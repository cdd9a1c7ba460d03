//! Node classification and the response state machine. Time is counted
//! in detection windows.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeState {
    Fresh,
    Member,
    Unstable,
    Suspect,
    Malicious,
}

impl NodeState {
    pub const ALL: [NodeState; 5] = [
        NodeState::Fresh,
        NodeState::Member,
        NodeState::Unstable,
        NodeState::Suspect,
        NodeState::Malicious,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NodeState::Fresh => "Fresh",
            NodeState::Member => "Member",
            NodeState::Unstable => "Unstable",
            NodeState::Suspect => "Suspect",
            NodeState::Malicious => "Malicious",
        }
    }

    /// Edges the machine may take.
    pub fn can_move_to(self, to: NodeState) -> bool {
        use NodeState::*;
        matches!(
            (self, to),
            (Fresh, Member)
                | (Fresh, Suspect)
                | (Member, Unstable)
                | (Unstable, Member)
                | (Unstable, Suspect)
                | (Suspect, Unstable)
                | (Suspect, Malicious)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseParams {
    pub t_fresh: u64,
    pub t_unstable_obs: u64,
    pub k_flips: u32,
    pub flip_window: u64,
    pub t_ban: u64,
    pub t_suspect_obs: u64,
    pub t_mis: u32,
}

impl Default for ResponseParams {
    fn default() -> Self {
        Self {
            t_fresh: 5,
            t_unstable_obs: 5,
            k_flips: 3,
            flip_window: 20,
            t_ban: 10,
            t_suspect_obs: 10,
            t_mis: 5,
        }
    }
}

impl ResponseParams {
    pub fn validate(&self) -> Result<()> {
        let zero = [
            ("t_fresh", self.t_fresh),
            ("t_unstable_obs", self.t_unstable_obs),
            ("k_flips", self.k_flips as u64),
            ("flip_window", self.flip_window),
            ("t_ban", self.t_ban),
            ("t_suspect_obs", self.t_suspect_obs),
            ("t_mis", self.t_mis as u64),
        ]
        .into_iter()
        .find(|(_, v)| *v == 0);
        match zero {
            Some((name, _)) => Err(Error::InvalidConfig(format!("response.{name} must be > 0"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Good,
    Misbehaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Action {
    Isolate(NodeId),
    Release(NodeId),
    /// Danger alert toward the regional agent.
    Alert(NodeId),
    Blacklist(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    Originate,
    Forward,
    Receive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeClassRecord {
    pub node: NodeId,
    pub state: NodeState,
    pub entered_at: u64,
    /// Windows in which a Member/Unstable flip happened.
    pub flips: VecDeque<u64>,
    pub bad_streak: u32,
    pub good_streak: u64,
    pub ban_until: u64,
    pub observe_until: u64,
}

impl NodeClassRecord {
    pub fn new(node: NodeId, state: NodeState, at: u64) -> Self {
        Self {
            node,
            state,
            entered_at: at,
            flips: VecDeque::new(),
            bad_streak: 0,
            good_streak: 0,
            ban_until: 0,
            observe_until: 0,
        }
    }

    pub fn recent_flips(&self, window: u64, params: &ResponseParams) -> u32 {
        self.flips
            .iter()
            .filter(|&&f| window < f + params.flip_window)
            .count() as u32
    }

    /// Within the ban, before close observation starts.
    pub fn is_banned(&self, window: u64) -> bool {
        self.state == NodeState::Suspect && window < self.ban_until
    }

    /// Cut off from routing: banned Suspects and Malicious nodes.
    pub fn is_isolated(&self, window: u64) -> bool {
        self.state == NodeState::Malicious || self.is_banned(window)
    }

    fn enter(&mut self, state: NodeState, window: u64) {
        debug_assert!(self.state.can_move_to(state));
        self.state = state;
        self.entered_at = window;
        self.bad_streak = 0;
        self.good_streak = 0;
    }

    fn flip(&mut self, window: u64, params: &ResponseParams) {
        self.flips.push_back(window);
        while self
            .flips
            .front()
            .is_some_and(|&f| window >= f + params.flip_window)
        {
            self.flips.pop_front();
        }
    }

    fn suspect(&mut self, window: u64, params: &ResponseParams) -> Vec<Action> {
        self.enter(NodeState::Suspect, window);
        self.flips.clear();
        self.ban_until = window + 1 + params.t_ban;
        self.observe_until = self.ban_until + params.t_suspect_obs;
        vec![Action::Isolate(self.node), Action::Alert(self.node)]
    }
}

/// Applies one window's verdict to a record, returning the actions due.
pub fn step(
    rec: &mut NodeClassRecord,
    verdict: Verdict,
    window: u64,
    params: &ResponseParams,
) -> Vec<Action> {
    let bad = verdict == Verdict::Misbehaved;
    match rec.state {
        NodeState::Fresh => {
            if bad {
                rec.suspect(window, params)
            } else {
                rec.good_streak += 1;
                if rec.good_streak >= params.t_fresh {
                    rec.enter(NodeState::Member, window);
                }
                Vec::new()
            }
        }
        NodeState::Member => {
            if bad {
                rec.enter(NodeState::Unstable, window);
                rec.flip(window, params);
                rec.bad_streak = 1;
            }
            Vec::new()
        }
        NodeState::Unstable => {
            if bad {
                rec.bad_streak += 1;
                rec.good_streak = 0;
            } else {
                rec.good_streak += 1;
                rec.bad_streak = 0;
            }
            if rec.recent_flips(window, params) >= params.k_flips || rec.bad_streak >= params.t_mis {
                rec.suspect(window, params)
            } else {
                if rec.good_streak >= params.t_unstable_obs {
                    rec.enter(NodeState::Member, window);
                    rec.flip(window, params);
                }
                Vec::new()
            }
        }
        NodeState::Suspect => {
            if window < rec.ban_until {
                // the ban runs out regardless of behaviour
                if window + 1 == rec.ban_until {
                    vec![Action::Release(rec.node)]
                } else {
                    Vec::new()
                }
            } else if bad {
                rec.enter(NodeState::Malicious, window);
                vec![Action::Blacklist(rec.node)]
            } else {
                if window + 1 >= rec.observe_until {
                    rec.enter(NodeState::Unstable, window);
                }
                Vec::new()
            }
        }
        NodeState::Malicious => Vec::new(),
    }
}

/// Per-state traffic permissions. A Suspect past its ban is watched
/// closely and may relay, so that it can be observed, but not originate.
pub fn permit(rec: &NodeClassRecord, op: Operation, window: u64) -> bool {
    match rec.state {
        NodeState::Member => true,
        NodeState::Fresh | NodeState::Unstable => op != Operation::Originate,
        NodeState::Suspect if !rec.is_banned(window) => op != Operation::Originate,
        NodeState::Suspect | NodeState::Malicious => false,
    }
}

/// Classification records of the sensors one local agent is responsible for.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResponseTable {
    records: BTreeMap<NodeId, NodeClassRecord>,
    blacklist: BTreeSet<NodeId>,
}

impl ResponseTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Admits a new node as Fresh.
    pub fn admit(&mut self, node: NodeId, window: u64) -> Result<()> {
        if self.blacklist.contains(&node) {
            return Err(Error::Blacklisted(node));
        }
        if self.records.contains_key(&node) {
            return Err(Error::DuplicateAdmission(node));
        }
        self.records
            .insert(node, NodeClassRecord::new(node, NodeState::Fresh, window));
        Ok(())
    }

    pub fn step(
        &mut self,
        node: NodeId,
        verdict: Verdict,
        window: u64,
        params: &ResponseParams,
    ) -> Result<Vec<Action>> {
        let rec = self.records.get_mut(&node).ok_or(Error::UnknownNode(node))?;
        let actions = step(rec, verdict, window, params);
        if actions.contains(&Action::Blacklist(node)) {
            self.blacklist.insert(node);
        }
        Ok(actions)
    }

    pub fn get(&self, node: NodeId) -> Option<&NodeClassRecord> {
        self.records.get(&node)
    }

    pub fn state(&self, node: NodeId) -> Option<NodeState> {
        self.records.get(&node).map(|r| r.state)
    }

    pub fn permit(&self, node: NodeId, op: Operation, window: u64) -> bool {
        self.records
            .get(&node)
            .is_some_and(|r| permit(r, op, window))
    }

    pub fn isolated(&self, window: u64) -> BTreeSet<NodeId> {
        self.records
            .values()
            .filter(|r| r.is_isolated(window))
            .map(|r| r.node)
            .collect()
    }

    /// Blacklists a node on a directive from above.
    pub fn blacklist(&mut self, node: NodeId, window: u64) {
        self.blacklist.insert(node);
        if let Some(r) = self.records.get_mut(&node) {
            if r.state != NodeState::Malicious {
                r.state = NodeState::Malicious;
                r.entered_at = window;
            }
        }
    }

    pub fn is_blacklisted(&self, node: NodeId) -> bool {
        self.blacklist.contains(&node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.records.keys().copied()
    }

    pub fn records(&self) -> impl Iterator<Item = &NodeClassRecord> {
        self.records.values()
    }

    /// Removes a record so it can migrate to another agent intact.
    pub fn take(&mut self, node: NodeId) -> Option<NodeClassRecord> {
        self.records.remove(&node)
    }

    pub fn insert(&mut self, rec: NodeClassRecord) {
        if rec.state == NodeState::Malicious {
            self.blacklist.insert(rec.node);
        }
        self.records.insert(rec.node, rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use NodeState::*;
    use Verdict::*;

    fn run(start: NodeState, verdicts: &[Verdict]) -> (NodeClassRecord, Vec<Vec<Action>>) {
        let p = ResponseParams::default();
        let mut r = NodeClassRecord::new(7, start, 0);
        let acts = verdicts
            .iter()
            .enumerate()
            .map(|(w, &v)| step(&mut r, v, w as u64, &p))
            .collect();
        (r, acts)
    }

    #[test]
    fn member_stays_member_when_good() {
        let (r, acts) = run(Member, &[Good; 50]);
        assert_eq!(r.state, Member);
        assert!(acts.iter().all(Vec::is_empty));
    }

    #[test]
    fn fresh_graduates_after_t_fresh() {
        let (r, _) = run(Fresh, &[Good; 4]);
        assert_eq!(r.state, Fresh);
        let (r, _) = run(Fresh, &[Good; 5]);
        assert_eq!(r.state, Member);
    }

    #[test]
    fn fresh_misbehaving_goes_straight_to_suspect() {
        let (r, acts) = run(Fresh, &[Bad]);
        assert_eq!(r.state, Suspect);
        assert_eq!(acts[0], vec![Action::Isolate(7), Action::Alert(7)]);
    }

    #[allow(non_upper_case_globals)]
    const Bad: Verdict = Misbehaved;

    #[test]
    fn single_misbehaviour_then_recovery() {
        let mut v = vec![Bad];
        v.extend([Good; 5]);
        let (r, _) = run(Member, &v);
        assert_eq!(r.state, Member);
        assert_eq!(r.flips.len(), 2);
    }

    #[test]
    fn sustained_misbehaviour_reaches_suspect_at_t_mis() {
        let (r, _) = run(Member, &[Bad; 4]);
        assert_eq!(r.state, Unstable);
        let (r, acts) = run(Member, &[Bad; 5]);
        assert_eq!(r.state, Suspect);
        assert!(acts[4].contains(&Action::Isolate(7)));
    }

    #[test]
    fn oscillation_hits_k_flips() {
        // Member->Unstable (1), back (2), Unstable again (3), next step suspects
        let mut v = vec![Bad];
        v.extend([Good; 5]);
        v.push(Bad);
        v.push(Good);
        let (r, _) = run(Member, &v);
        assert_eq!(r.state, Suspect);
    }

    #[test]
    fn suspect_ban_then_observation() {
        let p = ResponseParams::default();
        let mut r = NodeClassRecord::new(7, Fresh, 0);
        step(&mut r, Bad, 0, &p);
        assert_eq!(r.ban_until, 11);
        for w in 1..11 {
            assert!(r.is_banned(w));
            let a = step(&mut r, Bad, w, &p);
            assert_eq!(r.state, Suspect);
            assert_eq!(a.is_empty(), w != 10);
        }
        assert!(!r.is_banned(11));
        assert!(!r.is_isolated(11));
        assert!(!permit(&r, Operation::Originate, 11));
        assert!(permit(&r, Operation::Forward, 11));
        let mut good = r.clone();
        for w in 11..21 {
            step(&mut good, Good, w, &p);
        }
        assert_eq!(good.state, Unstable);
        let a = step(&mut r, Bad, 15, &p);
        assert_eq!(r.state, Malicious);
        assert_eq!(a, vec![Action::Blacklist(7)]);
    }

    #[test]
    fn permission_matrix() {
        use Operation::*;
        let table = [
            (Fresh, [false, true, true]),
            (Member, [true, true, true]),
            (Unstable, [false, true, true]),
            (Suspect, [false, false, false]),
            (Malicious, [false, false, false]),
        ];
        for (state, row) in table {
            let mut r = NodeClassRecord::new(1, state, 0);
            r.ban_until = 10;
            for (op, want) in [Originate, Forward, Receive].into_iter().zip(row) {
                assert_eq!(permit(&r, op, 5), want, "{state:?} {op:?}");
            }
        }
    }

    #[test]
    fn table_admission_errors() {
        let p = ResponseParams::default();
        let mut t = ResponseTable::new();
        t.admit(3, 0).unwrap();
        assert_eq!(t.admit(3, 0), Err(Error::DuplicateAdmission(3)));
        t.step(3, Bad, 0, &p).unwrap();
        for w in 1..=11 {
            t.step(3, Good, w, &p).unwrap();
        }
        t.step(3, Bad, 12, &p).unwrap();
        assert!(t.is_blacklisted(3));
        let rec = t.take(3).unwrap();
        assert_eq!(t.admit(3, 13), Err(Error::Blacklisted(3)));
        let mut other = ResponseTable::new();
        other.insert(rec);
        assert!(other.is_blacklisted(3));
        assert_eq!(t.step(99, Good, 0, &p), Err(Error::UnknownNode(99)));
    }

    #[test]
    fn invalid_params() {
        let p = ResponseParams {
            t_ban: 0,
            ..ResponseParams::default()
        };
        assert!(p.validate().is_err());
    }

    fn any_state() -> impl Strategy<Value = NodeState> {
        prop_oneof![Just(Fresh), Just(Member), Just(Unstable), Just(Suspect), Just(Malicious)]
    }

    proptest! {
        #[test]
        fn only_listed_edges(start in any_state(), bits in proptest::collection::vec(any::<bool>(), 0..80)) {
            let p = ResponseParams::default();
            let mut r = NodeClassRecord::new(1, start, 0);
            if start == Suspect {
                r.ban_until = 3;
                r.observe_until = 6;
            }
            for (w, b) in bits.iter().enumerate() {
                let before = r.state;
                step(&mut r, if *b { Bad } else { Good }, w as u64, &p);
                prop_assert!(before == r.state || before.can_move_to(r.state));
                if before == Malicious {
                    prop_assert_eq!(r.state, Malicious);
                }
            }
        }

        #[test]
        fn good_member_never_flips(n in 0usize..200) {
            let (r, _) = run(Member, &vec![Good; n]);
            prop_assert_eq!(r.state, Member);
            prop_assert!(r.flips.is_empty());
        }
    }
}
