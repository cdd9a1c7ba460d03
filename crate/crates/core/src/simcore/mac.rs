use std::collections::BTreeMap;

use super::SimTime;
use crate::error::{Error, Result};
use crate::topology::NodeId;

/// Per-cell TDMA frame: slot `i` belongs to `slots[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmaSchedule {
    slot_len: SimTime,
    slots: Vec<NodeId>,
}

impl TdmaSchedule {
    pub fn new(slot_len: SimTime, slots: Vec<NodeId>) -> Result<Self> {
        if slot_len == 0 || slots.is_empty() {
            return Err(Error::InvalidConfig(
                "TDMA schedule needs a positive slot length and at least one slot".into(),
            ));
        }
        Ok(Self { slot_len, slots })
    }

    /// One slot per node, in the given order.
    pub fn round_robin(slot_len: SimTime, nodes: &[NodeId]) -> Result<Self> {
        Self::new(slot_len, nodes.to_vec())
    }

    pub fn slot_len(&self) -> SimTime {
        self.slot_len
    }

    pub fn frame_len(&self) -> SimTime {
        self.slot_len * self.slots.len() as SimTime
    }

    pub fn slots(&self) -> &[NodeId] {
        &self.slots
    }

    pub fn owns_any(&self, node: NodeId) -> bool {
        self.slots.contains(&node)
    }

    pub fn slot_owner(&self, at: SimTime) -> NodeId {
        let idx = (at % self.frame_len()) / self.slot_len;
        self.slots[idx as usize]
    }

    /// Start offsets (within a frame) of the slots owned by `node`.
    pub fn slot_offsets(&self, node: NodeId) -> impl Iterator<Item = SimTime> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(move |(_, &n)| n == node)
            .map(move |(i, _)| i as SimTime * self.slot_len)
    }

    /// Earliest start of a slot owned by `node` at or after `at`.
    pub fn next_slot_start(&self, node: NodeId, at: SimTime) -> Option<SimTime> {
        let frame = self.frame_len();
        let base = at - at % frame;
        [base, base + frame]
            .into_iter()
            .flat_map(|b| self.slot_offsets(node).map(move |o| b + o))
            .filter(|&t| t >= at)
            .min()
    }
}

/// Duty-cycled sleep schedule. Each node is awake during
/// `[offset, offset + duration)` of every period.
#[derive(Debug, Clone, PartialEq)]
pub struct SmacSchedule {
    period: SimTime,
    windows: BTreeMap<NodeId, (SimTime, SimTime)>,
}

impl SmacSchedule {
    pub fn new(period: SimTime) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidConfig("S-MAC period must be positive".into()));
        }
        Ok(Self {
            period,
            windows: BTreeMap::new(),
        })
    }

    pub fn period(&self) -> SimTime {
        self.period
    }

    pub fn set_window(&mut self, node: NodeId, offset: SimTime, duration: SimTime) -> Result<()> {
        if duration == 0 || duration > self.period || offset >= self.period {
            return Err(Error::InvalidConfig(format!(
                "awake window ({offset}, {duration}) does not fit period {}",
                self.period
            )));
        }
        self.windows.insert(node, (offset, duration));
        Ok(())
    }

    pub fn window(&self, node: NodeId) -> Option<(SimTime, SimTime)> {
        self.windows.get(&node).copied()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.windows.contains_key(&node)
    }

    pub fn is_asleep(&self, node: NodeId, at: SimTime) -> Result<bool> {
        let (offset, duration) = self.window(node).ok_or(Error::UnknownNode(node))?;
        let phase = at % self.period;
        Ok(!(phase >= offset && phase < offset + duration))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tdma() -> TdmaSchedule {
        TdmaSchedule::new(10, vec![11, 12, 13, 12]).unwrap()
    }

    #[test]
    fn slot_zero_and_wrap() {
        let s = tdma();
        assert_eq!(s.frame_len(), 40);
        assert_eq!(s.slot_owner(0), 11);
        assert_eq!(s.slot_owner(s.frame_len()), 11);
        assert_eq!(s.slot_owner(39), 12);
    }

    #[test]
    fn next_slot_start_finds_owned_slots() {
        let s = tdma();
        assert_eq!(s.next_slot_start(12, 0), Some(10));
        assert_eq!(s.next_slot_start(12, 11), Some(30));
        assert_eq!(s.next_slot_start(11, 1), Some(40));
        assert_eq!(s.next_slot_start(99, 0), None);
    }

    #[test]
    fn smac_boundaries() {
        let mut s = SmacSchedule::new(100).unwrap();
        s.set_window(1, 20, 30).unwrap();
        s.set_window(2, 0, 100).unwrap();
        assert!(!s.is_asleep(1, 20).unwrap());
        assert!(s.is_asleep(1, 50).unwrap());
        assert!(s.is_asleep(1, 19).unwrap());
        assert!(!s.is_asleep(1, 149).unwrap());
        for t in 0..300 {
            assert!(!s.is_asleep(2, t).unwrap());
        }
        assert_eq!(s.is_asleep(3, 0), Err(Error::UnknownNode(3)));
        assert!(s.set_window(4, 0, 0).is_err());
        assert!(s.set_window(4, 0, 101).is_err());
    }

    proptest! {
        #[test]
        fn slot_owner_matches_per_ms_table(
            slot_len in 1u64..20,
            owners in proptest::collection::vec(0u32..6, 1..8),
            probes in proptest::collection::vec(0u64..100_000, 1..50),
        ) {
            let s = TdmaSchedule::new(slot_len, owners.clone()).unwrap();
            let mut table = Vec::new();
            for o in &owners {
                for _ in 0..slot_len {
                    table.push(*o);
                }
            }
            for t in probes {
                prop_assert_eq!(s.slot_owner(t), table[(t % table.len() as u64) as usize]);
            }
        }
    }
}
