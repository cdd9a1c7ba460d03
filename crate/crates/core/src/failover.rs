//! Liveness tracking and fault-tolerant takeover of failed cluster or
//! regional nodes by their nearest alive neighbor.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::topology::{NodeId, NodeRole, Topology};

/// Missed-report counters a parent keeps for its children.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LivenessTable {
    /// child -> (missed, heard since last tick)
    children: BTreeMap<NodeId, (u32, bool)>,
}

impl LivenessTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn watch(&mut self, child: NodeId) {
        self.children.entry(child).or_insert((0, false));
    }

    pub fn unwatch(&mut self, child: NodeId) {
        self.children.remove(&child);
    }

    pub fn watches(&self, child: NodeId) -> bool {
        self.children.contains_key(&child)
    }

    /// A report or heartbeat arrived.
    pub fn heard(&mut self, child: NodeId) {
        if let Some(e) = self.children.get_mut(&child) {
            *e = (0, true);
        }
    }

    /// Closes one reporting period: silent children accumulate a miss.
    pub fn tick(&mut self) {
        for e in self.children.values_mut() {
            if !e.1 {
                e.0 += 1;
            }
            e.1 = false;
        }
    }

    pub fn missed(&self, child: NodeId) -> u32 {
        self.children.get(&child).map_or(0, |e| e.0)
    }

    pub fn children(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.children.keys().copied()
    }
}

/// Children whose consecutive misses reached `miss_limit`, ascending.
pub fn detect_failure(table: &LivenessTable, miss_limit: u32) -> Vec<NodeId> {
    table
        .children
        .iter()
        .filter(|(_, e)| e.0 >= miss_limit)
        .map(|(&c, _)| c)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TakeoverPlan {
    pub failed: NodeId,
    pub role: NodeRole,
    /// `None` when no neighbor is alive and the children are orphaned.
    pub successor: Option<NodeId>,
    /// Children whose parent changes.
    pub adopted: Vec<NodeId>,
}

/// Plans the takeover of `failed`. `children` are the nodes it currently
/// parents; `eligible` restricts which neighbors may take over.
pub fn plan_takeover(
    topo: &Topology,
    failed: NodeId,
    children: &[NodeId],
    eligible: impl Fn(NodeId) -> bool,
) -> Result<TakeoverPlan> {
    let role = topo.role(failed).ok_or(Error::UnknownNode(failed))?;
    if !matches!(role, NodeRole::ClusterNode | NodeRole::RegionalNode) {
        return Err(Error::InvalidConfig(format!(
            "node {failed} ({}) cannot be taken over",
            role.as_str()
        )));
    }
    let successor = match topo.neighbor_of(failed, eligible) {
        Ok(n) => Some(n),
        Err(Error::NoAliveNeighbor(_)) => None,
        Err(e) => return Err(e),
    };
    let mut adopted = children.to_vec();
    adopted.sort_unstable();
    Ok(TakeoverPlan {
        failed,
        role,
        successor,
        adopted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_topology, TopologyConfig};

    #[test]
    fn misses_accumulate_and_reset() {
        let mut t = LivenessTable::new();
        t.watch(5);
        t.watch(3);
        for _ in 0..2 {
            t.heard(5);
            t.tick();
        }
        assert_eq!(t.missed(3), 2);
        assert!(detect_failure(&t, 3).is_empty());
        t.tick();
        assert_eq!(detect_failure(&t, 3), vec![3]);
        t.heard(3);
        t.tick();
        assert_eq!(t.missed(3), 0);
    }

    #[test]
    fn simultaneous_failures_ascending() {
        let mut t = LivenessTable::new();
        for c in [9, 2, 7] {
            t.watch(c);
        }
        for _ in 0..3 {
            t.tick();
        }
        assert_eq!(detect_failure(&t, 3), vec![2, 7, 9]);
    }

    fn topo() -> Topology {
        build_topology(&TopologyConfig {
            regions: 1,
            cells_per_region: 7,
            sensors_per_cell: 3,
            ..TopologyConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn takeover_by_neighbor() {
        let topo = topo();
        let failed = topo.clusters()[0];
        let kids = topo.sensors_in_cell(0).to_vec();
        let plan = plan_takeover(&topo, failed, &kids, |_| true).unwrap();
        assert_eq!(plan.successor, Some(topo.clusters()[1]));
        assert_eq!(plan.adopted, kids);
    }

    #[test]
    fn orphaned_without_neighbors() {
        let topo = topo();
        let failed = topo.clusters()[0];
        let plan = plan_takeover(&topo, failed, &[], |_| false).unwrap();
        assert_eq!(plan.successor, None);
    }

    #[test]
    fn sensors_are_not_taken_over() {
        let topo = topo();
        let s = topo.sensors().next().unwrap();
        assert!(plan_takeover(&topo, s, &[], |_| true).is_err());
    }
}
