use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SimTime;
use crate::topology::NodeId;

/// Per-event energy charges in millijoules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyCosts {
    pub tx_mj: f64,
    pub rx_mj: f64,
    pub idle_mj_per_ms: f64,
    pub ids_mj_per_packet: f64,
}

impl Default for EnergyCosts {
    fn default() -> Self {
        Self {
            tx_mj: 0.05,
            rx_mj: 0.02,
            idle_mj_per_ms: 0.001,
            ids_mj_per_packet: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeEnergy {
    pub tx_mj: f64,
    pub rx_mj: f64,
    pub idle_mj: f64,
    pub ids_mj: f64,
}

impl NodeEnergy {
    pub fn total(&self) -> f64 {
        self.tx_mj + self.rx_mj + self.idle_mj + self.ids_mj
    }
}

#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    costs: EnergyCosts,
    nodes: BTreeMap<NodeId, NodeEnergy>,
    charged: f64,
    charges: u64,
}

impl EnergyLedger {
    pub fn new(costs: EnergyCosts) -> Self {
        Self {
            costs,
            ..Self::default()
        }
    }

    pub fn costs(&self) -> &EnergyCosts {
        &self.costs
    }

    fn entry(&mut self, node: NodeId) -> &mut NodeEnergy {
        self.nodes.entry(node).or_default()
    }

    fn record(&mut self, amount: f64) {
        self.charged += amount;
        self.charges += 1;
    }

    pub fn charge_tx(&mut self, node: NodeId) {
        let c = self.costs.tx_mj;
        self.entry(node).tx_mj += c;
        self.record(c);
    }

    pub fn charge_rx(&mut self, node: NodeId) {
        let c = self.costs.rx_mj;
        self.entry(node).rx_mj += c;
        self.record(c);
    }

    pub fn charge_ids(&mut self, node: NodeId, packets: u64) {
        let c = self.costs.ids_mj_per_packet * packets as f64;
        self.entry(node).ids_mj += c;
        self.record(c);
    }

    pub fn charge_idle(&mut self, node: NodeId, ms: SimTime) {
        let c = self.costs.idle_mj_per_ms * ms as f64;
        self.entry(node).idle_mj += c;
        self.record(c);
    }

    pub fn node(&self, node: NodeId) -> NodeEnergy {
        self.nodes.get(&node).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &NodeEnergy)> {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    pub fn total(&self) -> f64 {
        self.nodes.values().map(NodeEnergy::total).sum()
    }

    /// Sum of every individual charge made so far.
    pub fn charged(&self) -> f64 {
        self.charged
    }

    pub fn charge_count(&self) -> u64 {
        self.charges
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_reconcile_with_charges() {
        let mut l = EnergyLedger::new(EnergyCosts::default());
        l.charge_tx(1);
        l.charge_rx(2);
        l.charge_rx(3);
        l.charge_ids(2, 4);
        l.charge_idle(1, 100);
        assert!((l.total() - l.charged()).abs() < 1e-12);
        assert_eq!(l.charge_count(), 5);
        assert!((l.node(2).ids_mj - 0.02).abs() < 1e-12);
        for (_, e) in l.iter() {
            assert!(e.tx_mj >= 0.0 && e.rx_mj >= 0.0 && e.idle_mj >= 0.0 && e.ids_mj >= 0.0);
        }
    }
}
