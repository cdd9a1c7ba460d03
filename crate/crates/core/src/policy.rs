//! Detection policy sets, their scopes, intrusion-detection-table
//! operations at the base station and top-down dissemination.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agent::{AnomalyPolicy, SignatureRecord, SignatureRule};
use crate::detectors::DetectorParams;
use crate::error::{Error, Result};
use crate::response::ResponseParams;
use crate::topology::{CellId, NodeId, RegionId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    Global,
    Region(RegionId),
    Cluster(CellId),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => write!(f, "global"),
            Scope::Region(r) => write!(f, "region:{r}"),
            Scope::Cluster(c) => write!(f, "cluster:{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySet {
    pub version: u64,
    pub signatures: SignatureRecord,
    pub anomaly: AnomalyPolicy,
    pub response: ResponseParams,
    pub detectors: DetectorParams,
}

impl Default for PolicySet {
    fn default() -> Self {
        Self {
            version: 1,
            signatures: SignatureRecord::defaults(),
            anomaly: AnomalyPolicy::default(),
            response: ResponseParams::default(),
            detectors: DetectorParams::default(),
        }
    }
}

impl PolicySet {
    pub fn validate(&self) -> Result<()> {
        self.signatures.validate()?;
        self.anomaly.validate()?;
        self.response.validate()?;
        let d = &self.detectors;
        if !(d.rssi_tolerance > 0.0) || d.miss_limit == 0 {
            return Err(Error::InvalidConfig(
                "detectors.rssi_tolerance and miss_limit must be > 0".into(),
            ));
        }
        for (name, v) in [
            ("pdr_floor", d.pdr_floor),
            ("busy_ceiling", d.busy_ceiling),
            ("watchdog_forward_floor", d.watchdog_forward_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("detectors.{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Intrusion detection table operations.
#[derive(Debug, Clone, PartialEq)]
pub enum IdtChange {
    Create(SignatureRule),
    Modify(SignatureRule),
    Delete(u32),
    Examine(u32),
    ModifyAnomaly(AnomalyPolicy),
    ModifyResponse(ResponseParams),
    ModifyDetectors(DetectorParams),
}

/// Applies one table operation. Mutations bump the version; Examine
/// returns the rule and changes nothing.
pub fn idt_apply(set: &mut PolicySet, change: IdtChange) -> Result<Option<SignatureRule>> {
    let rules = &mut set.signatures.rules;
    let out = match change {
        IdtChange::Create(rule) => {
            rule.validate()?;
            if rules.contains_key(&rule.rule_id) {
                return Err(Error::MalformedRule(format!(
                    "rule {} already exists",
                    rule.rule_id
                )));
            }
            rules.insert(rule.rule_id, rule);
            None
        }
        IdtChange::Modify(rule) => {
            rule.validate()?;
            let slot = rules
                .get_mut(&rule.rule_id)
                .ok_or(Error::UnknownRule(rule.rule_id))?;
            *slot = rule;
            None
        }
        IdtChange::Delete(id) => {
            rules.remove(&id).ok_or(Error::UnknownRule(id))?;
            None
        }
        IdtChange::Examine(id) => {
            return rules.get(&id).cloned().map(Some).ok_or(Error::UnknownRule(id));
        }
        IdtChange::ModifyAnomaly(a) => {
            a.validate()?;
            set.anomaly = a;
            None
        }
        IdtChange::ModifyResponse(r) => {
            r.validate()?;
            set.response = r;
            None
        }
        IdtChange::ModifyDetectors(d) => {
            let mut probe = set.clone();
            probe.detectors = d;
            probe.validate()?;
            set.detectors = probe.detectors;
            None
        }
    };
    set.version += 1;
    Ok(out)
}

/// Policy sets by scope, kept at the base station and mirrored by agents.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStore {
    sets: BTreeMap<Scope, PolicySet>,
}

impl PolicyStore {
    pub fn new(global: PolicySet) -> Self {
        Self {
            sets: BTreeMap::from([(Scope::Global, global)]),
        }
    }

    pub fn get(&self, scope: Scope) -> Option<&PolicySet> {
        self.sets.get(&scope)
    }

    pub fn version(&self, scope: Scope) -> u64 {
        self.sets.get(&scope).map_or(0, |s| s.version)
    }

    /// Installs a set, rejecting versions that are not newer.
    pub fn install(&mut self, scope: Scope, set: PolicySet) -> Result<()> {
        let current = self.version(scope);
        if set.version <= current {
            return Err(Error::StalePolicy {
                scope: scope.to_string(),
                got: set.version,
                current,
            });
        }
        self.sets.insert(scope, set);
        Ok(())
    }

    /// Narrowest scope wins.
    pub fn effective(&self, region: RegionId, cell: CellId) -> &PolicySet {
        self.sets
            .get(&Scope::Cluster(cell))
            .or_else(|| self.sets.get(&Scope::Region(region)))
            .or_else(|| self.sets.get(&Scope::Global))
            .expect("global policy is always present")
    }

    /// Edits the set for `scope` in place, creating it from the global set
    /// when absent.
    pub fn edit(&mut self, scope: Scope, change: IdtChange) -> Result<Option<SignatureRule>> {
        let global = self.sets[&Scope::Global].clone();
        let set = self.sets.entry(scope).or_insert(global);
        idt_apply(set, change)
    }

    pub fn scopes(&self) -> impl Iterator<Item = (Scope, &PolicySet)> {
        self.sets.iter().map(|(s, p)| (*s, p))
    }

    /// Applies a directive to blacklist `node` in every set.
    pub fn blacklist(&mut self, node: NodeId) -> bool {
        let mut changed = false;
        for set in self.sets.values_mut() {
            if set.signatures.blacklist(node) {
                set.version += 1;
                changed = true;
            }
        }
        changed
    }
}

/// Policy update messages staged at an agent until the next window boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Staged {
    pending: Vec<(Scope, PolicySet)>,
}

impl Staged {
    pub fn push(&mut self, scope: Scope, set: PolicySet) {
        self.pending.push((scope, set));
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Highest staged version for `scope`, 0 when none.
    pub fn version(&self, scope: Scope) -> u64 {
        self.pending
            .iter()
            .filter(|(s, _)| *s == scope)
            .map(|(_, p)| p.version)
            .max()
            .unwrap_or(0)
    }

    /// Applies everything staged; stale updates are discarded and
    /// reported back.
    pub fn commit(&mut self, store: &mut PolicyStore) -> Vec<Error> {
        self.pending
            .drain(..)
            .filter_map(|(scope, set)| store.install(scope, set).err())
            .collect()
    }
}

/// Which cluster cells a scope covers.
pub fn scope_cells(topo: &Topology, scope: Scope) -> Vec<CellId> {
    match scope {
        Scope::Global => (0..topo.cells().len()).collect(),
        Scope::Region(r) => topo
            .regionals()
            .get(r)
            .map(|&g| topo.cells_of_region(g).to_vec())
            .unwrap_or_default(),
        Scope::Cluster(c) => vec![c],
    }
}

/// Message hops that carry an update down the hierarchy: base to each
/// affected regional node, then each regional node to its clusters.
pub fn dissemination_plan(topo: &Topology, scope: Scope) -> Vec<(NodeId, NodeId)> {
    let cells = scope_cells(topo, scope);
    let regional_of = |c: CellId| {
        topo.region_of(topo.cluster_of_cell(c))
            .expect("every cluster has a regional node")
    };
    let mut regionals: Vec<NodeId> = cells.iter().map(|&c| regional_of(c)).collect();
    regionals.dedup();
    let mut hops: Vec<(NodeId, NodeId)> = regionals
        .iter()
        .map(|&g| (topo.base_station(), g))
        .collect();
    hops.extend(cells.iter().map(|&c| (regional_of(c), topo.cluster_of_cell(c))));
    hops
}
