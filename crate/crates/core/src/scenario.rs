//! Scenario files: strict TOML describing topology, radio, schedules,
//! policy, attacks and failures for one run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackSpec;
use crate::error::{Error, Result};
use crate::policy::PolicySet;
use crate::simcore::{EnergyCosts, RadioModel, SimTime};
use crate::topology::{NodeId, NodeRole, Topology, TopologyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdsMode {
    /// Detection runs at the cluster nodes only.
    #[default]
    Hierarchical,
    /// Every sensor inspects what it hears and broadcasts its own alerts.
    EverySensor,
}

impl IdsMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            IdsMode::Hierarchical => "hierarchical",
            IdsMode::EverySensor => "every_sensor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub window_ms: SimTime,
    pub slot_len: SimTime,
    /// Awake window length in slots, starting at the node's own slot.
    pub awake_slots: SimTime,
    pub hop_delay: SimTime,
    pub backbone_delay: SimTime,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            window_ms: 1000,
            slot_len: 10,
            awake_slots: 2,
            hop_delay: 2,
            backbone_delay: 2,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slot_len == 0 || self.awake_slots == 0 || self.hop_delay == 0 {
            return Err(Error::InvalidConfig(
                "schedules: slot_len, awake_slots and hop_delay must be > 0".into(),
            ));
        }
        if self.window_ms < 1000 || self.window_ms % self.slot_len != 0 {
            return Err(Error::InvalidConfig(
                "schedules.window_ms must be >= 1000 and a multiple of slot_len".into(),
            ));
        }
        Ok(())
    }

    /// Slots per TDMA frame for a cell of `n` sensors: the fewest slots, at
    /// least `n`, whose frame divides the window evenly.
    pub fn frame_slots(&self, n: usize) -> usize {
        let total = (self.window_ms / self.slot_len) as usize;
        (n.max(1)..=total)
            .find(|m| total % m == 0)
            .unwrap_or(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Failure {
    pub node: NodeId,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relocation {
    pub node: NodeId,
    pub at: SimTime,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub radio: RadioModel,
    #[serde(default)]
    pub schedules: ScheduleConfig,
    #[serde(default)]
    pub energy: EnergyCosts,
    #[serde(default)]
    pub policy: PolicySet,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
    #[serde(default)]
    pub failures: Vec<Failure>,
    #[serde(default)]
    pub relocations: Vec<Relocation>,
    #[serde(default)]
    pub mode: IdsMode,
    /// Simulated time in ms.
    pub duration: SimTime,
    /// Drives node placement and every random draw; overrides
    /// `topology.rng_seed`.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            radio: RadioModel::default(),
            schedules: ScheduleConfig::default(),
            energy: EnergyCosts::default(),
            policy: PolicySet::default(),
            attacks: Vec::new(),
            failures: Vec::new(),
            relocations: Vec::new(),
            mode: IdsMode::Hierarchical,
            duration: 30_000,
            seed: default_seed(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn topology_config(&self) -> TopologyConfig {
        TopologyConfig {
            rng_seed: self.seed,
            ..self.topology.clone()
        }
    }

    /// Warm-up before detection is fully armed, in ms.
    pub fn warmup_ms(&self) -> SimTime {
        let windows = self.policy.response.t_fresh + self.policy.anomaly.warmup_windows as u64;
        windows * self.schedules.window_ms
    }

    /// Checks everything that does not need the built topology.
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.radio.validate()?;
        self.schedules.validate()?;
        self.policy.validate()?;
        if self.duration <= self.warmup_ms() {
            return Err(Error::InvalidConfig(format!(
                "duration ({} ms) must exceed the warm-up ({} ms)",
                self.duration,
                self.warmup_ms()
            )));
        }
        for (i, a) in self.attacks.iter().enumerate() {
            a.validate()
                .map_err(|e| Error::InvalidConfig(format!("attacks[{i}]: {e}")))?;
        }
        Ok(())
    }

    /// Checks that every node reference resolves in `topo`, reporting the
    /// field path of the first dangling one.
    pub fn check_references(&self, topo: &Topology) -> Result<()> {
        let dangling = |path: String, id: NodeId| {
            Error::InvalidConfig(format!("{path}: node {id} does not exist"))
        };
        for (i, a) in self.attacks.iter().enumerate() {
            let mut refs = vec![(format!("attacks[{i}].attacker"), a.attacker)];
            refs.extend(a.peer.map(|p| (format!("attacks[{i}].peer"), p)));
            refs.extend(a.target.map(|t| (format!("attacks[{i}].target"), t)));
            for (path, id) in refs {
                if !topo.contains(id) {
                    return Err(dangling(path, id));
                }
            }
            if topo.role(a.attacker) == Some(NodeRole::BaseStation) {
                return Err(Error::InvalidConfig(format!(
                    "attacks[{i}].attacker: the base station cannot be compromised"
                )));
            }
        }
        for (i, f) in self.failures.iter().enumerate() {
            if !topo.contains(f.node) {
                return Err(dangling(format!("failures[{i}].node"), f.node));
            }
            if topo.role(f.node) == Some(NodeRole::BaseStation) {
                return Err(Error::InvalidConfig(format!(
                    "failures[{i}].node: the base station does not fail"
                )));
            }
        }
        for (i, r) in self.relocations.iter().enumerate() {
            if !topo.contains(r.node) {
                return Err(dangling(format!("relocations[{i}].node"), r.node));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_topology;

    #[test]
    fn minimal_file_parses_with_defaults() {
        let s = Scenario::from_toml("duration = 20000\n").unwrap();
        assert_eq!(s.duration, 20_000);
        assert_eq!(s.schedules, ScheduleConfig::default());
        s.validate().unwrap();
    }

    #[test]
    fn unknown_keys_fail() {
        let e = Scenario::from_toml("duration = 20000\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"));
        let e = Scenario::from_toml("duration = 20000\n[topology]\nregionz = 1\n").unwrap_err();
        assert!(e.to_string().contains("regionz"));
    }

    #[test]
    fn round_trip() {
        let mut s = Scenario::default();
        s.attacks
            .push(AttackSpec::new(crate::attacks::AttackKind::BlackHole, 30, 100, 200));
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn dangling_reference_names_the_field() {
        let mut s = Scenario::default();
        s.attacks
            .push(AttackSpec::new(crate::attacks::AttackKind::BlackHole, 9999, 100, 200));
        let topo = build_topology(&s.topology_config()).unwrap();
        let e = s.check_references(&topo).unwrap_err();
        assert!(e.to_string().contains("attacks[0].attacker"), "{e}");
    }

    #[test]
    fn short_duration_rejected() {
        let s = Scenario {
            duration: 1000,
            ..Scenario::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn frame_slots_divide_the_window() {
        let c = ScheduleConfig::default();
        assert_eq!(c.frame_slots(10), 10);
        assert_eq!(c.frame_slots(7), 10);
        assert_eq!(c.frame_slots(3), 4);
        assert_eq!(c.frame_slots(11), 20);
    }
}
