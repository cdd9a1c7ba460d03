//! Hexagonal-cell, four-tier network layout.
//!
//! Cells are pointy-top hexagons addressed by axial `(q, r)` coordinates and
//! laid out in spiral order from the origin. Consecutive runs of
//! `cells_per_region` cells form a region. Node ids are assigned tier by
//! tier: the base station is `0`, then regional nodes, cluster nodes (one per
//! cell, in spiral order) and finally sensors grouped by cell.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = u32;
pub type CellId = usize;
pub type RegionId = usize;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeRole {
    Sensor,
    ClusterNode,
    RegionalNode,
    BaseStation,
}

impl NodeRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeRole::Sensor => "sensor",
            NodeRole::ClusterNode => "cluster",
            NodeRole::RegionalNode => "regional",
            NodeRole::BaseStation => "base",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HexCell {
    pub axial_q: i32,
    pub axial_r: i32,
    pub center: Point,
    pub radius: f64,
}

/// Center of the pointy-top hexagon `(q, r)` with circumradius `radius`.
pub fn hex_center(q: i32, r: i32, radius: f64) -> Point {
    Point::new(
        radius * SQRT3 * (q as f64 + r as f64 / 2.0),
        radius * 1.5 * r as f64,
    )
}

/// Axial coordinates of the cell containing `p`.
///
/// The hexagon lattice is the Voronoi diagram of the cell centers, so this is
/// the nearest center; points on a shared edge or vertex go to the
/// lexicographically lowest `(q, r)`.
pub fn cell_at(p: Point, radius: f64) -> (i32, i32) {
    let fq = (SQRT3 / 3.0 * p.x - p.y / 3.0) / radius;
    let fr = (2.0 / 3.0 * p.y) / radius;
    let (bq, br) = (fq.round() as i32, fr.round() as i32);
    let mut best: Option<(f64, (i32, i32))> = None;
    for dq in -1..=1 {
        for dr in -1..=1 {
            let c = (bq + dq, br + dr);
            let d = hex_center(c.0, c.1, radius).distance(&p);
            best = match best {
                None => Some((d, c)),
                Some((bd, bc)) => {
                    if d < bd - TIE_EPS || ((d - bd).abs() <= TIE_EPS && c < bc) {
                        Some((d, c))
                    } else {
                        Some((bd, bc))
                    }
                }
            };
        }
    }
    best.map(|(_, c)| c).unwrap_or((bq, br))
}

fn hex_distance(a: (i32, i32), b: (i32, i32)) -> i32 {
    let dq = a.0 - b.0;
    let dr = a.1 - b.1;
    (dq.abs() + dr.abs() + (dq + dr).abs()) / 2
}

/// The first `n` axial coordinates of a spiral walk starting at the origin.
pub fn spiral(n: usize) -> Vec<(i32, i32)> {
    const DIRS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push((0, 0));
    let mut ring = 1;
    while out.len() < n {
        let mut cur = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        for dir in DIRS {
            for _ in 0..ring {
                if out.len() == n {
                    return out;
                }
                out.push(cur);
                cur = (cur.0 + dir.0, cur.1 + dir.1);
            }
        }
        ring += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub cells_per_region: usize,
    pub regions: usize,
    pub sensors_per_cell: usize,
    /// Hexagon circumradius in meters.
    pub cell_radius: f64,
    /// Disk-model radio range for sensor and cluster links, meters.
    pub radio_range: f64,
    pub rng_seed: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            cells_per_region: 7,
            regions: 1,
            sensors_per_cell: 10,
            cell_radius: 40.0,
            radio_range: 30.0,
            rng_seed: 1,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells_per_region == 0 || self.regions == 0 || self.sensors_per_cell == 0 {
            return Err(Error::InvalidConfig(
                "topology counts must be at least 1".into(),
            ));
        }
        if !(self.cell_radius > 0.0) || !self.cell_radius.is_finite() {
            return Err(Error::InvalidConfig("cell_radius must be positive".into()));
        }
        if !(self.radio_range > 0.0) || !self.radio_range.is_finite() {
            return Err(Error::InvalidConfig("radio_range must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub id: NodeId,
    pub role: NodeRole,
    pub pos: Point,
    pub cell: Option<CellId>,
    pub region: Option<RegionId>,
}

/// Disk-model connectivity graph with relay eligibility.
///
/// Nodes that are not relay-eligible may only appear as the first or last hop
/// of a route.
#[derive(Debug, Clone)]
pub struct RadioGraph {
    range: f64,
    positions: BTreeMap<NodeId, Point>,
    relay: BTreeSet<NodeId>,
    adj: BTreeMap<NodeId, Vec<NodeId>>,
}

impl RadioGraph {
    pub fn new(range: f64, nodes: impl IntoIterator<Item = (NodeId, Point, bool)>) -> Self {
        let mut positions = BTreeMap::new();
        let mut relay = BTreeSet::new();
        for (id, p, can_relay) in nodes {
            positions.insert(id, p);
            if can_relay {
                relay.insert(id);
            }
        }
        let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let ids: Vec<NodeId> = positions.keys().copied().collect();
        for &a in &ids {
            let pa = positions[&a];
            let list = ids
                .iter()
                .copied()
                .filter(|&b| b != a && pa.distance(&positions[&b]) <= range)
                .collect();
            adj.insert(a, list);
        }
        Self {
            range,
            positions,
            relay,
            adj,
        }
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.positions.contains_key(&id)
    }

    pub fn position(&self, id: NodeId) -> Option<Point> {
        self.positions.get(&id).copied()
    }

    /// Neighbors within range, ascending id.
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        self.adj.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        match (self.positions.get(&a), self.positions.get(&b)) {
            (Some(pa), Some(pb)) => pa.distance(pb) <= self.range,
            _ => false,
        }
    }

    pub fn can_relay(&self, id: NodeId) -> bool {
        self.relay.contains(&id)
    }

    /// Minimum-hop route from `src` to `dst`, lexicographically smallest among
    /// equal-hop routes. Nodes in `excluded` are never used as relays.
    pub fn route(
        &self,
        src: NodeId,
        dst: NodeId,
        excluded: &BTreeSet<NodeId>,
    ) -> Result<Vec<NodeId>> {
        if !self.contains(src) || !self.contains(dst) {
            return Err(Error::Unreachable { src, dst });
        }
        if src == dst {
            return Ok(vec![src]);
        }
        let usable = |v: NodeId| v == dst || (self.relay.contains(&v) && !excluded.contains(&v));
        // hop distance to dst, expanding only through usable relays
        let mut dist: BTreeMap<NodeId, u32> = BTreeMap::new();
        let mut queue = VecDeque::new();
        dist.insert(dst, 0);
        queue.push_back(dst);
        while let Some(u) = queue.pop_front() {
            if u == src || !usable(u) {
                continue;
            }
            let du = dist[&u];
            for &v in self.neighbors(u) {
                if !dist.contains_key(&v) {
                    dist.insert(v, du + 1);
                    queue.push_back(v);
                }
            }
        }
        let Some(&total) = dist.get(&src) else {
            return Err(Error::Unreachable { src, dst });
        };
        let mut path = Vec::with_capacity(total as usize + 1);
        path.push(src);
        let mut cur = src;
        let mut d = total;
        while cur != dst {
            let next = self
                .neighbors(cur)
                .iter()
                .copied()
                .find(|&v| dist.get(&v) == Some(&(d - 1)) && usable(v))
                .ok_or(Error::Unreachable { src, dst })?;
            path.push(next);
            cur = next;
            d -= 1;
        }
        Ok(path)
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    cfg: TopologyConfig,
    nodes: Vec<NodeInfo>,
    cells: Vec<HexCell>,
    cell_cluster: Vec<NodeId>,
    cell_sensors: Vec<Vec<NodeId>>,
    region_nodes: Vec<NodeId>,
    region_cells: Vec<Vec<CellId>>,
    cluster_of: BTreeMap<NodeId, NodeId>,
    region_of: BTreeMap<NodeId, NodeId>,
    neighbor_clusters: BTreeMap<NodeId, Vec<NodeId>>,
    neighbor_regions: BTreeMap<NodeId, Vec<NodeId>>,
    graph: RadioGraph,
}

/// Builds the four-tier topology. Deterministic for a given `rng_seed`.
pub fn build_topology(cfg: &TopologyConfig) -> Result<Topology> {
    cfg.validate()?;
    let n_cells = cfg.cells_per_region * cfg.regions;
    let coords = spiral(n_cells);
    let cells: Vec<HexCell> = coords
        .iter()
        .map(|&(q, r)| HexCell {
            axial_q: q,
            axial_r: r,
            center: hex_center(q, r, cfg.cell_radius),
            radius: cfg.cell_radius,
        })
        .collect();
    let region_cells: Vec<Vec<CellId>> = (0..cfg.regions)
        .map(|g| (g * cfg.cells_per_region..(g + 1) * cfg.cells_per_region).collect())
        .collect();

    let mut nodes = Vec::new();
    let base: NodeId = 0;
    let centroid = |pts: &mut dyn Iterator<Item = Point>| {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for p in pts {
            sx += p.x;
            sy += p.y;
            n += 1.0;
        }
        Point::new(sx / n, sy / n)
    };
    nodes.push(NodeInfo {
        id: base,
        role: NodeRole::BaseStation,
        pos: centroid(&mut cells.iter().map(|c| c.center)),
        cell: None,
        region: None,
    });
    let mut region_nodes = Vec::with_capacity(cfg.regions);
    for (g, rc) in region_cells.iter().enumerate() {
        let id = nodes.len() as NodeId;
        region_nodes.push(id);
        nodes.push(NodeInfo {
            id,
            role: NodeRole::RegionalNode,
            pos: centroid(&mut rc.iter().map(|&c| cells[c].center)),
            cell: None,
            region: Some(g),
        });
    }
    let region_of_cell = |c: CellId| c / cfg.cells_per_region;
    let mut cell_cluster = Vec::with_capacity(n_cells);
    let mut region_of = BTreeMap::new();
    for (c, cell) in cells.iter().enumerate() {
        let id = nodes.len() as NodeId;
        cell_cluster.push(id);
        region_of.insert(id, region_nodes[region_of_cell(c)]);
        nodes.push(NodeInfo {
            id,
            role: NodeRole::ClusterNode,
            pos: cell.center,
            cell: Some(c),
            region: Some(region_of_cell(c)),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut cell_sensors = vec![Vec::new(); n_cells];
    let mut cluster_of = BTreeMap::new();
    let half_w = cfg.cell_radius * SQRT3 / 2.0;
    for (c, cell) in cells.iter().enumerate() {
        for _ in 0..cfg.sensors_per_cell {
            let pos = loop {
                let p = Point::new(
                    cell.center.x + rng.gen_range(-half_w..=half_w),
                    cell.center.y + rng.gen_range(-cfg.cell_radius..=cfg.cell_radius),
                );
                if cell_at(p, cfg.cell_radius) == (cell.axial_q, cell.axial_r) {
                    break p;
                }
            };
            let id = nodes.len() as NodeId;
            cell_sensors[c].push(id);
            cluster_of.insert(id, cell_cluster[c]);
            nodes.push(NodeInfo {
                id,
                role: NodeRole::Sensor,
                pos,
                cell: Some(c),
                region: Some(region_of_cell(c)),
            });
        }
    }

    let mut neighbor_clusters = BTreeMap::new();
    for (a, ca) in coords.iter().enumerate() {
        let list: Vec<NodeId> = coords
            .iter()
            .enumerate()
            .filter(|&(b, cb)| b != a && hex_distance(*ca, *cb) == 1)
            .map(|(b, _)| cell_cluster[b])
            .collect();
        neighbor_clusters.insert(cell_cluster[a], list);
    }
    let mut neighbor_regions = BTreeMap::new();
    for (g, rc) in region_cells.iter().enumerate() {
        let mut set = BTreeSet::new();
        for &c in rc {
            for &nb in &neighbor_clusters[&cell_cluster[c]] {
                let other = region_of[&nb];
                if other != region_nodes[g] {
                    set.insert(other);
                }
            }
        }
        neighbor_regions.insert(region_nodes[g], set.into_iter().collect());
    }

    let graph = RadioGraph::new(
        cfg.radio_range,
        nodes
            .iter()
            .filter(|n| matches!(n.role, NodeRole::Sensor | NodeRole::ClusterNode))
            .map(|n| (n.id, n.pos, n.role == NodeRole::Sensor)),
    );

    Ok(Topology {
        cfg: cfg.clone(),
        nodes,
        cells,
        cell_cluster,
        cell_sensors,
        region_nodes,
        region_cells,
        cluster_of,
        region_of,
        neighbor_clusters,
        neighbor_regions,
        graph,
    })
}

impl Topology {
    pub fn config(&self) -> &TopologyConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeInfo> {
        self.nodes.get(id as usize).ok_or(Error::UnknownNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        (id as usize) < self.nodes.len()
    }

    pub fn role(&self, id: NodeId) -> Option<NodeRole> {
        self.nodes.get(id as usize).map(|n| n.role)
    }

    pub fn position(&self, id: NodeId) -> Option<Point> {
        self.nodes.get(id as usize).map(|n| n.pos)
    }

    pub fn base_station(&self) -> NodeId {
        0
    }

    pub fn cells(&self) -> &[HexCell] {
        &self.cells
    }

    pub fn cluster_of_cell(&self, cell: CellId) -> NodeId {
        self.cell_cluster[cell]
    }

    pub fn cell_of(&self, id: NodeId) -> Option<CellId> {
        self.nodes.get(id as usize).and_then(|n| n.cell)
    }

    pub fn sensors_in_cell(&self, cell: CellId) -> &[NodeId] {
        &self.cell_sensors[cell]
    }

    pub fn sensors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.role == NodeRole::Sensor)
            .map(|n| n.id)
    }

    pub fn clusters(&self) -> &[NodeId] {
        &self.cell_cluster
    }

    pub fn regionals(&self) -> &[NodeId] {
        &self.region_nodes
    }

    pub fn cells_of_region(&self, regional: NodeId) -> &[CellId] {
        let g = self
            .region_nodes
            .iter()
            .position(|&r| r == regional)
            .unwrap_or(usize::MAX);
        self.region_cells.get(g).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Cluster node responsible for a sensor at deployment time.
    pub fn cluster_of(&self, sensor: NodeId) -> Option<NodeId> {
        self.cluster_of.get(&sensor).copied()
    }

    /// Regional node responsible for a cluster node at deployment time.
    pub fn region_of(&self, cluster: NodeId) -> Option<NodeId> {
        self.region_of.get(&cluster).copied()
    }

    pub fn neighbor_clusters(&self, cluster: NodeId) -> &[NodeId] {
        self.neighbor_clusters
            .get(&cluster)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn neighbor_regions(&self, regional: NodeId) -> &[NodeId] {
        self.neighbor_regions
            .get(&regional)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn graph(&self) -> &RadioGraph {
        &self.graph
    }

    /// Nearest alive neighbor of a failed cluster or regional node.
    pub fn neighbor_of(&self, failed: NodeId, alive: impl Fn(NodeId) -> bool) -> Result<NodeId> {
        let candidates = match self.role(failed) {
            Some(NodeRole::ClusterNode) => self.neighbor_clusters(failed),
            Some(NodeRole::RegionalNode) => self.neighbor_regions(failed),
            Some(_) => return Err(Error::NoAliveNeighbor(failed)),
            None => return Err(Error::UnknownNode(failed)),
        };
        let origin = self.nodes[failed as usize].pos;
        candidates
            .iter()
            .copied()
            .filter(|&c| alive(c))
            .map(|c| (self.nodes[c as usize].pos.distance(&origin), c))
            .min_by(|a, b| {
                if (a.0 - b.0).abs() <= TIE_EPS {
                    a.1.cmp(&b.1)
                } else {
                    a.0.total_cmp(&b.0)
                }
            })
            .map(|(_, c)| c)
            .ok_or(Error::NoAliveNeighbor(failed))
    }

    pub fn expected_route(&self, src: NodeId, dst: NodeId) -> Result<Vec<NodeId>> {
        self.graph.route(src, dst, &BTreeSet::new())
    }

    pub fn expected_route_avoiding(
        &self,
        src: NodeId,
        dst: NodeId,
        excluded: &BTreeSet<NodeId>,
    ) -> Result<Vec<NodeId>> {
        self.graph.route(src, dst, excluded)
    }

    /// One node per line: `id role x y cell region`.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.nodes {
            let cell = n.cell.map_or("-".to_string(), |c| c.to_string());
            let region = n.region.map_or("-".to_string(), |r| r.to_string());
            writeln!(
                f,
                "{} {} {:.3} {:.3} {} {}",
                n.id,
                n.role.as_str(),
                n.pos.x,
                n.pos.y,
                cell,
                region
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(regions: usize, cells: usize, sensors: usize) -> TopologyConfig {
        TopologyConfig {
            regions,
            cells_per_region: cells,
            sensors_per_cell: sensors,
            ..TopologyConfig::default()
        }
    }

    #[test]
    fn minimal_chain_has_four_nodes() {
        let t = build_topology(&cfg(1, 1, 1)).unwrap();
        assert_eq!(t.nodes().len(), 4);
        let roles: Vec<_> = t.nodes().iter().map(|n| n.role).collect();
        assert_eq!(
            roles,
            vec![
                NodeRole::BaseStation,
                NodeRole::RegionalNode,
                NodeRole::ClusterNode,
                NodeRole::Sensor
            ]
        );
    }

    #[test]
    fn counts_add_up() {
        let t = build_topology(&cfg(2, 3, 5)).unwrap();
        let count = |r| t.nodes().iter().filter(|n| n.role == r).count();
        assert_eq!(count(NodeRole::Sensor), 30);
        assert_eq!(count(NodeRole::ClusterNode), 6);
        assert_eq!(count(NodeRole::RegionalNode), 2);
        assert_eq!(count(NodeRole::BaseStation), 1);
    }

    #[test]
    fn same_seed_same_positions() {
        let a = build_topology(&cfg(2, 7, 10)).unwrap();
        let b = build_topology(&cfg(2, 7, 10)).unwrap();
        assert_eq!(a.dump(), b.dump());
        let mut c2 = cfg(2, 7, 10);
        c2.rng_seed = 99;
        assert_ne!(a.dump(), build_topology(&c2).unwrap().dump());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(build_topology(&cfg(0, 1, 1)).is_err());
        assert!(build_topology(&cfg(1, 0, 1)).is_err());
        assert!(build_topology(&cfg(1, 1, 0)).is_err());
        let mut c = cfg(1, 1, 1);
        c.cell_radius = 0.0;
        assert!(build_topology(&c).is_err());
    }

    #[test]
    fn sensors_lie_in_their_cell_and_clusters_at_center() {
        let t = build_topology(&cfg(2, 7, 10)).unwrap();
        for s in t.sensors() {
            let n = t.node(s).unwrap();
            let cell = &t.cells()[n.cell.unwrap()];
            assert_eq!(
                cell_at(n.pos, cell.radius),
                (cell.axial_q, cell.axial_r)
            );
            let cl = t.cluster_of(s).unwrap();
            assert_eq!(t.position(cl).unwrap(), cell.center);
            let rg = t.region_of(cl).unwrap();
            assert_eq!(t.role(rg), Some(NodeRole::RegionalNode));
        }
    }

    #[test]
    fn boundary_tie_goes_to_lowest_axial() {
        // midpoint of the shared edge between (0,0) and (1,0)
        let a = hex_center(0, 0, 10.0);
        let b = hex_center(1, 0, 10.0);
        let mid = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
        assert_eq!(cell_at(mid, 10.0), (0, 0));
    }

    #[test]
    fn neighbor_relations_are_symmetric() {
        let t = build_topology(&cfg(2, 7, 1)).unwrap();
        for &c in t.clusters() {
            for &n in t.neighbor_clusters(c) {
                assert!(t.neighbor_clusters(n).contains(&c));
            }
        }
        for &r in t.regionals() {
            for &n in t.neighbor_regions(r) {
                assert!(t.neighbor_regions(n).contains(&r));
            }
        }
    }

    #[test]
    fn neighbor_of_single_cluster_has_none() {
        let t = build_topology(&cfg(1, 1, 1)).unwrap();
        let c = t.clusters()[0];
        assert_eq!(t.neighbor_of(c, |_| true), Err(Error::NoAliveNeighbor(c)));
    }

    #[test]
    fn neighbor_of_flower_center_is_lowest_id_ring_cell() {
        // 7-cell flower: center cell (0,0) is cluster id 2; the ring cells are
        // at distance sqrt(3)*R from it, all equal, so the lowest id wins.
        let t = build_topology(&cfg(1, 7, 1)).unwrap();
        let center = t.clusters()[0];
        assert_eq!(t.cells()[0].center, Point::new(0.0, 0.0));
        let ring: Vec<NodeId> = t.clusters()[1..].to_vec();
        let r = t.config().cell_radius;
        for &c in &ring {
            let d = t.position(c).unwrap().distance(&Point::new(0.0, 0.0));
            assert!((d - SQRT3 * r).abs() < 1e-9);
        }
        let got = t.neighbor_of(center, |_| true).unwrap();
        assert_eq!(got, *ring.iter().min().unwrap());
        // and with that one dead, the next lowest
        let got2 = t.neighbor_of(center, |c| c != got).unwrap();
        assert_eq!(got2, got + 1);
    }

    #[test]
    fn neighbor_of_region_pair() {
        let t = build_topology(&cfg(2, 7, 1)).unwrap();
        let (a, b) = (t.regionals()[0], t.regionals()[1]);
        assert_eq!(t.neighbor_of(a, |_| true), Ok(b));
        assert_eq!(t.neighbor_of(b, |_| true), Ok(a));
        assert_eq!(t.neighbor_of(a, |n| n != b), Err(Error::NoAliveNeighbor(a)));
    }

    #[test]
    fn expected_route_trivial_cases() {
        let g = RadioGraph::new(
            10.0,
            [
                (1, Point::new(0.0, 0.0), true),
                (2, Point::new(5.0, 0.0), true),
                (3, Point::new(50.0, 0.0), true),
            ],
        );
        let none = BTreeSet::new();
        assert_eq!(g.route(1, 1, &none).unwrap(), vec![1]);
        assert_eq!(g.route(1, 2, &none).unwrap(), vec![1, 2]);
        assert_eq!(
            g.route(1, 3, &none),
            Err(Error::Unreachable { src: 1, dst: 3 })
        );
    }

    #[test]
    fn non_relays_are_endpoints_only() {
        // 1 - 2 - 3 in a line, 2 cannot relay
        let g = RadioGraph::new(
            6.0,
            [
                (1, Point::new(0.0, 0.0), true),
                (2, Point::new(5.0, 0.0), false),
                (3, Point::new(10.0, 0.0), true),
            ],
        );
        let none = BTreeSet::new();
        assert!(g.route(1, 3, &none).is_err());
        assert_eq!(g.route(1, 2, &none).unwrap(), vec![1, 2]);
        assert_eq!(g.route(2, 3, &none).unwrap(), vec![2, 3]);
    }

    #[test]
    fn dump_has_one_line_per_node() {
        let t = build_topology(&cfg(1, 2, 3)).unwrap();
        let dump = t.dump();
        assert_eq!(dump.lines().count(), t.nodes().len());
        assert!(dump.lines().next().unwrap().starts_with("0 base "));
    }
}
