//! Comparison planners: a nearest-frontier planner driven by grid shortest
//! paths, and a receding-horizon next-best-view planner whose random tree is
//! sampled over the whole map.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::global_planner::{cluster_representative, frontier_clusters, shortcut};
use crate::path::Path;
use crate::sensor_sim::{visible_unknown, GainModel, SensorConfig};
use crate::voxel_map::{BoundingBox, OccupancyGrid, VoxelState};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierBaselineConfig {
    /// A cluster counts as reached once the robot is this close to its
    /// representative, m.
    pub approach_radius: f64,
    /// Failed attempts on a cluster before it is blacklisted.
    pub max_retries: usize,
    /// Smaller clusters are ignored.
    pub min_cluster_size: usize,
    /// Clusters are split into groups by cubic cells of this size, m.
    pub group_cell: f64,
}

impl Default for FrontierBaselineConfig {
    fn default() -> Self {
        Self {
            approach_radius: 2.0,
            max_retries: 3,
            min_cluster_size: 5,
            group_cell: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbvpBaselineConfig {
    /// Samples drawn per planning iteration.
    pub samples: usize,
    /// Maximum edge length, m.
    pub edge_length: f64,
    pub discount: f64,
    /// Best-branch gain below which an iteration counts as a stall, m^3.
    pub completion_threshold: f64,
    pub gain_model: GainModel,
}

impl Default for NbvpBaselineConfig {
    fn default() -> Self {
        Self {
            samples: 300,
            edge_length: 1.5,
            discount: 0.98,
            completion_threshold: 0.5,
            gain_model: GainModel::Exact,
        }
    }
}

impl FrontierBaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.group_cell > 0.0) || !(self.approach_radius >= 0.0) || self.max_retries == 0 {
            return Err(Error::Config(
                "frontier needs group_cell > 0, approach_radius >= 0 and max_retries >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl NbvpBaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("nbvp.samples must be at least 1".into()));
        }
        if !(self.edge_length > 0.0) || !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config("nbvp needs edge_length > 0 and discount in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Coarse cell a frontier group belongs to.
pub type CellKey = [i64; 3];

/// Retry bookkeeping for frontier groups, keyed by coarse cell.
#[derive(Clone, Debug, Default)]
pub struct FrontierMemory {
    failures: HashMap<CellKey, usize>,
    blacklist: BTreeSet<CellKey>,
    last_target: Option<CellKey>,
}

impl FrontierMemory {
    pub fn is_blacklisted(&self, key: &CellKey) -> bool {
        self.blacklist.contains(key)
    }

    pub fn blacklist_len(&self) -> usize {
        self.blacklist.len()
    }

    /// Records a failed attempt; returns true if the group is now blacklisted.
    pub fn fail(&mut self, key: CellKey, max_retries: usize) -> bool {
        let n = self.failures.entry(key).or_insert(0);
        *n += 1;
        if *n >= max_retries {
            self.blacklist.insert(key);
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Debug)]
pub enum FrontierDecision {
    /// Fly this path towards the cluster with representative `target`.
    Fly { path: Path, target: Vec3, grid_length: f64 },
    /// No cluster was reachable; the nearest one was charged a failure.
    Retry { target: Vec3, blacklisted: bool },
    /// No frontier clusters remain.
    Complete,
}

/// Which voxel centres the robot box fits at, computed on demand.
struct Traversability<'a> {
    map: &'a OccupancyGrid,
    bbox: &'a BoundingBox,
    cache: Vec<u8>,
}

impl<'a> Traversability<'a> {
    fn new(map: &'a OccupancyGrid, bbox: &'a BoundingBox) -> Self {
        Self {
            map,
            bbox,
            cache: vec![0; map.len()],
        }
    }

    fn ok(&mut self, i: usize) -> bool {
        if self.cache[i] == 0 {
            let free = self.map.get_linear(i) == VoxelState::Free
                && self.map.bbox_is_free(&self.map.center_linear(i), self.bbox, true);
            self.cache[i] = if free { 1 } else { 2 };
        }
        self.cache[i] == 1
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over voxel centres where the robot box fits (Unknown counts as
/// an obstacle), 26-connected without corner cutting. Stops at the first
/// settled voxel for which `is_goal` holds and returns the voxel sequence
/// and its length.
pub fn grid_shortest_path<G>(
    map: &OccupancyGrid,
    start: usize,
    bbox: &BoundingBox,
    mut is_goal: G,
) -> Option<(Vec<usize>, f64)>
where
    G: FnMut(usize) -> bool,
{
    let mut trav = Traversability::new(map, bbox);
    if !trav.ok(start) {
        return None;
    }
    let res = map.resolution();
    let mut dist: HashMap<usize, f64> = HashMap::new();
    let mut prev: HashMap<usize, usize> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(start, 0.0);
    heap.push(Entry(0.0, start));
    while let Some(Entry(d, i)) = heap.pop() {
        if d > dist[&i] {
            continue;
        }
        if is_goal(i) {
            let mut seq = vec![i];
            let mut cur = i;
            while let Some(&p) = prev.get(&cur) {
                seq.push(p);
                cur = p;
            }
            seq.reverse();
            return Some((seq, d));
        }
        let idx = map.unlinear(i);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let Some(nb) = map.offset(idx, [dx, dy, dz]) else {
                        continue;
                    };
                    let j = map.linear(nb);
                    if !trav.ok(j) {
                        continue;
                    }
                    if !corners_clear(map, &mut trav, idx, [dx, dy, dz]) {
                        continue;
                    }
                    let step = res * ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    let nd = d + step;
                    if dist.get(&j).map_or(true, |&old| nd < old) {
                        dist.insert(j, nd);
                        prev.insert(j, i);
                        heap.push(Entry(nd, j));
                    }
                }
            }
        }
    }
    None
}

/// A diagonal move is allowed only if every partial step is traversable.
fn corners_clear(map: &OccupancyGrid, trav: &mut Traversability<'_>, idx: [usize; 3], d: [i64; 3]) -> bool {
    let axes = d.iter().filter(|v| **v != 0).count();
    if axes < 2 {
        return true;
    }
    for mask in 1u8..7 {
        let sub = [
            if mask & 1 != 0 { d[0] } else { 0 },
            if mask & 2 != 0 { d[1] } else { 0 },
            if mask & 4 != 0 { d[2] } else { 0 },
        ];
        if sub == d || sub == [0, 0, 0] {
            continue;
        }
        if (0..3).any(|a| d[a] == 0 && sub[a] != 0) {
            continue;
        }
        match map.offset(idx, sub) {
            Some(nb) if trav.ok(map.linear(nb)) => {}
            _ => return false,
        }
    }
    true
}

/// Frontier voxels of clusters with at least `min_cluster_size` members,
/// grouped by coarse cell.
pub fn frontier_groups(map: &OccupancyGrid, config: &FrontierBaselineConfig) -> BTreeMap<CellKey, Vec<usize>> {
    let mut groups: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    for members in frontier_clusters(map) {
        if members.len() < config.min_cluster_size {
            continue;
        }
        for i in members {
            let c = map.center_linear(i);
            let key = [
                (c.x / config.group_cell).floor() as i64,
                (c.y / config.group_cell).floor() as i64,
                (c.z / config.group_cell).floor() as i64,
            ];
            groups.entry(key).or_default().push(i);
        }
    }
    groups
}

/// One decision of the frontier planner: among frontier groups not
/// blacklisted, the one whose approach zone is reached first by the grid
/// search is the target. A target that is still a frontier once the robot
/// has reached it is charged a failure.
pub fn frontier_step(
    map: &OccupancyGrid,
    position: &Vec3,
    config: &FrontierBaselineConfig,
    memory: &mut FrontierMemory,
    bbox: &BoundingBox,
    speed: f64,
) -> Result<FrontierDecision> {
    let mut reps: Vec<(CellKey, Vec3)> = Vec::new();
    let mut any = false;
    for (key, members) in frontier_groups(map, config) {
        if memory.is_blacklisted(&key) {
            continue;
        }
        any = true;
        let p = map.center_linear(cluster_representative(map, &members));
        if (p - position).norm() <= config.approach_radius {
            if memory.last_target == Some(key) {
                memory.fail(key, config.max_retries);
            }
            continue;
        }
        reps.push((key, p));
    }
    memory.last_target = None;
    if !any {
        return Ok(FrontierDecision::Complete);
    }
    if reps.is_empty() {
        // only frontiers next to the robot remain: wait for them to clear
        return Ok(FrontierDecision::Retry { target: *position, blacklisted: false });
    }

    let start = map.voxel_of(position).map(|v| map.linear(v)).ok_or_else(|| Error::out_of_bounds(position))?;
    let r2 = config.approach_radius * config.approach_radius;
    let goal_of = |i: usize| {
        let c = map.center_linear(i);
        reps.iter().position(|(_, p)| (p - c).norm_squared() <= r2)
    };
    let found = grid_shortest_path(map, start, bbox, |i| goal_of(i).is_some());

    match found {
        Some((seq, grid_length)) => {
            let target = goal_of(*seq.last().expect("non-empty")).expect("goal");
            memory.last_target = Some(reps[target].0);
            let mut pts = vec![*position];
            pts.extend(seq.iter().map(|i| map.center_linear(*i)));
            pts.dedup();
            let refined = shortcut(&pts, map, bbox);
            Ok(FrontierDecision::Fly {
                path: Path::from_positions(&refined, speed),
                target: reps[target].1,
                grid_length,
            })
        }
        None => {
            let (key, p) = reps
                .iter()
                .copied()
                .min_by(|a, b| (a.1 - position).norm().total_cmp(&(b.1 - position).norm()))
                .expect("non-empty");
            let blacklisted = memory.fail(key, config.max_retries);
            Ok(FrontierDecision::Retry { target: p, blacklisted })
        }
    }
}

#[derive(Clone, Debug)]
pub struct RrtNode {
    pub parent: Option<usize>,
    pub position: Vec3,
    pub cost: f64,
    pub gain: f64,
}

#[derive(Clone, Debug)]
pub struct NbvpDecision {
    pub nodes: Vec<RrtNode>,
    pub best: usize,
    /// Root plus the first node on the best branch; `None` when the tree
    /// could not grow.
    pub first_edge: Option<[Vec3; 2]>,
}

impl NbvpDecision {
    pub fn best_gain(&self) -> f64 {
        self.nodes[self.best].gain
    }
}

/// Grows a random tree from `position` with samples drawn uniformly over
/// the whole map, and returns the first edge of the branch with the largest
/// accumulated discounted gain.
pub fn nbvp_step<R: Rng>(
    map: &OccupancyGrid,
    position: &Vec3,
    heading: f64,
    sensor: &SensorConfig,
    config: &NbvpBaselineConfig,
    bbox: &BoundingBox,
    rng: &mut R,
) -> NbvpDecision {
    let bounds = map.bounds();
    let half = bbox.half_extents();
    let lo = bounds.min + half;
    let hi = bounds.max - half;
    let vol = map.voxel_volume();
    let mut nodes = vec![RrtNode {
        parent: None,
        position: *position,
        cost: 0.0,
        gain: 0.0,
    }];
    for _ in 0..config.samples {
        let sample = Vec3::new(
            sample_axis(rng, lo.x, hi.x),
            sample_axis(rng, lo.y, hi.y),
            sample_axis(rng, lo.z, hi.z),
        );
        let (near, d) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, (n.position - sample).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("root exists");
        if d < 1e-9 {
            continue;
        }
        let from = nodes[near].position;
        let to = if d > config.edge_length {
            from + (sample - from) * (config.edge_length / d)
        } else {
            sample
        };
        if !map.segment_is_free(&from, &to, bbox, true) {
            continue;
        }
        let cost = nodes[near].cost + (to - from).norm();
        let seen = visible_unknown(map, &to, heading, sensor, config.gain_model).len() as f64 * vol;
        let gain = nodes[near].gain + config.discount.powf(cost) * seen;
        nodes.push(RrtNode {
            parent: Some(near),
            position: to,
            cost,
            gain,
        });
    }
    let mut best = 0;
    for (i, n) in nodes.iter().enumerate() {
        if n.gain > nodes[best].gain {
            best = i;
        }
    }
    let first_edge = (best != 0).then(|| {
        let mut cur = best;
        while let Some(p) = nodes[cur].parent {
            if p == 0 {
                break;
            }
            cur = p;
        }
        [*position, nodes[cur].position]
    });
    NbvpDecision { nodes, best, first_edge }
}

fn sample_axis<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_map::{new_map, Aabb};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bbox() -> BoundingBox {
        BoundingBox::from_dims(0.6, 0.6, 0.6).unwrap()
    }

    /// Free slab `x < free_x`, unknown beyond, open in y/z.
    fn half_known(free_x: f64) -> OccupancyGrid {
        let mut m = new_map(Aabb::new(Vec3::zeros(), Vec3::new(12.0, 4.0, 2.0)), 0.2).unwrap();
        for i in 0..m.len() {
            if m.center_linear(i).x < free_x {
                m.set_linear(i, VoxelState::Free);
            }
        }
        m
    }

    #[test]
    fn frontier_step_marches_to_interface() {
        let m = half_known(8.0);
        let mut mem = FrontierMemory::default();
        let cfg = FrontierBaselineConfig::default();
        let start = m.center(m.voxel_of(&Vec3::new(1.0, 2.0, 1.0)).unwrap());
        match frontier_step(&m, &start, &cfg, &mut mem, &bbox(), 1.0).unwrap() {
            FrontierDecision::Fly { path, target, .. } => {
                assert!((target.x - 7.9).abs() < 1e-9);
                assert!(m.is_path_collision_free(&path.positions(), &bbox(), true));
                let end = path.last().unwrap().position;
                assert!((end - target).norm() <= cfg.approach_radius + 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unreachable_frontier_is_blacklisted() {
        // frontier exists but the robot box cannot move anywhere
        let mut m = half_known(8.0);
        for i in 0..m.len() {
            let c = m.center_linear(i);
            if (c.x - 4.0).abs() < 0.15 {
                m.set_linear(i, VoxelState::Occupied);
            }
        }
        let mut mem = FrontierMemory::default();
        let cfg = FrontierBaselineConfig::default();
        let start = m.center(m.voxel_of(&Vec3::new(1.0, 2.0, 1.0)).unwrap());
        let mut outcomes = Vec::new();
        // two groups beyond the wall, one per 2 m cell in y
        for _ in 0..7 {
            outcomes.push(frontier_step(&m, &start, &cfg, &mut mem, &bbox(), 1.0).unwrap());
        }
        assert!(matches!(outcomes[0], FrontierDecision::Retry { blacklisted: false, .. }));
        assert!(matches!(outcomes[2], FrontierDecision::Retry { blacklisted: true, .. }));
        assert!(matches!(outcomes[5], FrontierDecision::Retry { blacklisted: true, .. }));
        assert!(matches!(outcomes[6], FrontierDecision::Complete));
        assert_eq!(mem.blacklist_len(), 2);
    }

    #[test]
    fn nbvp_deterministic_and_positive() {
        let m = half_known(4.0);
        let sensor = SensorConfig {
            d_max: 5.0,
            map_update_range: 5.0,
            rays_horizontal: 36,
            rays_vertical: 3,
            ..Default::default()
        };
        let cfg = NbvpBaselineConfig {
            samples: 60,
            gain_model: GainModel::Beams,
            ..Default::default()
        };
        let p = Vec3::new(1.1, 2.1, 1.1);
        let a = nbvp_step(&m, &p, 0.0, &sensor, &cfg, &bbox(), &mut ChaCha8Rng::seed_from_u64(3));
        let b = nbvp_step(&m, &p, 0.0, &sensor, &cfg, &bbox(), &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.nodes.len(), b.nodes.len());
        assert!(a.nodes.iter().zip(&b.nodes).all(|(x, y)| x.position == y.position));
        assert!(a.nodes.len() > 1);
        assert!(a.best_gain() > 0.0);
        let [s, e] = a.first_edge.unwrap();
        assert!(m.segment_is_free(&s, &e, &bbox(), true));
    }

    #[test]
    fn nbvp_boxed_in_stalls() {
        let mut m = half_known(4.0);
        for i in 0..m.len() {
            let c = m.center_linear(i);
            if (c - Vec3::new(1.1, 2.1, 1.1)).amax() > 0.45 {
                m.set_linear(i, VoxelState::Occupied);
            }
        }
        let d = nbvp_step(
            &m,
            &Vec3::new(1.1, 2.1, 1.1),
            0.0,
            &SensorConfig::default(),
            &NbvpBaselineConfig::default(),
            &bbox(),
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(d.first_edge.is_none());
    }
}
