//! Local exploration: a breadth-first tree of motion primitives inside a
//! window around the robot, scored by discounted newly-visible unknown
//! volume.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion_primitives::{generate_primitive_commands, propagate, Branching, MotionModel, MotionPrimitive, RobotState};
use crate::path::Path;
use crate::sensor_sim::{visible_unknown, GainModel, SensorConfig};
use crate::voxel_map::{Aabb, BoundingBox, OccupancyGrid};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalPlannerConfig {
    /// Window extents (length, width, height), m, centred on the robot.
    pub window: [f64; 3],
    pub tree_depth: usize,
    pub max_nodes: usize,
    /// Per-metre gain discount in (0, 1].
    pub discount: f64,
    /// Utility penalty per metre of path, m^3/m.
    pub length_weight: f64,
    /// Volume threshold below which the window counts as explored, m^3.
    pub completion_threshold: f64,
    pub headings: usize,
    pub speeds: usize,
    pub vertical_speeds: usize,
    pub gain_model: GainModel,
    /// Children whose endpoint falls in a cell (of this edge length) that
    /// already holds a node are dropped. 0 disables the filter.
    pub dedup_cell: f64,
    /// Primitives of the best path executed before replanning.
    pub execute_primitives: usize,
}

impl Default for LocalPlannerConfig {
    fn default() -> Self {
        Self {
            window: [40.0, 40.0, 8.0],
            tree_depth: 3,
            max_nodes: 2000,
            discount: 0.98,
            length_weight: 0.05,
            completion_threshold: 0.5,
            headings: 9,
            speeds: 2,
            vertical_speeds: 3,
            gain_model: GainModel::Exact,
            dedup_cell: 0.0,
            execute_primitives: 1,
        }
    }
}

impl LocalPlannerConfig {
    pub fn branching(&self) -> Branching {
        Branching {
            headings: self.headings,
            speeds: self.speeds,
            vertical: self.vertical_speeds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("local window extents must be positive".into()));
        }
        if self.tree_depth == 0 || self.max_nodes == 0 {
            return Err(Error::Config("tree_depth and max_nodes must be at least 1".into()));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config("discount must be in (0, 1]".into()));
        }
        if !(self.completion_threshold > 0.0) {
            return Err(Error::Config("completion_threshold must be positive".into()));
        }
        if self.headings == 0 || self.speeds == 0 || self.vertical_speeds == 0 {
            return Err(Error::Config("branching counts must be at least 1".into()));
        }
        if self.execute_primitives == 0 {
            return Err(Error::Config("execute_primitives must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub depth: usize,
    pub state: RobotState,
    /// Primitive from the parent; `None` at the root.
    pub primitive: Option<MotionPrimitive>,
    /// Unknown voxels first seen at this node along its branch.
    pub new_voxels: Vec<usize>,
    /// Cumulative discounted gain of the root-to-node path, m^3.
    pub gain: f64,
    /// Cumulative path length, m.
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct PrimitiveTree {
    pub nodes: Vec<TreeNode>,
}

impl PrimitiveTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids from the root to `node`, inclusive.
    pub fn lineage(&self, node: usize) -> Vec<usize> {
        let mut ids = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            ids.push(p);
            cur = p;
        }
        ids.reverse();
        ids
    }

    /// Concatenated primitive states from the root to `node`; gain
    /// waypoints sit at the primitive endpoints.
    pub fn path_to(&self, node: usize) -> Path {
        let ids = self.lineage(node);
        let mut states = vec![self.nodes[0].state];
        let mut waypoints = Vec::new();
        for id in ids.iter().skip(1) {
            let prim = self.nodes[*id].primitive.as_ref().expect("non-root node has a primitive");
            states.extend(prim.states.iter().skip(1).copied());
            waypoints.push(states.len() - 1);
        }
        Path { states, waypoints }
    }

    pub fn max_gain(&self) -> f64 {
        self.nodes.iter().map(|n| n.gain).fold(0.0, f64::max)
    }

    fn seen_on_branch(&self, node: usize, voxel: usize) -> bool {
        let mut cur = Some(node);
        while let Some(i) = cur {
            if self.nodes[i].new_voxels.binary_search(&voxel).is_ok() {
                return true;
            }
            cur = self.nodes[i].parent;
        }
        false
    }
}

fn cell_key(p: &Vec3, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

/// Grows the primitive tree breadth-first until `tree_depth` levels or
/// `max_nodes` nodes. Children survive only if their whole primitive stays
/// inside the window (clipped to the map) and is collision-free with
/// Unknown treated as an obstacle.
pub fn build_tree(
    map: &OccupancyGrid,
    state: &RobotState,
    model: &MotionModel,
    sensor: &SensorConfig,
    config: &LocalPlannerConfig,
    bbox: &BoundingBox,
) -> Result<PrimitiveTree> {
    if !map.bbox_is_free(&state.position, bbox, true) {
        return Err(Error::RootInCollision);
    }
    let half = Vec3::from(config.window) * 0.5;
    let window = Aabb::from_center(state.position, half)
        .intersection(&map.bounds())
        .unwrap_or_else(|| map.bounds());
    let voxel_volume = map.voxel_volume();
    let branching = config.branching();

    let mut tree = PrimitiveTree {
        nodes: vec![TreeNode {
            parent: None,
            depth: 0,
            state: *state,
            primitive: None,
            new_voxels: Vec::new(),
            gain: 0.0,
            length: 0.0,
        }],
    };
    let mut occupied_cells = HashSet::new();
    if config.dedup_cell > 0.0 {
        occupied_cells.insert(cell_key(&state.position, config.dedup_cell));
    }
    let mut queue = VecDeque::from([0usize]);
    'grow: while let Some(i) = queue.pop_front() {
        if tree.nodes[i].depth >= config.tree_depth {
            continue;
        }
        let parent_state = tree.nodes[i].state;
        for cmd in generate_primitive_commands(&parent_state, model, &branching) {
            if tree.nodes.len() >= config.max_nodes {
                break 'grow;
            }
            let prim = propagate(&parent_state, &cmd, model)?;
            if !prim.positions().all(|p| window.contains(&p)) {
                continue;
            }
            let end = *prim.terminal_state();
            if config.dedup_cell > 0.0 {
                let key = cell_key(&end.position, config.dedup_cell);
                if occupied_cells.contains(&key) {
                    continue;
                }
                let positions: Vec<Vec3> = prim.positions().collect();
                if !map.is_path_collision_free(&positions, bbox, true) {
                    continue;
                }
                occupied_cells.insert(key);
            } else {
                let positions: Vec<Vec3> = prim.positions().collect();
                if !map.is_path_collision_free(&positions, bbox, true) {
                    continue;
                }
            }
            let visible = visible_unknown(map, &end.position, end.heading, sensor, config.gain_model);
            let new_voxels: Vec<usize> = visible.into_iter().filter(|v| !tree.seen_on_branch(i, *v)).collect();
            let parent = &tree.nodes[i];
            let length = parent.length + prim.length;
            let gain = parent.gain + config.discount.powf(length) * new_voxels.len() as f64 * voxel_volume;
            let depth = parent.depth + 1;
            tree.nodes.push(TreeNode {
                parent: Some(i),
                depth,
                state: end,
                primitive: Some(prim),
                new_voxels,
                gain,
                length,
            });
            queue.push_back(tree.nodes.len() - 1);
        }
    }
    Ok(tree)
}

/// Discounted newly-visible unknown volume along `path`, evaluated at its
/// waypoints. A voxel counts once, at the first waypoint that sees it, with
/// weight `discount ^ (arc length to that waypoint)`.
pub fn exploration_gain(map: &OccupancyGrid, path: &Path, sensor: &SensorConfig, config: &LocalPlannerConfig) -> f64 {
    let arc = path.arc_lengths();
    let mut seen = HashSet::new();
    let mut gain = 0.0;
    for &w in &path.waypoints {
        let s = &path.states[w];
        let fresh = visible_unknown(map, &s.position, s.heading, sensor, config.gain_model)
            .into_iter()
            .filter(|v| seen.insert(*v))
            .count();
        gain += config.discount.powf(arc[w]) * fresh as f64 * map.voxel_volume();
    }
    gain
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestPath {
    pub node: usize,
    pub path: Path,
    pub gain: f64,
    pub utility: f64,
    pub length: f64,
    /// Cumulative gain at each node of the path, root first.
    pub node_gains: Vec<f64>,
}

impl BestPath {
    pub fn primitive_count(&self) -> usize {
        self.path.waypoints.len()
    }
}

pub fn utility(node: &TreeNode, config: &LocalPlannerConfig) -> f64 {
    node.gain - config.length_weight * node.length
}

/// Root-to-node path of maximum utility; ties go to the shorter path, then
/// to the lower node id.
pub fn best_path(tree: &PrimitiveTree, config: &LocalPlannerConfig) -> BestPath {
    let mut best = 0usize;
    let mut best_u = utility(&tree.nodes[0], config);
    for (i, n) in tree.nodes.iter().enumerate().skip(1) {
        let u = utility(n, config);
        let b = &tree.nodes[best];
        if u > best_u || (u == best_u && n.length < b.length) {
            best = i;
            best_u = u;
        }
    }
    let node = &tree.nodes[best];
    BestPath {
        node: best,
        path: tree.path_to(best),
        gain: node.gain,
        utility: best_u,
        length: node.length,
        node_gains: tree.lineage(best).iter().map(|i| tree.nodes[*i].gain).collect(),
    }
}

/// True when no branch of the tree reaches the completion volume.
pub fn check_local_completion(tree: &PrimitiveTree, config: &LocalPlannerConfig) -> bool {
    tree.max_gain() < config.completion_threshold
}
