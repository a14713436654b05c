//! Global layer: a roadmap accreted along the flown trajectory, frontier
//! detection, repositioning paths to frontiers, and homing paths.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion_primitives::RobotState;
use crate::path::{point_at, polyline_length, resample, Path};
use crate::sensor_sim::{visible_unknown, GainModel, SensorConfig};
use crate::voxel_map::{BoundingBox, OccupancyGrid, VoxelIndex, VoxelState};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalPlannerConfig {
    /// Distance between roadmap vertices along the flown path, m.
    pub vertex_spacing: f64,
    /// New vertices link to every vertex this close with a free segment, m.
    pub connect_radius: f64,
    /// Distance scale of the frontier selection weight, m.
    pub sigma_d: f64,
    /// Frontier clusters below this gain are ignored, m^3.
    pub completion_threshold: f64,
    /// Search radius for a collision-free standoff point next to a frontier, m.
    pub approach_radius: f64,
    /// How many of the nearest vertices are tried when linking a frontier.
    pub max_frontier_links: usize,
    /// Point spacing of refined paths, m.
    pub resample_spacing: f64,
    pub gain_model: GainModel,
}

impl Default for GlobalPlannerConfig {
    fn default() -> Self {
        Self {
            vertex_spacing: 2.0,
            connect_radius: 5.0,
            sigma_d: 50.0,
            completion_threshold: 0.5,
            approach_radius: 2.0,
            max_frontier_links: 12,
            resample_spacing: 0.2,
            gain_model: GainModel::Exact,
        }
    }
}

impl GlobalPlannerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("vertex_spacing", self.vertex_spacing),
            ("connect_radius", self.connect_radius),
            ("sigma_d", self.sigma_d),
            ("completion_threshold", self.completion_threshold),
            ("resample_spacing", self.resample_spacing),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("global.{name} must be positive")));
            }
        }
        if !(self.approach_radius >= 0.0) {
            return Err(Error::Config("global.approach_radius must be non-negative".into()));
        }
        Ok(())
    }
}

/// Endurance accounting, all in seconds of simulated flight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MissionBudget {
    pub total_endurance: f64,
    pub elapsed: f64,
    /// Multiplier on the homing time, >= 1.
    pub homing_margin: f64,
    /// Speed used to fly global paths, m/s.
    pub nominal_speed: f64,
}

impl MissionBudget {
    pub fn new(total_endurance: f64, homing_margin: f64, nominal_speed: f64) -> Result<Self> {
        if !(total_endurance >= 0.0) || !(homing_margin >= 1.0) || !(nominal_speed > 0.0) {
            return Err(Error::Config(
                "budget needs total_endurance >= 0, homing_margin >= 1, nominal_speed > 0".into(),
            ));
        }
        Ok(Self {
            total_endurance,
            elapsed: 0.0,
            homing_margin,
            nominal_speed,
        })
    }

    pub fn remaining(&self) -> f64 {
        (self.total_endurance - self.elapsed).max(0.0)
    }

    /// Whether, after spending `lookahead` more seconds, the margin-scaled
    /// homing time would no longer fit in the budget.
    pub fn homing_due(&self, time_to_home: f64, lookahead: f64) -> bool {
        self.elapsed + lookahead + self.homing_margin * time_to_home >= self.total_endurance
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Visited,
    Frontier,
}

impl VertexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexKind::Visited => "visited",
            VertexKind::Frontier => "frontier",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub position: Vec3,
    pub kind: VertexKind,
    /// Estimated gain for frontier vertices.
    pub gain: f64,
    pub alive: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    /// Polyline from `a` to `b`, both ends included.
    pub polyline: Vec<Vec3>,
    pub alive: bool,
}

#[derive(Clone, Debug)]
pub struct GlobalGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
    home: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path distances and predecessor edges.
pub struct ShortestPaths {
    pub dist: Vec<f64>,
    pub prev_edge: Vec<Option<usize>>,
}

impl GlobalGraph {
    pub fn new(home: Vec3) -> Self {
        Self {
            vertices: vec![Vertex {
                position: home,
                kind: VertexKind::Visited,
                gain: 0.0,
                alive: true,
            }],
            edges: Vec::new(),
            adjacency: vec![Vec::new()],
            home: 0,
        }
    }

    pub fn home(&self) -> usize {
        self.home
    }

    pub fn home_position(&self) -> Vec3 {
        self.vertices[self.home].position
    }

    pub fn add_vertex(&mut self, position: Vec3, kind: VertexKind, gain: f64) -> usize {
        self.vertices.push(Vertex {
            position,
            kind,
            gain,
            alive: true,
        });
        self.adjacency.push(Vec::new());
        self.vertices.len() - 1
    }

    /// Adds an edge along `polyline`, which must run from `a` to `b`.
    pub fn add_edge(&mut self, a: usize, b: usize, polyline: Vec<Vec3>) -> usize {
        let length = polyline_length(&polyline);
        self.edges.push(Edge {
            a,
            b,
            length,
            polyline,
            alive: true,
        });
        let id = self.edges.len() - 1;
        self.adjacency[a].push(id);
        self.adjacency[b].push(id);
        id
    }

    pub fn add_straight_edge(&mut self, a: usize, b: usize) -> usize {
        let poly = vec![self.vertices[a].position, self.vertices[b].position];
        self.add_edge(a, b, poly)
    }

    pub fn remove_edge(&mut self, e: usize) {
        self.edges[e].alive = false;
    }

    pub fn remove_vertex(&mut self, v: usize) {
        self.vertices[v].alive = false;
        for e in self.adjacency[v].clone() {
            self.edges[e].alive = false;
        }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].iter().any(|e| {
            let e = &self.edges[*e];
            e.alive && ((e.a == a && e.b == b) || (e.a == b && e.b == a))
        })
    }

    pub fn alive_vertices(&self) -> impl Iterator<Item = (usize, &Vertex)> {
        self.vertices.iter().enumerate().filter(|(_, v)| v.alive)
    }

    pub fn alive_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.alive)
    }

    pub fn vertex_count(&self) -> usize {
        self.alive_vertices().count()
    }

    pub fn edge_count(&self) -> usize {
        self.alive_edges().count()
    }

    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let edge = &self.edges[e];
        if edge.a == v {
            edge.b
        } else {
            edge.a
        }
    }

    /// Edge polyline oriented to start at `from`.
    pub fn edge_polyline_from(&self, e: usize, from: usize) -> Vec<Vec3> {
        let edge = &self.edges[e];
        let mut pts = edge.polyline.clone();
        if edge.a != from {
            pts.reverse();
        }
        pts
    }

    /// Alive visited vertices sorted by distance to `p` (ties by id).
    pub fn visited_by_distance(&self, p: &Vec3) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .alive_vertices()
            .filter(|(_, v)| v.kind == VertexKind::Visited)
            .map(|(i, v)| (i, (v.position - p).norm()))
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        v
    }

    pub fn dijkstra(&self, source: usize) -> ShortestPaths {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev_edge = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry(0.0, source));
        while let Some(HeapEntry(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &e in &self.adjacency[v] {
                let edge = &self.edges[e];
                if !edge.alive {
                    continue;
                }
                let u = self.other_end(e, v);
                if !self.vertices[u].alive {
                    continue;
                }
                let nd = d + edge.length;
                if nd < dist[u] {
                    dist[u] = nd;
                    prev_edge[u] = Some(e);
                    heap.push(HeapEntry(nd, u));
                }
            }
        }
        ShortestPaths { dist, prev_edge }
    }

    /// Edge ids from the Dijkstra source to `target`, in travel order.
    pub fn extract_edges(&self, sp: &ShortestPaths, target: usize) -> Option<Vec<usize>> {
        if !sp.dist[target].is_finite() {
            return None;
        }
        let mut edges = Vec::new();
        let mut cur = target;
        while let Some(e) = sp.prev_edge[cur] {
            edges.push(e);
            cur = self.other_end(e, cur);
        }
        edges.reverse();
        Some(edges)
    }

    /// Polyline through the given edges starting at `source`.
    pub fn edges_polyline(&self, source: usize, edges: &[usize]) -> Vec<Vec3> {
        let mut pts = vec![self.vertices[source].position];
        let mut cur = source;
        for &e in edges {
            let seg = self.edge_polyline_from(e, cur);
            pts.extend(seg.into_iter().skip(1));
            cur = self.other_end(e, cur);
        }
        pts
    }

    pub fn is_connected(&self) -> bool {
        let sp = self.dijkstra(self.home);
        self.alive_vertices().all(|(i, _)| sp.dist[i].is_finite())
    }

    /// `v <id> <x> <y> <z> <kind>` and `e <id1> <id2> <length>` lines.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, v) in self.alive_vertices() {
            writeln!(w, "v {} {} {} {} {}", i, v.position.x, v.position.y, v.position.z, v.kind.as_str())?;
        }
        for (_, e) in self.alive_edges() {
            writeln!(w, "e {} {} {}", e.a, e.b, e.length)?;
        }
        Ok(())
    }
}

/// Adds roadmap vertices every `vertex_spacing` metres along the flown path
/// (and at its end), skipping points within half a spacing of an existing
/// vertex, and links each new vertex to nearby vertices by free segments.
/// Consecutive vertices are always chained, along the flown path if the
/// straight segment is blocked, so the graph stays connected.
pub fn update_graph(
    graph: &mut GlobalGraph,
    executed: &Path,
    map: &OccupancyGrid,
    config: &GlobalPlannerConfig,
    bbox: &BoundingBox,
) {
    let pts = executed.positions();
    if pts.is_empty() {
        return;
    }
    let total = polyline_length(&pts);
    let mut stations = Vec::new();
    let mut s = 0.0;
    while s <= total + 1e-9 {
        stations.push(s.min(total));
        s += config.vertex_spacing;
    }
    if total - stations.last().copied().unwrap_or(0.0) > 1e-9 {
        stations.push(total);
    }

    let mut prev: Option<(usize, f64)> = None;
    for s in stations {
        let p = point_at(&pts, s);
        let existing = graph
            .visited_by_distance(&p)
            .into_iter()
            .next()
            .filter(|(v, d)| {
                *d <= config.vertex_spacing * 0.5
                    && (*d == 0.0 || map.segment_is_free(&graph.vertices[*v].position, &p, bbox, true))
            });
        let v = match existing {
            Some((v, _)) => v,
            None => {
                let v = graph.add_vertex(p, VertexKind::Visited, 0.0);
                let near: Vec<usize> = graph
                    .visited_by_distance(&p)
                    .into_iter()
                    .filter(|(u, d)| *u != v && *d <= config.connect_radius)
                    .map(|(u, _)| u)
                    .collect();
                for u in near {
                    if map.segment_is_free(&graph.vertices[u].position, &p, bbox, true) {
                        graph.add_straight_edge(u, v);
                    }
                }
                v
            }
        };
        if let Some((pv, ps)) = prev {
            if pv != v && !graph.has_edge(pv, v) {
                let a = graph.vertices[pv].position;
                let b = graph.vertices[v].position;
                if map.segment_is_free(&a, &b, bbox, true) {
                    graph.add_straight_edge(pv, v);
                } else {
                    let mut poly = vec![a];
                    poly.extend(sub_polyline(&pts, ps, s));
                    poly.push(b);
                    poly.dedup();
                    graph.add_edge(pv, v, poly);
                }
            }
        }
        prev = Some((v, s));
    }
}

/// Points of the polyline between arc lengths `s0` and `s1`, inclusive of
/// the interpolated ends.
fn sub_polyline(pts: &[Vec3], s0: f64, s1: f64) -> Vec<Vec3> {
    let mut out = vec![point_at(pts, s0)];
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += (w[1] - w[0]).norm();
        if acc > s0 && acc < s1 {
            out.push(w[1]);
        }
    }
    out.push(point_at(pts, s1));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frontier {
    /// Cluster member closest to the cluster centroid.
    pub voxel: VoxelIndex,
    pub position: Vec3,
    /// Collision-free standoff point the robot flies to.
    pub approach: Vec3,
    pub cluster_size: usize,
    /// Unknown volume visible from the representative, m^3.
    pub gain: f64,
    pub vertex: usize,
}

/// Free voxels with at least one face-adjacent Unknown voxel, grouped by
/// 26-connectivity. Clusters are ordered by their lowest linear index and
/// members are sorted.
pub fn frontier_clusters(map: &OccupancyGrid) -> Vec<Vec<usize>> {
    let n = map.len();
    let mut is_frontier = vec![false; n];
    for (i, flag) in is_frontier.iter_mut().enumerate() {
        if map.get_linear(i) != VoxelState::Free {
            continue;
        }
        let idx = map.unlinear(i);
        *flag = map.face_neighbors(idx).any(|nb| map.get(nb) == VoxelState::Unknown);
    }
    let mut visited = vec![false; n];
    let mut clusters = Vec::new();
    for start in 0..n {
        if !is_frontier[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let idx = map.unlinear(i);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        if let Some(nb) = map.offset(idx, [dx, dy, dz]) {
                            let j = map.linear(nb);
                            if is_frontier[j] && !visited[j] {
                                visited[j] = true;
                                members.push(j);
                                queue.push_back(j);
                            }
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

/// Member voxel nearest to the cluster centroid (ties: lowest index).
pub fn cluster_representative(map: &OccupancyGrid, members: &[usize]) -> usize {
    let centroid = members.iter().map(|i| map.center_linear(*i)).sum::<Vec3>() / members.len() as f64;
    let mut best = members[0];
    let mut best_d = f64::INFINITY;
    for &i in members {
        let d = (map.center_linear(i) - centroid).norm_squared();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Nearest free voxel centre within `radius` of `p` where the robot box fits.
pub fn find_standoff(map: &OccupancyGrid, p: &Vec3, radius: f64, bbox: &BoundingBox) -> Option<Vec3> {
    if map.bbox_is_free(p, bbox, true) {
        return Some(*p);
    }
    let res = map.resolution();
    let r = (radius / res).ceil() as i64;
    let center = map.voxel_of(p)?;
    let mut candidates = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if let Some(nb) = map.offset(center, [dx, dy, dz]) {
                    if map.get(nb) != VoxelState::Free {
                        continue;
                    }
                    let c = map.center(nb);
                    let d = (c - p).norm();
                    if d <= radius {
                        candidates.push((d, map.linear(nb), c));
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates
        .into_iter()
        .find(|(_, _, c)| map.bbox_is_free(c, bbox, true))
        .map(|(_, _, c)| c)
}

/// Detects frontier clusters, keeps those whose visible unknown volume
/// reaches the completion threshold and that can be linked to the roadmap,
/// and inserts them as frontier vertices (replacing earlier ones).
pub fn detect_frontiers(
    map: &OccupancyGrid,
    graph: &mut GlobalGraph,
    sensor: &SensorConfig,
    config: &GlobalPlannerConfig,
    bbox: &BoundingBox,
) -> Vec<Frontier> {
    let stale: Vec<usize> = graph
        .alive_vertices()
        .filter(|(_, v)| v.kind == VertexKind::Frontier)
        .map(|(i, _)| i)
        .collect();
    for v in stale {
        graph.remove_vertex(v);
    }
    let mut out = Vec::new();
    for members in frontier_clusters(map) {
        let rep = cluster_representative(map, &members);
        let position = map.center_linear(rep);
        let gain = visible_unknown(map, &position, 0.0, sensor, config.gain_model).len() as f64 * map.voxel_volume();
        if gain < config.completion_threshold {
            continue;
        }
        let Some(approach) = find_standoff(map, &position, config.approach_radius, bbox) else {
            continue;
        };
        let link = graph
            .visited_by_distance(&approach)
            .into_iter()
            .take(config.max_frontier_links)
            .find(|(v, _)| map.segment_is_free(&graph.vertices[*v].position, &approach, bbox, true));
        let Some((anchor, _)) = link else {
            continue;
        };
        let vertex = graph.add_vertex(approach, VertexKind::Frontier, gain);
        graph.add_straight_edge(anchor, vertex);
        out.push(Frontier {
            voxel: map.unlinear(rep),
            position,
            approach,
            cluster_size: members.len(),
            gain,
            vertex,
        });
    }
    out
}

pub fn check_global_completion(frontiers: &[Frontier]) -> bool {
    frontiers.is_empty()
}

/// Greedy shortcutting: from each kept point jump to the farthest later
/// point reachable by a free straight segment. Never lengthens the path.
pub fn shortcut(points: &[Vec3], map: &OccupancyGrid, bbox: &BoundingBox) -> Vec<Vec3> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i + 1 < points.len() {
        let mut j = points.len() - 1;
        while j > i + 1 && !map.segment_is_free(&points[i], &points[j], bbox, true) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}

#[derive(Clone, Debug)]
pub struct GlobalPlan {
    pub path: Path,
    /// Length of the unrefined graph route, m.
    pub raw_length: f64,
    pub target_vertex: usize,
}

/// Nearest vertex reachable from `p` by a free straight segment.
fn attach(graph: &GlobalGraph, p: &Vec3, map: &OccupancyGrid, bbox: &BoundingBox) -> Result<usize> {
    graph
        .visited_by_distance(p)
        .into_iter()
        .find(|(v, d)| *d < 1e-9 || map.segment_is_free(p, &graph.vertices[*v].position, bbox, true))
        .map(|(v, _)| v)
        .ok_or_else(|| Error::NoPath("robot cannot reach any roadmap vertex".into()))
}

/// Shortest route from `current` to one of several targets, re-validating
/// the edges it uses against the current map. `score` picks the target
/// from the graph distances; invalid edges are dropped and the search
/// repeated.
fn route<F>(
    graph: &mut GlobalGraph,
    current: &Vec3,
    map: &OccupancyGrid,
    config: &GlobalPlannerConfig,
    bbox: &BoundingBox,
    speed: f64,
    mut choose: F,
) -> Result<Option<GlobalPlan>>
where
    F: FnMut(&ShortestPaths, f64) -> Option<usize>,
{
    let start = attach(graph, current, map, bbox)?;
    let lead = (graph.vertices[start].position - current).norm();
    loop {
        let sp = graph.dijkstra(start);
        let Some(target) = choose(&sp, lead) else {
            return Ok(None);
        };
        let edges = graph.extract_edges(&sp, target).expect("chosen target is reachable");
        let mut invalid = None;
        for &e in &edges {
            if !map.is_path_collision_free(&graph.edges[e].polyline, bbox, true) {
                invalid = Some(e);
                break;
            }
        }
        if let Some(e) = invalid {
            graph.remove_edge(e);
            continue;
        }
        let mut raw = vec![*current];
        raw.extend(graph.edges_polyline(start, &edges));
        raw.dedup();
        let raw_length = polyline_length(&raw);
        let refined = resample(&shortcut(&raw, map, bbox), config.resample_spacing);
        return Ok(Some(GlobalPlan {
            path: Path::from_positions(&refined, speed),
            raw_length,
            target_vertex: target,
        }));
    }
}

/// Repositioning path to the frontier maximising
/// `gain * exp(-distance / sigma_d)`, distance measured along the graph.
/// Returns the plan and the index of the chosen frontier.
pub fn plan_to_frontier(
    graph: &mut GlobalGraph,
    current: &RobotState,
    frontiers: &[Frontier],
    map: &OccupancyGrid,
    config: &GlobalPlannerConfig,
    bbox: &BoundingBox,
    speed: f64,
) -> Result<(GlobalPlan, usize)> {
    let mut chosen = None;
    let plan = route(graph, &current.position, map, config, bbox, speed, |sp, lead| {
        let mut best: Option<(usize, f64)> = None;
        for (i, f) in frontiers.iter().enumerate() {
            let d = sp.dist[f.vertex];
            if !d.is_finite() {
                continue;
            }
            let score = f.gain * (-(d + lead) / config.sigma_d).exp();
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        chosen = best.map(|(i, _)| i);
        chosen.map(|i| frontiers[i].vertex)
    })?;
    match (plan, chosen) {
        (Some(p), Some(i)) => Ok((p, i)),
        _ => Err(Error::NoReachableFrontier),
    }
}

/// Shortest re-validated roadmap route home, shortcut-refined, starting
/// with the straight segment from `current` to its nearest vertex.
pub fn plan_home(
    graph: &mut GlobalGraph,
    current: &RobotState,
    map: &OccupancyGrid,
    config: &GlobalPlannerConfig,
    bbox: &BoundingBox,
    speed: f64,
) -> Result<GlobalPlan> {
    let home = graph.home();
    route(graph, &current.position, map, config, bbox, speed, |sp, _| {
        sp.dist[home].is_finite().then_some(home)
    })?
    .ok_or_else(|| Error::NoPath("home is not reachable on the roadmap".into()))
}

/// Length of the unrefined roadmap route home from `p`, without
/// re-validating edges. Never shorter than the refined homing path over
/// the same route, so it is a safe estimate for the budget check.
pub fn roadmap_distance_home(graph: &GlobalGraph, p: &Vec3, map: &OccupancyGrid, bbox: &BoundingBox) -> Result<f64> {
    let start = attach(graph, p, map, bbox)?;
    let d = graph.dijkstra(start).dist[graph.home()];
    if !d.is_finite() {
        return Err(Error::NoPath("home is not reachable on the roadmap".into()));
    }
    Ok(d + (graph.vertices[start].position - p).norm())
}

pub fn time_to_home(
    graph: &mut GlobalGraph,
    current: &RobotState,
    budget: &MissionBudget,
    map: &OccupancyGrid,
    config: &GlobalPlannerConfig,
    bbox: &BoundingBox,
) -> Result<f64> {
    let plan = plan_home(graph, current, map, config, bbox, budget.nominal_speed)?;
    Ok(plan.path.length() / budget.nominal_speed)
}
