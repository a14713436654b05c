//! Independent reference implementations used by the integration tests.
//! None of them reuse the traversal, visibility or search code under test.
#![allow(dead_code)]

use std::collections::HashSet;

use explore_core::local_planner::LocalPlannerConfig;
use explore_core::motion_primitives::{generate_primitive_commands, propagate, MotionModel, RobotState};
use explore_core::sensor_sim::{visible_unknown_voxels, GainModel, SensorConfig};
use explore_core::voxel_map::{new_map, Aabb, BoundingBox, OccupancyGrid, VoxelIndex, VoxelState};
use explore_core::Vec3;
use rand::Rng;

/// Random map of `n^3` voxels with the given state probabilities
/// (free, occupied; the rest is unknown).
pub fn random_map<R: Rng>(rng: &mut R, n: usize, res: f64, p_free: f64, p_occ: f64) -> OccupancyGrid {
    let side = n as f64 * res;
    let mut m = new_map(Aabb::new(Vec3::zeros(), Vec3::repeat(side)), res).unwrap();
    for i in 0..m.len() {
        let u: f64 = rng.gen();
        let s = if u < p_free {
            VoxelState::Free
        } else if u < p_free + p_occ {
            VoxelState::Occupied
        } else {
            VoxelState::Unknown
        };
        m.set_linear(i, s);
    }
    m
}

/// Parameter interval of the segment `a + t (b - a)`, `t` in `[0, 1]`,
/// inside the open box `[lo, hi]`, if it has positive length.
pub fn segment_box_interval(a: &Vec3, b: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<(f64, f64)> {
    let d = b - a;
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for k in 0..3 {
        if d[k] == 0.0 {
            if a[k] <= lo[k] || a[k] >= hi[k] {
                return None;
            }
        } else {
            let u = (lo[k] - a[k]) / d[k];
            let v = (hi[k] - a[k]) / d[k];
            t0 = t0.max(u.min(v));
            t1 = t1.min(u.max(v));
        }
    }
    (t0 < t1).then_some((t0, t1))
}

pub fn voxel_box(map: &OccupancyGrid, idx: VoxelIndex) -> (Vec3, Vec3) {
    let res = map.resolution();
    let lo = map.origin() + Vec3::new(idx[0] as f64, idx[1] as f64, idx[2] as f64) * res;
    (lo, lo + Vec3::repeat(res))
}

/// Voxels crossed by the ray from `origin` along unit `dir` up to `max_t`,
/// found by testing every voxel of the grid, ordered by entry parameter.
pub fn brute_force_ray(map: &OccupancyGrid, origin: &Vec3, dir: &Vec3, max_t: f64) -> Vec<usize> {
    let end = origin + dir * max_t;
    let dims = map.dims();
    let mut hits = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let (lo, hi) = voxel_box(map, [x, y, z]);
                if let Some((t0, _)) = segment_box_interval(origin, &end, &lo, &hi) {
                    hits.push((t0, map.linear([x, y, z])));
                }
            }
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    hits.into_iter().map(|(_, i)| i).collect()
}

/// Elevation/azimuth test written from the definition of the field of view.
pub fn fov_oracle(cfg: &SensorConfig, heading: f64, delta: &Vec3) -> bool {
    let r = delta.norm();
    if r == 0.0 {
        return false;
    }
    let elevation = (delta.z / r).asin().to_degrees();
    if elevation.abs() > cfg.fov_vertical / 2.0 {
        return false;
    }
    if cfg.fov_horizontal >= 360.0 {
        return true;
    }
    let mut az = (delta.y.atan2(delta.x) - heading).to_degrees() % 360.0;
    if az > 180.0 {
        az -= 360.0;
    } else if az < -180.0 {
        az += 360.0;
    }
    az.abs() <= cfg.fov_horizontal / 2.0
}

/// Unknown voxels whose centre is in range and in the FoV, and whose centre
/// segment passes through no Occupied voxel's interior.
pub fn visible_oracle(map: &OccupancyGrid, p: &Vec3, heading: f64, cfg: &SensorConfig) -> Vec<usize> {
    let dims = map.dims();
    let occupied: Vec<usize> = (0..map.len()).filter(|&i| map.get_linear(i) == VoxelState::Occupied).collect();
    let mut out = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let idx = [x, y, z];
                let target = map.linear(idx);
                if map.get_linear(target) != VoxelState::Unknown {
                    continue;
                }
                let c = map.center(idx);
                let delta = c - p;
                if delta.norm() > cfg.d_max || !fov_oracle(cfg, heading, &delta) {
                    continue;
                }
                let seg_lo = p.inf(&c);
                let seg_hi = p.sup(&c);
                let blocked = occupied.iter().any(|&o| {
                    if o == target {
                        return false;
                    }
                    let (lo, hi) = voxel_box(map, map.unlinear(o));
                    if (0..3).any(|k| hi[k] < seg_lo[k] || lo[k] > seg_hi[k]) {
                        return false;
                    }
                    segment_box_interval(p, &c, &lo, &hi).is_some()
                });
                if !blocked {
                    out.push(target);
                }
            }
        }
    }
    out
}

/// One root-to-node candidate of the exhaustive enumeration.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub ends: Vec<RobotState>,
    pub gain: f64,
    pub length: f64,
    pub utility: f64,
}

/// Enumerates every command sequence of length `0..=depth` whose
/// primitives stay inside the window and are collision-free, and scores
/// each by discounted set-union gain minus the length penalty.
pub fn enumerate_paths(
    map: &OccupancyGrid,
    root: &RobotState,
    model: &MotionModel,
    sensor: &SensorConfig,
    cfg: &LocalPlannerConfig,
    bbox: &BoundingBox,
) -> Vec<Candidate> {
    let half = Vec3::from(cfg.window) * 0.5;
    let window = Aabb::from_center(root.position, half).intersection(&map.bounds()).unwrap();
    let mut out = vec![Candidate {
        ends: Vec::new(),
        gain: 0.0,
        length: 0.0,
        utility: 0.0,
    }];
    let mut stack = vec![(*root, Vec::<RobotState>::new(), Vec::<f64>::new())];
    while let Some((state, ends, lengths)) = stack.pop() {
        if ends.len() == cfg.tree_depth {
            continue;
        }
        for cmd in generate_primitive_commands(&state, model, &cfg.branching()) {
            let prim = propagate(&state, &cmd, model).unwrap();
            let pts: Vec<Vec3> = prim.states.iter().map(|s| s.position).collect();
            if !pts.iter().all(|q| window.contains(q)) || !map.is_path_collision_free(&pts, bbox, true) {
                continue;
            }
            let end = *prim.states.last().unwrap();
            let mut e = ends.clone();
            e.push(end);
            let mut l = lengths.clone();
            l.push(lengths.last().copied().unwrap_or(0.0) + prim.length);
            let gain = union_gain(map, &e, &l, sensor, cfg);
            let length = *l.last().unwrap();
            out.push(Candidate {
                ends: e.clone(),
                gain,
                length,
                utility: gain - cfg.length_weight * length,
            });
            stack.push((end, e, l));
        }
    }
    out
}

/// `sum_k discount^{L_k} |V_k minus earlier sets|` times the voxel volume.
pub fn union_gain(map: &OccupancyGrid, ends: &[RobotState], lengths: &[f64], sensor: &SensorConfig, cfg: &LocalPlannerConfig) -> f64 {
    let mut seen = HashSet::new();
    let mut gain = 0.0;
    for (s, l) in ends.iter().zip(lengths) {
        let fresh = visible_unknown_voxels(map, &s.position, s.heading, sensor)
            .into_iter()
            .filter(|v| seen.insert(*v))
            .count();
        gain += cfg.discount.powf(*l) * fresh as f64 * map.voxel_volume();
    }
    gain
}

/// Voxel centres where the robot fits with Unknown as an obstacle.
pub fn traversable(map: &OccupancyGrid, bbox: &BoundingBox) -> Vec<bool> {
    (0..map.len())
        .map(|i| map.get_linear(i) == VoxelState::Free && map.bbox_is_free(&map.center_linear(i), bbox, true))
        .collect()
}

/// Grid distances from `start` by Bellman-Ford relaxation over 26-connected
/// moves whose every axis-aligned partial step also lands on traversable
/// voxels.
pub fn grid_distances_oracle(map: &OccupancyGrid, start: usize, bbox: &BoundingBox) -> Vec<f64> {
    let ok = traversable(map, bbox);
    let dims = map.dims();
    let at = |idx: [i64; 3]| -> Option<usize> {
        if (0..3).all(|k| idx[k] >= 0 && idx[k] < dims[k] as i64) {
            Some(map.linear([idx[0] as usize, idx[1] as usize, idx[2] as usize]))
        } else {
            None
        }
    };
    let mut dist = vec![f64::INFINITY; map.len()];
    if !ok[start] {
        return dist;
    }
    dist[start] = 0.0;
    let res = map.resolution();
    loop {
        let mut changed = false;
        for i in 0..map.len() {
            if !dist[i].is_finite() {
                continue;
            }
            let u = map.unlinear(i);
            let u = [u[0] as i64, u[1] as i64, u[2] as i64];
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    for dz in -1..=1i64 {
                        let d = [dx, dy, dz];
                        if d == [0, 0, 0] {
                            continue;
                        }
                        let Some(j) = at([u[0] + dx, u[1] + dy, u[2] + dz]) else { continue };
                        if !ok[j] {
                            continue;
                        }
                        let mut clear = true;
                        for mask in 1..8u8 {
                            let sub: Vec<i64> = (0..3).map(|k| if mask >> k & 1 == 1 { d[k] } else { 0 }).collect();
                            if sub.iter().zip(&d).any(|(s, full)| *s != 0 && *full == 0) || sub == d {
                                continue;
                            }
                            match at([u[0] + sub[0], u[1] + sub[1], u[2] + sub[2]]) {
                                Some(k) if ok[k] => {}
                                _ => clear = false,
                            }
                        }
                        if !clear {
                            continue;
                        }
                        let nd = dist[i] + res * ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                        if nd < dist[j] - 1e-12 {
                            dist[j] = nd;
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

/// Free room with scattered Occupied and Unknown boxes, kept clear around
/// the centre.
pub fn cluttered_room<R: Rng>(rng: &mut R, n: usize, res: f64) -> OccupancyGrid {
    let side = n as f64 * res;
    let mut m = new_map(Aabb::new(Vec3::zeros(), Vec3::repeat(side)), res).unwrap();
    for i in 0..m.len() {
        m.set_linear(i, VoxelState::Free);
    }
    let c = Vec3::repeat(side / 2.0);
    for k in 0..14 {
        let lo = Vec3::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side), rng.gen_range(0.0..side));
        let hi = lo + Vec3::new(rng.gen_range(0.5..2.5), rng.gen_range(0.5..2.5), rng.gen_range(0.5..2.5));
        let state = if k % 2 == 0 { VoxelState::Occupied } else { VoxelState::Unknown };
        for i in m.voxels_overlapping(&Aabb::new(lo, hi)) {
            if (m.center_linear(i) - c).abs().max() > 1.0 {
                m.set_linear(i, state);
            }
        }
    }
    for i in 0..m.len() {
        let q = m.center_linear(i);
        if q.iter().any(|v| *v < res || *v > side - res) {
            m.set_linear(i, VoxelState::Unknown);
        }
    }
    m
}

/// Depth-3 lattice small enough to enumerate exhaustively.
pub fn small_lattice() -> (MotionModel, LocalPlannerConfig) {
    let model = MotionModel {
        v_max: 1.0,
        vz_max: 0.5,
        ..MotionModel::default()
    };
    let cfg = LocalPlannerConfig {
        window: [12.0, 12.0, 12.0],
        tree_depth: 3,
        max_nodes: 100_000,
        headings: 3,
        speeds: 1,
        vertical_speeds: 2,
        gain_model: GainModel::Exact,
        ..LocalPlannerConfig::default()
    };
    (model, cfg)
}
