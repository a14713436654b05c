//! Depth sensor model: scan simulation against a fully known world, and the
//! set of Unknown voxels a pose would observe.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel_map::{OccupancyGrid, VoxelState};
use crate::Vec3;

pub use crate::voxel_map::Beam;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Degrees, (0, 360].
    pub fov_horizontal: f64,
    /// Degrees, (0, 180]; a symmetric wedge about the horizontal plane.
    pub fov_vertical: f64,
    /// Sensing range, m.
    pub d_max: f64,
    /// Only this much of each beam updates the map, m.
    pub map_update_range: f64,
    pub rays_horizontal: usize,
    pub rays_vertical: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov_horizontal: 360.0,
            fov_vertical: 30.0,
            d_max: 50.0,
            map_update_range: 50.0,
            rays_horizontal: 180,
            rays_vertical: 9,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SensorConfig(m.to_string()));
        if !(self.fov_horizontal > 0.0 && self.fov_horizontal <= 360.0) {
            return bad("fov_horizontal must be in (0, 360]");
        }
        if !(self.fov_vertical > 0.0 && self.fov_vertical <= 180.0) {
            return bad("fov_vertical must be in (0, 180]");
        }
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return bad("d_max must be positive");
        }
        if !(self.map_update_range > 0.0 && self.map_update_range <= self.d_max) {
            return bad("map_update_range must be in (0, d_max]");
        }
        if self.rays_horizontal == 0 || self.rays_vertical == 0 {
            return bad("ray counts must be at least 1");
        }
        Ok(())
    }

    fn is_panoramic(&self) -> bool {
        self.fov_horizontal >= 360.0
    }

    /// Whether the offset `delta` from the sensor lies inside the field of
    /// view for the given heading (range is not checked).
    pub fn in_fov(&self, heading: f64, delta: &Vec3) -> bool {
        let horiz = delta.x.hypot(delta.y);
        let elevation = delta.z.atan2(horiz).to_degrees();
        if elevation.abs() > self.fov_vertical * 0.5 {
            return false;
        }
        if self.is_panoramic() {
            return true;
        }
        if horiz == 0.0 {
            return false;
        }
        let az = crate::motion_primitives::wrap_angle(delta.y.atan2(delta.x) - heading).to_degrees();
        az.abs() <= self.fov_horizontal * 0.5
    }

    /// Unit beam directions of the scan grid.
    ///
    /// A 360 degree sensor uses world-frame azimuths `k * 360 / n`, so its
    /// beams do not depend on heading; a narrower sensor spreads its beams
    /// evenly over the FoV centred on the heading. Elevations are spread
    /// evenly over `[-fov_v/2, fov_v/2]` (a single ring sits at 0).
    pub fn beam_directions(&self, heading: f64) -> Vec<Vec3> {
        let nh = self.rays_horizontal;
        let nv = self.rays_vertical;
        let azimuths: Vec<f64> = if self.is_panoramic() {
            (0..nh).map(|k| (k as f64 * (360.0 / nh as f64)).to_radians()).collect()
        } else if nh == 1 {
            vec![heading]
        } else {
            (0..nh)
                .map(|k| {
                    heading
                        + (-self.fov_horizontal * 0.5 + k as f64 * (self.fov_horizontal / (nh - 1) as f64))
                            .to_radians()
                })
                .collect()
        };
        let elevations: Vec<f64> = if nv == 1 {
            vec![0.0]
        } else {
            (0..nv)
                .map(|j| (-self.fov_vertical * 0.5 + j as f64 * (self.fov_vertical / (nv - 1) as f64)).to_radians())
                .collect()
        };
        let mut out = Vec::with_capacity(nh * nv);
        for el in &elevations {
            let (se, ce) = el.sin_cos();
            for az in &azimuths {
                let (sa, ca) = az.sin_cos();
                out.push(Vec3::new(ce * ca, ce * sa, se).normalize());
            }
        }
        out
    }
}

/// Which visibility computation feeds the exploration gain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    /// One ray per candidate voxel centre.
    #[default]
    Exact,
    /// Unknown voxels crossed by the sensor's beam grid.
    Beams,
}

/// A fully known world the robot flies in.
#[derive(Clone, Debug)]
pub struct GroundTruthEnv {
    grid: OccupancyGrid,
    home: Vec3,
}

impl GroundTruthEnv {
    pub fn new(grid: OccupancyGrid, home: Vec3) -> Result<Self> {
        if grid.counts().unknown != 0 {
            return Err(Error::Environment(format!(
                "ground truth contains {} unknown voxels",
                grid.counts().unknown
            )));
        }
        match grid.state_at(&home) {
            Some(VoxelState::Free) => {}
            Some(_) => return Err(Error::Environment("home lies in an occupied voxel".into())),
            None => return Err(Error::Environment("home lies outside the environment".into())),
        }
        Ok(Self { grid, home })
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn home(&self) -> Vec3 {
        self.home
    }
}

/// Casts the sensor's beam grid into the ground truth. Each beam reports
/// the distance at which it enters the first Occupied voxel, or `d_max`
/// without a hit. Beams leaving the world report no hit.
pub fn simulate_scan(env: &GroundTruthEnv, position: &Vec3, heading: f64, config: &SensorConfig) -> Result<Vec<Beam>> {
    let grid = env.grid();
    match grid.state_at(position) {
        Some(VoxelState::Free) => {}
        Some(_) => return Err(Error::PoseOccupied),
        None => return Err(Error::out_of_bounds(position)),
    }
    let mut beams = Vec::with_capacity(config.rays_horizontal * config.rays_vertical);
    for dir in config.beam_directions(heading) {
        let mut hit = None;
        grid.traverse(position, &dir, config.d_max, |v| {
            if v.t_enter >= config.d_max {
                return ControlFlow::Break(());
            }
            if grid.get_linear(v.linear) == VoxelState::Occupied {
                hit = Some(v.t_enter);
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        beams.push(match hit {
            Some(range) => Beam { dir, range, hit: true },
            None => Beam { dir, range: config.d_max, hit: false },
        });
    }
    Ok(beams)
}

/// Unknown voxels observable from the pose, sorted by linear index.
///
/// A voxel is observable when its centre lies within `d_max` and inside the
/// FoV, and the straight segment from the sensor to that centre crosses no
/// Occupied voxel. Unknown voxels do not occlude.
pub fn visible_unknown_voxels(map: &OccupancyGrid, position: &Vec3, heading: f64, config: &SensorConfig) -> Vec<usize> {
    if !map.contains(position) {
        return Vec::new();
    }
    let res = map.resolution();
    let origin = map.origin();
    let dims = map.dims();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let l = ((position[a] - config.d_max - origin[a]) / res).floor().max(0.0);
        let h = ((position[a] + config.d_max - origin[a]) / res).floor().min(dims[a] as f64 - 1.0);
        lo[a] = l as usize;
        hi[a] = h as usize;
    }
    let d2 = config.d_max * config.d_max;
    let mut out = Vec::new();
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let idx = [x, y, z];
                let linear = map.linear(idx);
                if map.get_linear(linear) != VoxelState::Unknown {
                    continue;
                }
                let c = map.center(idx);
                let delta = c - position;
                let dist2 = delta.norm_squared();
                if dist2 > d2 || !config.in_fov(heading, &delta) {
                    continue;
                }
                if center_ray_clear(map, position, &c, linear) {
                    out.push(linear);
                }
            }
        }
    }
    out
}

fn center_ray_clear(map: &OccupancyGrid, from: &Vec3, to: &Vec3, target: usize) -> bool {
    let delta = to - from;
    let dist = delta.norm();
    if dist == 0.0 {
        return true;
    }
    let dir = delta / dist;
    let mut clear = true;
    let _ = map.traverse(from, &dir, dist, |v| {
        if v.linear == target {
            return ControlFlow::Break(());
        }
        if map.get_linear(v.linear) == VoxelState::Occupied {
            clear = false;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    clear
}

/// Beam-sampled variant: Unknown voxels crossed by the scan grid before
/// the first Occupied voxel and within `d_max`. Sorted, deduplicated.
pub fn visible_unknown_voxels_beams(
    map: &OccupancyGrid,
    position: &Vec3,
    heading: f64,
    config: &SensorConfig,
) -> Vec<usize> {
    if !map.contains(position) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for dir in config.beam_directions(heading) {
        let _ = map.traverse(position, &dir, config.d_max, |v| {
            if v.t_enter >= config.d_max {
                return ControlFlow::Break(());
            }
            match map.get_linear(v.linear) {
                VoxelState::Occupied => ControlFlow::Break(()),
                VoxelState::Unknown => {
                    out.push(v.linear);
                    ControlFlow::Continue(())
                }
                VoxelState::Free => ControlFlow::Continue(()),
            }
        });
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub fn visible_unknown(
    map: &OccupancyGrid,
    position: &Vec3,
    heading: f64,
    config: &SensorConfig,
    model: GainModel,
) -> Vec<usize> {
    match model {
        GainModel::Exact => visible_unknown_voxels(map, position, heading, config),
        GainModel::Beams => visible_unknown_voxels_beams(map, position, heading, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_map::{new_map, Aabb};

    fn filled(extent: Vec3, res: f64, state: VoxelState) -> OccupancyGrid {
        let mut m = new_map(Aabb::new(Vec3::zeros(), extent), res).unwrap();
        for i in 0..m.len() {
            m.set_linear(i, state);
        }
        m
    }

    #[test]
    fn open_space_returns_max_range() {
        let grid = filled(Vec3::new(120.0, 120.0, 30.0), 1.0, VoxelState::Free);
        let env = GroundTruthEnv::new(grid, Vec3::new(60.2, 60.3, 15.1)).unwrap();
        let cfg = SensorConfig::default();
        let beams = simulate_scan(&env, &env.home(), 0.0, &cfg).unwrap();
        assert_eq!(beams.len(), 180 * 9);
        assert!(beams.iter().all(|b| !b.hit && b.range == 50.0));
        // [360, 30] deg, 50 m
        let max_el = beams.iter().map(|b| b.dir.z.asin().to_degrees()).fold(f64::MIN, f64::max);
        assert!((max_el - 15.0).abs() < 1e-9);
    }

    #[test]
    fn wall_ranges_follow_cosine() {
        // Wall filling x >= 13 m; sensor at x = 10 m, so 3 m ahead.
        let mut grid = filled(Vec3::new(20.0, 20.0, 10.0), 0.5, VoxelState::Free);
        for i in 0..grid.len() {
            if grid.center_linear(i).x > 13.0 {
                grid.set_linear(i, VoxelState::Occupied);
            }
        }
        let env = GroundTruthEnv::new(grid, Vec3::new(10.0, 10.1, 5.1)).unwrap();
        let cfg = SensorConfig { rays_vertical: 1, d_max: 8.0, map_update_range: 8.0, ..Default::default() };
        let beams = simulate_scan(&env, &env.home(), 0.0, &cfg).unwrap();
        for b in &beams {
            // per-beam oracle: distance along the beam to the plane x = 13
            let expect = if b.dir.x > 1e-12 { 3.0 / b.dir.x } else { f64::INFINITY };
            if expect < 8.0 {
                assert!(b.hit);
                assert!((b.range - expect).abs() < 1e-9, "{} vs {}", b.range, expect);
            } else {
                assert!(!b.hit);
                assert_eq!(b.range, 8.0);
            }
        }
        assert!(simulate_scan(&env, &Vec3::new(15.0, 10.0, 5.0), 0.0, &cfg).is_err());
    }

    #[test]
    fn nothing_unknown_means_nothing_visible() {
        let m = filled(Vec3::repeat(5.0), 0.5, VoxelState::Free);
        assert!(visible_unknown_voxels(&m, &Vec3::repeat(2.5), 0.0, &SensorConfig::default()).is_empty());
    }

    #[test]
    fn occluded_region_is_invisible() {
        // Wall plane at x in [2, 2.5), unknown beyond; sensor with a narrow vertical FoV.
        let mut m = filled(Vec3::new(6.0, 4.0, 4.0), 0.5, VoxelState::Free);
        for i in 0..m.len() {
            let c = m.center_linear(i);
            if c.x > 2.0 && c.x < 2.5 {
                m.set_linear(i, VoxelState::Occupied);
            } else if c.x > 2.5 {
                m.set_linear(i, VoxelState::Unknown);
            }
        }
        let cfg = SensorConfig { d_max: 10.0, map_update_range: 10.0, ..Default::default() };
        let vis = visible_unknown_voxels(&m, &Vec3::new(1.1, 2.1, 2.1), 0.0, &cfg);
        assert!(vis.is_empty());
    }

    #[test]
    fn panoramic_result_ignores_heading() {
        let m = filled(Vec3::repeat(6.0), 0.5, VoxelState::Unknown);
        let cfg = SensorConfig { d_max: 3.0, map_update_range: 3.0, fov_vertical: 60.0, ..Default::default() };
        let p = Vec3::new(3.1, 2.9, 3.05);
        let a = visible_unknown_voxels(&m, &p, 0.0, &cfg);
        let b = visible_unknown_voxels(&m, &p, 2.0, &cfg);
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn beam_subset_grids_are_nested() {
        let fine = SensorConfig::default();
        let coarse = SensorConfig { rays_horizontal: 60, rays_vertical: 5, ..Default::default() };
        let f = fine.beam_directions(0.7);
        for d in coarse.beam_directions(0.7) {
            assert!(f.contains(&d));
        }
    }
}
