//! Procedural environments, scenario configuration, and batch runs.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{FrontierBaselineConfig, NbvpBaselineConfig};
use crate::error::{Error, Result};
use crate::global_planner::GlobalPlannerConfig;
use crate::local_planner::LocalPlannerConfig;
use crate::mission::{run_mission, DoneReason, MissionConfig, MissionLog, MissionOutcome, PlannerKind};
use crate::motion_primitives::MotionModel;
use crate::sensor_sim::{GroundTruthEnv, SensorConfig};
use crate::voxel_map::{Aabb, BoundingBox, OccupancyGrid, VoxelState};
use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunnelSpec {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Walls are displaced by up to this much, m.
    pub roughness: f64,
}

impl Default for TunnelSpec {
    fn default() -> Self {
        Self {
            length: 100.0,
            width: 5.0,
            height: 7.0,
            roughness: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorridorLayout {
    /// Entry corridor ending in a junction: straight on is a dead end, the
    /// side branch continues and turns once more.
    LDeadEnd,
    TJunction,
    /// Random tree of corridors on a square lattice.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorSpec {
    pub layout: CorridorLayout,
    pub width: f64,
    /// Random extra width per corridor, drawn from `[0, width_jitter]`.
    pub width_jitter: f64,
    pub height: f64,
    pub segment_length: f64,
    /// Number of corridors for the random layout.
    pub segments: usize,
    /// Lattice size (nodes per side) for the random layout.
    pub grid: usize,
}

impl Default for CorridorSpec {
    fn default() -> Self {
        Self {
            layout: CorridorLayout::Random,
            width: 3.0,
            width_jitter: 0.0,
            height: 3.0,
            segment_length: 10.0,
            segments: 6,
            grid: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomPillarSpec {
    pub pillars_x: usize,
    pub pillars_y: usize,
    /// Corridor width in the left half of the pillar grid, m.
    pub corridor_width: f64,
    /// Corridor width in the right half, m.
    pub narrow_width: f64,
    /// Pillar size in the left half; pillars on the right grow so the
    /// pitch stays constant.
    pub pillar_size: f64,
    pub height: f64,
    /// Side of the square entry room, m.
    pub entry_room: f64,
    /// The entry room joins the grid through this passage.
    pub passage_width: f64,
    pub passage_length: f64,
}

impl Default for RoomPillarSpec {
    fn default() -> Self {
        Self {
            pillars_x: 5,
            pillars_y: 3,
            corridor_width: 3.0,
            narrow_width: 1.2,
            pillar_size: 4.0,
            height: 3.0,
            entry_room: 6.0,
            passage_width: 1.2,
            passage_length: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiLevelSpec {
    pub floors: usize,
    pub size_x: f64,
    pub size_y: f64,
    pub floor_height: f64,
    pub slab: f64,
    /// Side of the square opening between consecutive floors, m.
    pub opening: f64,
}

impl Default for MultiLevelSpec {
    fn default() -> Self {
        Self {
            floors: 2,
            size_x: 12.0,
            size_y: 12.0,
            floor_height: 3.0,
            slab: 0.4,
            opening: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoxmapSpec {
    pub path: PathBuf,
    /// Defaults to the `<path>.home` sidecar written by `gen-env`.
    pub home: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum EnvSpec {
    StraightTunnel(TunnelSpec),
    BranchingCorridors(CorridorSpec),
    RoomAndPillar(RoomPillarSpec),
    MultiLevel(MultiLevelSpec),
    Voxmap(VoxmapSpec),
}

/// A passage the robot may cross in the `+axis` direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Passage {
    pub region: Aabb,
    pub axis: usize,
}

impl Passage {
    pub fn crossed_by(&self, trajectory: &[Vec3]) -> bool {
        trajectory.iter().any(|p| p[self.axis] > self.region.max[self.axis])
    }
}

pub struct GeneratedEnv {
    pub env: GroundTruthEnv,
    /// Boxes whose union is the designed free space.
    pub design: Vec<Aabb>,
    pub passages: Vec<Passage>,
    /// Free region of each floor, bottom first.
    pub floors: Vec<Aabb>,
}

impl GeneratedEnv {
    /// Ground-truth Free voxels whose centre lies in `region`.
    pub fn free_voxels_in(&self, region: &Aabb) -> Vec<usize> {
        let g = self.env.grid();
        g.voxels_overlapping(region)
            .into_iter()
            .filter(|i| g.get_linear(*i) == VoxelState::Free && region.contains(&g.center_linear(*i)))
            .collect()
    }

    /// Unknown volume of `map` over the designed free space, m^3.
    pub fn unknown_design_volume(&self, map: &OccupancyGrid) -> f64 {
        let g = self.env.grid();
        let n = (0..g.len())
            .filter(|i| {
                g.get_linear(*i) == VoxelState::Free
                    && map.get_linear(*i) == VoxelState::Unknown
                    && self.design.iter().any(|b| b.contains(&g.center_linear(*i)))
            })
            .count();
        n as f64 * g.voxel_volume()
    }
}

/// Wall thickness around carved space, m.
const WALL: f64 = 0.6;

fn snap_up(v: f64, res: f64) -> f64 {
    (v / res - 1e-9).ceil() * res
}

fn solid_grid(extent: Vec3, res: f64) -> Result<OccupancyGrid> {
    let ext = Vec3::new(snap_up(extent.x, res), snap_up(extent.y, res), snap_up(extent.z, res));
    let mut g = OccupancyGrid::new(Aabb::new(Vec3::zeros(), ext), res)?;
    for i in 0..g.len() {
        g.set_linear(i, VoxelState::Occupied);
    }
    Ok(g)
}

/// Marks Free every voxel whose centre lies in the closed box.
fn carve(g: &mut OccupancyGrid, b: &Aabb) {
    for i in g.voxels_overlapping(b) {
        if b.contains(&g.center_linear(i)) {
            g.set_linear(i, VoxelState::Free);
        }
    }
}

fn snap_to_voxel(g: &OccupancyGrid, p: &Vec3) -> Result<Vec3> {
    g.voxel_of(p).map(|v| g.center(v)).ok_or_else(|| Error::Environment("home outside the environment".into()))
}

fn finish(g: OccupancyGrid, home: Vec3, design: Vec<Aabb>, passages: Vec<Passage>, floors: Vec<Aabb>) -> Result<GeneratedEnv> {
    let home = snap_to_voxel(&g, &home)?;
    Ok(GeneratedEnv {
        env: GroundTruthEnv::new(g, home)?,
        design,
        passages,
        floors,
    })
}

pub fn straight_tunnel(spec: &TunnelSpec, resolution: f64, seed: u64) -> Result<GeneratedEnv> {
    let a = spec.roughness;
    if !(spec.length > 0.0 && spec.width > 2.0 * a && spec.height > 2.0 * a) {
        return Err(Error::Config("tunnel dimensions must exceed twice the roughness".into()));
    }
    let m = snap_up(WALL + a, resolution);
    let mut g = solid_grid(Vec3::new(spec.length, spec.width, spec.height) + Vec3::repeat(2.0 * m), resolution)?;
    let stations = spec.length.ceil() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<[f64; 4]> = (0..stations)
        .map(|_| {
            if a > 0.0 {
                [(); 4].map(|_| rng.gen_range(-a..=a))
            } else {
                [0.0; 4]
            }
        })
        .collect();
    let wall_at = |x: f64, k: usize| {
        let s = (x - m).clamp(0.0, (stations - 1) as f64);
        let i = (s.floor() as usize).min(stations - 2);
        let j = (i + 1).min(stations - 1);
        let f = s - i as f64;
        offsets[i][k] * (1.0 - f) + offsets[j][k] * f
    };
    for i in 0..g.len() {
        let c = g.center_linear(i);
        if c.x < m || c.x > m + spec.length {
            continue;
        }
        let y0 = m - wall_at(c.x, 0);
        let y1 = m + spec.width + wall_at(c.x, 1);
        let z0 = m - wall_at(c.x, 2);
        let z1 = m + spec.height + wall_at(c.x, 3);
        if c.y >= y0 && c.y <= y1 && c.z >= z0 && c.z <= z1 {
            g.set_linear(i, VoxelState::Free);
        }
    }
    let core = Aabb::new(Vec3::new(m, m + a, m + a), Vec3::new(m + spec.length, m + spec.width - a, m + spec.height - a));
    let home = Vec3::new(m + 1.5, m + spec.width / 2.0, m + spec.height / 2.0);
    finish(g, home, vec![core], Vec::new(), Vec::new())
}

/// Axis-aligned corridor centre line in the horizontal plane.
#[derive(Clone, Copy, Debug)]
struct Segment {
    a: [f64; 2],
    b: [f64; 2],
    width: f64,
}

pub fn branching_corridors(spec: &CorridorSpec, resolution: f64, seed: u64) -> Result<GeneratedEnv> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = spec.segment_length;
    let width = |rng: &mut ChaCha8Rng| {
        if spec.width_jitter > 0.0 {
            spec.width + rng.gen_range(0.0..=spec.width_jitter)
        } else {
            spec.width
        }
    };
    let mut segments = Vec::new();
    match spec.layout {
        CorridorLayout::LDeadEnd => {
            segments.push(Segment { a: [0.0, 0.0], b: [l, 0.0], width: width(&mut rng) });
            segments.push(Segment { a: [l, 0.0], b: [2.0 * l, 0.0], width: width(&mut rng) });
            segments.push(Segment { a: [l, 0.0], b: [l, l], width: width(&mut rng) });
            segments.push(Segment { a: [l, l], b: [2.0 * l, l], width: width(&mut rng) });
        }
        CorridorLayout::TJunction => {
            segments.push(Segment { a: [0.0, 0.0], b: [l, 0.0], width: width(&mut rng) });
            segments.push(Segment { a: [l, 0.0], b: [l, l], width: width(&mut rng) });
            segments.push(Segment { a: [l, 0.0], b: [l, -l], width: width(&mut rng) });
        }
        CorridorLayout::Random => {
            let n = spec.grid.max(2) as i64;
            let start = (0i64, n / 2);
            let mut nodes = vec![start];
            let mut tries = 0;
            while segments.len() < spec.segments && tries < 10_000 {
                tries += 1;
                let (x, y) = nodes[rng.gen_range(0..nodes.len())];
                let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.gen_range(0..4)];
                let next = (x + dx, y + dy);
                if next.0 < 0 || next.1 < 0 || next.0 >= n || next.1 >= n || nodes.contains(&next) {
                    continue;
                }
                nodes.push(next);
                segments.push(Segment {
                    a: [x as f64 * l, y as f64 * l],
                    b: [next.0 as f64 * l, next.1 as f64 * l],
                    width: width(&mut rng),
                });
            }
            if segments.is_empty() {
                return Err(Error::Config("corridor layout produced no segments".into()));
            }
        }
    }
    let max_w = segments.iter().map(|s| s.width).fold(0.0, f64::max);
    let min_xy = segments.iter().fold([f64::INFINITY; 2], |acc, s| {
        [acc[0].min(s.a[0]).min(s.b[0]), acc[1].min(s.a[1]).min(s.b[1])]
    });
    let max_xy = segments.iter().fold([f64::NEG_INFINITY; 2], |acc, s| {
        [acc[0].max(s.a[0]).max(s.b[0]), acc[1].max(s.a[1]).max(s.b[1])]
    });
    let m = snap_up(WALL, resolution);
    let shift = [m + max_w / 2.0 - min_xy[0], m + max_w / 2.0 - min_xy[1]];
    let extent = Vec3::new(
        max_xy[0] - min_xy[0] + max_w + 2.0 * m,
        max_xy[1] - min_xy[1] + max_w + 2.0 * m,
        spec.height + 2.0 * m,
    );
    let mut g = solid_grid(extent, resolution)?;
    let mut design = Vec::new();
    for s in &segments {
        let h = s.width / 2.0;
        let lo = Vec3::new(s.a[0].min(s.b[0]) + shift[0] - h, s.a[1].min(s.b[1]) + shift[1] - h, m);
        let hi = Vec3::new(s.a[0].max(s.b[0]) + shift[0] + h, s.a[1].max(s.b[1]) + shift[1] + h, m + spec.height);
        let b = Aabb::new(lo, hi);
        carve(&mut g, &b);
        design.push(b);
    }
    let s0 = segments[0];
    let sign = |d: f64| if d == 0.0 { 0.0 } else { d.signum() };
    let dir = [sign(s0.b[0] - s0.a[0]), sign(s0.b[1] - s0.a[1])];
    let home = Vec3::new(
        s0.a[0] + shift[0] + dir[0] * 0.5,
        s0.a[1] + shift[1] + dir[1] * 0.5,
        m + spec.height / 2.0,
    );
    finish(g, home, design, Vec::new(), Vec::new())
}

pub fn room_and_pillar(spec: &RoomPillarSpec, resolution: f64, seed: u64) -> Result<GeneratedEnv> {
    let (nx, ny) = (spec.pillars_x.max(1), spec.pillars_y.max(1));
    let pitch = spec.pillar_size + spec.corridor_width;
    if spec.narrow_width > pitch || spec.entry_room < 3.0 {
        return Err(Error::Config("room_and_pillar needs narrow_width <= pitch and entry_room >= 3".into()));
    }
    let m = snap_up(WALL, resolution);
    let split = nx / 2;
    let width_of_column = |k: usize| if k < split { spec.corridor_width } else { spec.narrow_width };
    let grid_w = nx as f64 * pitch + width_of_column(nx);
    let grid_h = ny as f64 * pitch + spec.corridor_width;
    let depth = grid_h.max(spec.entry_room);
    let x0 = m + spec.entry_room + spec.passage_length;
    let y0 = m + (depth - grid_h) / 2.0;
    let z0 = m;
    let z1 = m + spec.height;
    let extent = Vec3::new(x0 + grid_w + m, depth + 2.0 * m, spec.height + 2.0 * m);
    let mut g = solid_grid(extent, resolution)?;
    let mut design = Vec::new();

    let row = ny / 2;
    let yc = y0 + row as f64 * pitch + spec.narrow_width.min(spec.corridor_width) / 2.0;
    let room = Aabb::new(
        Vec3::new(m, (yc - spec.entry_room / 2.0).max(m), z0),
        Vec3::new(m + spec.entry_room, (yc + spec.entry_room / 2.0).max(m + spec.entry_room), z1),
    );
    let passage = Aabb::new(
        Vec3::new(m + spec.entry_room, yc - spec.passage_width / 2.0, z0),
        Vec3::new(x0, yc + spec.passage_width / 2.0, z1),
    );
    design.push(room);
    design.push(passage);
    for k in 0..=nx {
        let x = x0 + k as f64 * pitch;
        let w = width_of_column(k);
        design.push(Aabb::new(Vec3::new(x, y0, z0), Vec3::new(x + w, y0 + ny as f64 * pitch + w, z1)));
    }
    for r in 0..=ny {
        let y = y0 + r as f64 * pitch;
        let x_mid = x0 + split as f64 * pitch;
        design.push(Aabb::new(Vec3::new(x0, y, z0), Vec3::new(x_mid + width_of_column(0), y + spec.corridor_width, z1)));
        design.push(Aabb::new(Vec3::new(x_mid, y, z0), Vec3::new(x0 + grid_w, y + spec.narrow_width, z1)));
    }
    for b in &design {
        carve(&mut g, b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 1.5;
    let home = Vec3::new(
        rng.gen_range(room.min.x + margin..=room.max.x - margin),
        rng.gen_range(room.min.y + margin..=room.max.y - margin),
        (z0 + z1) / 2.0,
    );
    finish(g, home, design, vec![Passage { region: passage, axis: 0 }], Vec::new())
}

/// Home is drawn by `seed` from the ground-floor quarter farthest from the
/// opening.
pub fn multi_level(spec: &MultiLevelSpec, resolution: f64, seed: u64) -> Result<GeneratedEnv> {
    let floors = spec.floors.max(1);
    if spec.opening > spec.size_x.min(spec.size_y) - 2.0 {
        return Err(Error::Config("multi_level opening must leave room around it".into()));
    }
    let m = snap_up(WALL, resolution);
    let storey = spec.floor_height + spec.slab;
    let extent = Vec3::new(
        spec.size_x + 2.0 * m,
        spec.size_y + 2.0 * m,
        floors as f64 * storey - spec.slab + 2.0 * m,
    );
    let mut g = solid_grid(extent, resolution)?;
    let mut design = Vec::new();
    let mut floor_boxes = Vec::new();
    let mut passages = Vec::new();
    let oc = Vec3::new(m + spec.size_x - 1.0 - spec.opening / 2.0, m + spec.size_y - 1.0 - spec.opening / 2.0, 0.0);
    for f in 0..floors {
        let z = m + f as f64 * storey;
        let b = Aabb::new(Vec3::new(m, m, z), Vec3::new(m + spec.size_x, m + spec.size_y, z + spec.floor_height));
        design.push(b);
        floor_boxes.push(b);
        if f + 1 < floors {
            let h = spec.opening / 2.0;
            let hole = Aabb::new(
                Vec3::new(oc.x - h, oc.y - h, z + spec.floor_height),
                Vec3::new(oc.x + h, oc.y + h, z + storey),
            );
            design.push(hole);
            passages.push(Passage { region: hole, axis: 2 });
        }
    }
    for b in &design {
        carve(&mut g, b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hx, hy) = ((1.5_f64).min(spec.size_x / 2.0), (1.5_f64).min(spec.size_y / 2.0));
    let home = Vec3::new(
        m + rng.gen_range(hx..=(spec.size_x / 2.0).max(hx)),
        m + rng.gen_range(hy..=(spec.size_y / 2.0).max(hy)),
        m + spec.floor_height / 2.0,
    );
    finish(g, home, design, passages, floor_boxes)
}

fn read_home_sidecar(path: &FsPath) -> Result<Vec3> {
    let side = PathBuf::from(format!("{}.home", path.display()));
    let text = fs::read_to_string(&side)?;
    let v: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("{}: {e}", side.display()))))
        .collect::<Result<_>>()?;
    if v.len() != 3 {
        return Err(Error::Format(format!("{}: expected three numbers", side.display())));
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

/// Builds the ground truth described by `spec`. Deterministic in `seed`.
pub fn generate_env(spec: &EnvSpec, resolution: f64, seed: u64) -> Result<GeneratedEnv> {
    match spec {
        EnvSpec::StraightTunnel(s) => straight_tunnel(s, resolution, seed),
        EnvSpec::BranchingCorridors(s) => branching_corridors(s, resolution, seed),
        EnvSpec::RoomAndPillar(s) => room_and_pillar(s, resolution, seed),
        EnvSpec::MultiLevel(s) => multi_level(s, resolution, seed),
        EnvSpec::Voxmap(s) => {
            let grid = OccupancyGrid::read_voxmap(BufReader::new(fs::File::open(&s.path)?))?;
            let home = match s.home {
                Some(h) => Vec3::from(h),
                None => read_home_sidecar(&s.path)?,
            };
            let design = vec![grid.bounds()];
            Ok(GeneratedEnv {
                env: GroundTruthEnv::new(grid, home)?,
                design,
                passages: Vec::new(),
                floors: Vec::new(),
            })
        }
    }
}

/// Writes the environment as a VOXMAP file plus a `.home` sidecar.
pub fn write_env(env: &GroundTruthEnv, path: &FsPath) -> Result<()> {
    env.grid().write_voxmap(BufWriter::new(fs::File::create(path)?))?;
    let h = env.home();
    fs::write(format!("{}.home", path.display()), format!("{} {} {}\n", h.x, h.y, h.z))?;
    Ok(())
}

/// Environment description on its own: `seed`, `[map]` and
/// `[environment]`. Other sections are ignored, so a scenario file is also
/// accepted.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct EnvFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub map: MapSection,
    pub environment: EnvSpec,
}

impl EnvFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &FsPath) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn generate(&self) -> Result<GeneratedEnv> {
        generate_env(&self.environment, self.map.resolution, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub resolution: f64,
}

impl Default for MapSection {
    fn default() -> Self {
        Self { resolution: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub total_endurance: f64,
    pub homing_margin: f64,
    pub nominal_speed: f64,
    pub homing: bool,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            total_endurance: 900.0,
            homing_margin: 1.3,
            nominal_speed: 2.0,
            homing: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionSection {
    /// Robot box length, width, height, m.
    pub bbox: [f64; 3],
    /// Known-free box around home at start, m; zero disables it.
    pub init_clear: [f64; 3],
    pub scan_spacing: f64,
    pub stall_limit: usize,
    pub max_steps: usize,
    pub wall_clock: bool,
}

impl Default for MissionSection {
    fn default() -> Self {
        let d = MissionConfig::default();
        Self {
            bbox: [0.6, 0.6, 0.6],
            init_clear: d.init_clear,
            scan_spacing: d.scan_spacing,
            stall_limit: d.stall_limit,
            max_steps: d.max_steps,
            wall_clock: d.wall_clock,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub dump_map: bool,
    pub dump_graph: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            dump_map: false,
            dump_graph: false,
        }
    }
}

/// Everything needed to reproduce a run, read from a TOML file with one
/// level of sections.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_planner")]
    pub planner: PlannerKind,
    #[serde(default)]
    pub map: MapSection,
    pub environment: EnvSpec,
    #[serde(default)]
    pub sensor: SensorConfig,
    /// Planning sensor; defaults to `sensor`.
    #[serde(default)]
    pub gain_sensor: Option<SensorConfig>,
    #[serde(default)]
    pub motion: MotionModel,
    #[serde(default)]
    pub local: LocalPlannerConfig,
    #[serde(default)]
    pub global: GlobalPlannerConfig,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub mission: MissionSection,
    #[serde(default)]
    pub frontier: FrontierBaselineConfig,
    #[serde(default)]
    pub nbvp: NbvpBaselineConfig,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_planner() -> PlannerKind {
    PlannerKind::Mb
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &FsPath) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.mission_config()?.validate()?;
        let res = self.map.resolution;
        let b = self.mission.bbox;
        let clearance = b[0].max(b[1]) + 2.0 * res;
        let vertical = b[2] + 2.0 * res;
        let narrow = |name: &str, w: f64, need: f64| {
            if w < need - 1e-9 {
                Err(Error::Config(format!("{name} = {w} m is narrower than the robot plus two voxels ({need} m)")))
            } else {
                Ok(())
            }
        };
        match &self.environment {
            EnvSpec::StraightTunnel(s) => {
                narrow("width", s.width - 2.0 * s.roughness, clearance)?;
                narrow("height", s.height - 2.0 * s.roughness, vertical)?;
            }
            EnvSpec::BranchingCorridors(s) => {
                narrow("width", s.width, clearance)?;
                narrow("height", s.height, vertical)?;
            }
            EnvSpec::RoomAndPillar(s) => {
                narrow("corridor_width", s.corridor_width, clearance)?;
                narrow("narrow_width", s.narrow_width, clearance)?;
                narrow("passage_width", s.passage_width, clearance)?;
                narrow("height", s.height, vertical)?;
            }
            EnvSpec::MultiLevel(s) => {
                narrow("opening", s.opening, clearance)?;
                narrow("floor_height", s.floor_height, vertical)?;
            }
            EnvSpec::Voxmap(_) => {}
        }
        Ok(())
    }

    pub fn mission_config(&self) -> Result<MissionConfig> {
        let b = self.mission.bbox;
        Ok(MissionConfig {
            planner: self.planner,
            sensor: self.sensor,
            gain_sensor: self.gain_sensor.unwrap_or(self.sensor),
            motion: self.motion,
            local: self.local,
            global: self.global,
            frontier: self.frontier,
            nbvp: self.nbvp,
            bbox: BoundingBox::from_dims(b[0], b[1], b[2])?,
            init_clear: self.mission.init_clear,
            map_resolution: self.map.resolution,
            total_endurance: self.budget.total_endurance,
            homing_margin: self.budget.homing_margin,
            nominal_speed: self.budget.nominal_speed,
            homing: self.budget.homing,
            scan_spacing: self.mission.scan_spacing,
            stall_limit: self.mission.stall_limit,
            max_steps: self.mission.max_steps,
            wall_clock: self.mission.wall_clock,
        })
    }

    pub fn generate_env(&self, seed: u64) -> Result<GeneratedEnv> {
        generate_env(&self.environment, self.map.resolution, seed)
    }

    /// Generates the environment for `seed` and runs one mission in it.
    pub fn run(&self, seed: u64) -> Result<(GeneratedEnv, MissionOutcome)> {
        let env = self.generate_env(seed)?;
        let outcome = run_mission(&env.env, &self.mission_config()?, seed)?;
        Ok((env, outcome))
    }
}

/// Termination summary as `key = value` lines.
pub fn run_summary(cfg: &ScenarioConfig, seed: u64, outcome: &MissionOutcome) -> String {
    let log = &outcome.log;
    let last = log.records.last();
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    };
    kv("planner", cfg.planner.to_string());
    kv("seed", seed.to_string());
    kv("termination", outcome.termination().as_str().to_string());
    kv("steps", log.records.len().to_string());
    kv("elapsed_s", format!("{:.3}", outcome.final_state.budget.elapsed));
    kv("final_explored_m3", format!("{:.3}", last.map_or(0.0, |r| r.explored_m3)));
    kv("collisions", log.collisions.to_string());
    kv("samples_checked", log.samples_checked.to_string());
    kv("homing_by_budget", log.homing_by_budget.to_string());
    kv(
        "homing_started_s",
        log.homing_started_at.map_or_else(|| "none".to_string(), |t| format!("{t:.3}")),
    );
    kv("transitions", log.transitions.join(" > "));
    kv("graph_vertices", outcome.graph.vertex_count().to_string());
    kv("graph_edges", outcome.graph.edge_count().to_string());
    s.push_str(&knob_summary(cfg));
    s
}

/// Baseline settings, reported with every result.
fn knob_summary(cfg: &ScenarioConfig) -> String {
    format!(
        "frontier.approach_radius = {}\nfrontier.max_retries = {}\nfrontier.min_cluster_size = {}\n\
         nbvp.samples = {}\nnbvp.edge_length = {}\nnbvp.discount = {}\n",
        cfg.frontier.approach_radius,
        cfg.frontier.max_retries,
        cfg.frontier.min_cluster_size,
        cfg.nbvp.samples,
        cfg.nbvp.edge_length,
        cfg.nbvp.discount,
    )
}

/// Writes `metrics.csv`, `summary.txt` and the optional dumps into `dir`.
pub fn write_run_outputs(cfg: &ScenarioConfig, seed: u64, outcome: &MissionOutcome, dir: &FsPath) -> Result<()> {
    fs::create_dir_all(dir)?;
    outcome.log.write_metrics(BufWriter::new(fs::File::create(dir.join("metrics.csv"))?))?;
    fs::write(dir.join("summary.txt"), run_summary(cfg, seed, outcome))?;
    if cfg.output.dump_map {
        outcome.map.write_voxmap(BufWriter::new(fs::File::create(dir.join("map.voxmap"))?))?;
    }
    if cfg.output.dump_graph {
        outcome.graph.write_dump(BufWriter::new(fs::File::create(dir.join("graph.txt"))?))?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub seed: u64,
    pub termination: DoneReason,
    pub final_explored_m3: f64,
    pub elapsed: f64,
    pub collisions: usize,
    /// (t, explored_m3) per step.
    pub series: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopePoint {
    pub t: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug)]
pub struct BatchResult {
    pub runs: Vec<RunResult>,
    pub envelope: Vec<EnvelopePoint>,
}

impl BatchResult {
    pub fn mean_final_explored(&self) -> f64 {
        self.runs.iter().map(|r| r.final_explored_m3).sum::<f64>() / self.runs.len() as f64
    }
}

fn run_result(seed: u64, log: &MissionLog, elapsed: f64, termination: DoneReason) -> RunResult {
    RunResult {
        seed,
        termination,
        final_explored_m3: log.records.last().map_or(0.0, |r| r.explored_m3),
        elapsed,
        collisions: log.collisions,
        series: log.records.iter().map(|r| (r.t, r.explored_m3)).collect(),
    }
}

/// Explored volume of a run at time `t`: the last record not later than
/// `t` (zero before the first one).
fn value_at(series: &[(f64, f64)], t: f64) -> f64 {
    let k = series.partition_point(|(ts, _)| *ts <= t + 1e-9);
    if k == 0 {
        0.0
    } else {
        series[k - 1].1
    }
}

/// Pointwise mean/min/max of explored volume on a regular time grid.
pub fn envelope(runs: &[RunResult], dt: f64) -> Vec<EnvelopePoint> {
    let t_end = runs.iter().map(|r| r.elapsed).fold(0.0, f64::max);
    let n = (t_end / dt).ceil() as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            let vals: Vec<f64> = runs.iter().map(|r| value_at(&r.series, t)).collect();
            EnvelopePoint {
                t,
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

pub const ENVELOPE_DT: f64 = 10.0;

/// Runs seeds `seed .. seed + n_runs` and aggregates them. With an output
/// directory, writes `run_<seed>/` folders, `envelope.csv` and
/// `summary.txt`. Aborted runs are kept and flagged.
pub fn run_batch(cfg: &ScenarioConfig, n_runs: usize, out: Option<&FsPath>) -> Result<BatchResult> {
    if n_runs == 0 {
        return Err(Error::Config("a batch needs at least one run".into()));
    }
    let mut runs = Vec::with_capacity(n_runs);
    for k in 0..n_runs {
        let seed = cfg.seed + k as u64;
        let (_, outcome) = cfg.run(seed)?;
        if let Some(dir) = out {
            write_run_outputs(cfg, seed, &outcome, &dir.join(format!("run_{seed}")))?;
        }
        runs.push(run_result(seed, &outcome.log, outcome.final_state.budget.elapsed, outcome.termination()));
    }
    let env = envelope(&runs, ENVELOPE_DT);
    let result = BatchResult { runs, envelope: env };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(fs::File::create(dir.join("envelope.csv"))?);
        writeln!(w, "t_s,mean_m3,min_m3,max_m3")?;
        for p in &result.envelope {
            writeln!(w, "{:.3},{:.3},{:.3},{:.3}", p.t, p.mean, p.min, p.max)?;
        }
        w.flush()?;
        fs::write(dir.join("summary.txt"), batch_summary(cfg, &result))?;
    }
    Ok(result)
}

pub fn batch_summary(cfg: &ScenarioConfig, result: &BatchResult) -> String {
    let finals: Vec<f64> = result.runs.iter().map(|r| r.final_explored_m3).collect();
    let mut s = String::new();
    s.push_str(&format!("planner = {}\nruns = {}\nfirst_seed = {}\n", cfg.planner, result.runs.len(), cfg.seed));
    s.push_str(&format!(
        "mean_final_explored_m3 = {:.3}\nmin_final_explored_m3 = {:.3}\nmax_final_explored_m3 = {:.3}\n",
        result.mean_final_explored(),
        finals.iter().copied().fold(f64::INFINITY, f64::min),
        finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ));
    let aborted = result.runs.iter().filter(|r| r.termination == DoneReason::Aborted).count();
    s.push_str(&format!("aborted_runs = {aborted}\n"));
    for r in &result.runs {
        s.push_str(&format!(
            "run.{}.termination = {}\nrun.{}.final_explored_m3 = {:.3}\nrun.{}.elapsed_s = {:.3}\nrun.{}.collisions = {}\nrun.{}.aborted = {}\n",
            r.seed,
            r.termination.as_str(),
            r.seed,
            r.final_explored_m3,
            r.seed,
            r.elapsed,
            r.seed,
            r.collisions,
            r.seed,
            r.termination == DoneReason::Aborted,
        ));
    }
    s.push_str(&knob_summary(cfg));
    s
}
