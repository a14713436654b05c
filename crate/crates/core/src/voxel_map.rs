//! Dense ternary occupancy grid.
//!
//! Voxels are Unknown until a range beam passes through them (Free) or ends
//! inside them (Occupied). Storage is a flat array in x-fastest order.

use std::io::{BufRead, Write};
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum VoxelState {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl VoxelState {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(VoxelState::Unknown),
            1 => Some(VoxelState::Free),
            2 => Some(VoxelState::Occupied),
            _ => None,
        }
    }

    pub fn as_byte(self) -> u8 {
        self as u8
    }
}

/// Axis-aligned metric box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_center(center: Vec3, half: Vec3) -> Self {
        Self {
            min: center - half,
            max: center + half,
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let min = self.min.sup(&other.min);
        let max = self.max.inf(&other.max);
        if (0..3).all(|a| min[a] < max[a]) {
            Some(Aabb { min, max })
        } else {
            None
        }
    }
}

/// Robot collision volume: an axis-aligned box centred on the robot position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    half: Vec3,
}

impl BoundingBox {
    pub fn new(half_extents: Vec3) -> Result<Self> {
        if half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
            Ok(Self { half: half_extents })
        } else {
            Err(Error::Config(format!(
                "bounding box half-extents must be positive, got {:?}",
                half_extents.as_slice()
            )))
        }
    }

    /// Box from full length/width/height.
    pub fn from_dims(length: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(Vec3::new(length, width, height) * 0.5)
    }

    pub fn half_extents(&self) -> Vec3 {
        self.half
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            half: self.half * factor,
        }
    }

    pub fn at(&self, center: &Vec3) -> Aabb {
        Aabb::from_center(*center, self.half)
    }
}

pub type VoxelIndex = [usize; 3];

/// One voxel crossed by a ray, with the ray parameter interval inside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelVisit {
    pub index: VoxelIndex,
    pub linear: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// A single range measurement, expressed relative to the sensor origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beam {
    /// Unit direction in the world frame.
    pub dir: Vec3,
    pub range: f64,
    /// Whether the beam ended on a surface (as opposed to running out of range).
    pub hit: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VoxelCounts {
    pub free: usize,
    pub occupied: usize,
    pub unknown: usize,
}

impl VoxelCounts {
    pub fn total(&self) -> usize {
        self.free + self.occupied + self.unknown
    }

    pub fn known(&self) -> usize {
        self.free + self.occupied
    }
}

/// Result of integrating one scan.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanUpdate {
    pub newly_free: usize,
    pub newly_occupied: usize,
    /// Voxels that went from Unknown to a known state.
    pub newly_known: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    cells: Vec<VoxelState>,
    counts: VoxelCounts,
}

/// Builds an all-Unknown grid covering `bounds`.
pub fn new_map(bounds: Aabb, resolution: f64) -> Result<OccupancyGrid> {
    OccupancyGrid::new(bounds, resolution)
}

impl OccupancyGrid {
    pub fn new(bounds: Aabb, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::MapGeometry(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let extent = bounds.extent();
        let mut dims = [0usize; 3];
        for a in 0..3 {
            if !(extent[a] > 0.0 && extent[a].is_finite()) {
                return Err(Error::MapGeometry(format!(
                    "bounds are degenerate along axis {a}"
                )));
            }
            // The small slack keeps exact multiples such as 40 / 0.4 from
            // rounding up to an extra voxel.
            dims[a] = ((extent[a] / resolution) - 1e-9).ceil().max(1.0) as usize;
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self {
            origin: bounds.min,
            resolution,
            dims,
            cells: vec![VoxelState::Unknown; n],
            counts: VoxelCounts {
                unknown: n,
                ..Default::default()
            },
        })
    }

    pub fn from_cells(
        origin: Vec3,
        resolution: f64,
        dims: [usize; 3],
        cells: Vec<VoxelState>,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::MapGeometry(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if dims.iter().any(|d| *d == 0) {
            return Err(Error::MapGeometry("dims must be at least 1".into()));
        }
        if cells.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::MapGeometry(format!(
                "cell count {} does not match dims {:?}",
                cells.len(),
                dims
            )));
        }
        let mut counts = VoxelCounts::default();
        for c in &cells {
            match c {
                VoxelState::Free => counts.free += 1,
                VoxelState::Occupied => counts.occupied += 1,
                VoxelState::Unknown => counts.unknown += 1,
            }
        }
        Ok(Self {
            origin,
            resolution,
            dims,
            cells,
            counts,
        })
    }

    /// Empty grid with the same geometry.
    pub fn blank_like(other: &OccupancyGrid) -> Self {
        let n = other.len();
        Self {
            origin: other.origin,
            resolution: other.resolution,
            dims: other.dims,
            cells: vec![VoxelState::Unknown; n],
            counts: VoxelCounts {
                unknown: n,
                ..Default::default()
            },
        }
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn voxel_volume(&self) -> f64 {
        self.resolution.powi(3)
    }

    pub fn bounds(&self) -> Aabb {
        let ext = Vec3::new(
            self.dims[0] as f64,
            self.dims[1] as f64,
            self.dims[2] as f64,
        ) * self.resolution;
        Aabb::new(self.origin, self.origin + ext)
    }

    pub fn cells(&self) -> &[VoxelState] {
        &self.cells
    }

    pub fn counts(&self) -> VoxelCounts {
        self.counts
    }

    #[inline]
    pub fn linear(&self, idx: VoxelIndex) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn unlinear(&self, i: usize) -> VoxelIndex {
        let x = i % self.dims[0];
        let yz = i / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    /// Index of the voxel containing `p`, or `None` outside `[min, max)`.
    pub fn voxel_of(&self, p: &Vec3) -> Option<VoxelIndex> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.resolution).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            idx[a] = f as usize;
        }
        Some(idx)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.voxel_of(p).is_some()
    }

    pub fn center(&self, idx: VoxelIndex) -> Vec3 {
        Vec3::new(
            self.origin.x + (idx[0] as f64 + 0.5) * self.resolution,
            self.origin.y + (idx[1] as f64 + 0.5) * self.resolution,
            self.origin.z + (idx[2] as f64 + 0.5) * self.resolution,
        )
    }

    pub fn center_linear(&self, i: usize) -> Vec3 {
        self.center(self.unlinear(i))
    }

    #[inline]
    pub fn get(&self, idx: VoxelIndex) -> VoxelState {
        self.cells[self.linear(idx)]
    }

    #[inline]
    pub fn get_linear(&self, i: usize) -> VoxelState {
        self.cells[i]
    }

    pub fn state_at(&self, p: &Vec3) -> Option<VoxelState> {
        self.voxel_of(p).map(|i| self.get(i))
    }

    pub fn set(&mut self, idx: VoxelIndex, state: VoxelState) {
        let i = self.linear(idx);
        self.set_linear(i, state);
    }

    pub fn set_linear(&mut self, i: usize, state: VoxelState) {
        let old = self.cells[i];
        if old == state {
            return;
        }
        match old {
            VoxelState::Free => self.counts.free -= 1,
            VoxelState::Occupied => self.counts.occupied -= 1,
            VoxelState::Unknown => self.counts.unknown -= 1,
        }
        match state {
            VoxelState::Free => self.counts.free += 1,
            VoxelState::Occupied => self.counts.occupied += 1,
            VoxelState::Unknown => self.counts.unknown += 1,
        }
        self.cells[i] = state;
    }

    /// Face neighbours of `idx` that lie inside the grid.
    pub fn face_neighbors(&self, idx: VoxelIndex) -> impl Iterator<Item = VoxelIndex> + '_ {
        const OFFSETS: [[i64; 3]; 6] = [
            [-1, 0, 0],
            [1, 0, 0],
            [0, -1, 0],
            [0, 1, 0],
            [0, 0, -1],
            [0, 0, 1],
        ];
        OFFSETS.iter().filter_map(move |o| self.offset(idx, *o))
    }

    pub fn offset(&self, idx: VoxelIndex, o: [i64; 3]) -> Option<VoxelIndex> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = idx[a] as i64 + o[a];
            if v < 0 || v >= self.dims[a] as i64 {
                return None;
            }
            out[a] = v as usize;
        }
        Some(out)
    }

    /// Walks the voxels crossed by the ray `origin + t * dir`, `t >= 0`, in
    /// order, until `t_enter > max_t`, the ray leaves the grid, or `visit`
    /// breaks.
    ///
    /// Voxels the ray only touches at an edge or corner are not visited: when
    /// the exit times of several axes coincide exactly, all of them are
    /// stepped together.
    pub fn traverse<F>(&self, origin: &Vec3, dir: &Vec3, max_t: f64, mut visit: F) -> Result<()>
    where
        F: FnMut(VoxelVisit) -> ControlFlow<()>,
    {
        let start = self.voxel_of(origin).ok_or_else(|| Error::out_of_bounds(origin))?;
        let mut idx = [start[0] as i64, start[1] as i64, start[2] as i64];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        for a in 0..3 {
            if dir[a] > 0.0 {
                step[a] = 1;
            } else if dir[a] < 0.0 {
                step[a] = -1;
            }
        }
        let boundary_t = |a: usize, idx_a: i64, step_a: i64| -> f64 {
            let face = if step_a > 0 { idx_a + 1 } else { idx_a };
            (self.origin[a] + face as f64 * self.resolution - origin[a]) / dir[a]
        };
        for a in 0..3 {
            if step[a] != 0 {
                t_max[a] = boundary_t(a, idx[a], step[a]);
            }
        }
        let mut t = 0.0;
        loop {
            if t > max_t {
                return Ok(());
            }
            let t_exit = t_max[0].min(t_max[1]).min(t_max[2]);
            let index = [idx[0] as usize, idx[1] as usize, idx[2] as usize];
            let v = VoxelVisit {
                index,
                linear: self.linear(index),
                t_enter: t,
                t_exit,
            };
            if visit(v).is_break() || !t_exit.is_finite() {
                return Ok(());
            }
            for a in 0..3 {
                if t_max[a] == t_exit {
                    idx[a] += step[a];
                    if idx[a] < 0 || idx[a] >= self.dims[a] as i64 {
                        return Ok(());
                    }
                    t_max[a] = boundary_t(a, idx[a], step[a]);
                }
            }
            t = t_exit;
        }
    }

    /// First non-Free voxel along the ray within `max_range`.
    pub fn raycast(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        max_range: f64,
    ) -> Result<Option<(VoxelIndex, VoxelState)>> {
        let mut found = None;
        self.traverse(origin, dir, max_range, |v| {
            if v.t_enter >= max_range && v.t_enter > 0.0 {
                return ControlFlow::Break(());
            }
            let s = self.cells[v.linear];
            if s != VoxelState::Free {
                found = Some((v.index, s));
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
        Ok(found)
    }

    /// Integrates a scan taken from `origin`.
    ///
    /// Every voxel a beam crosses before `min(range, update_range)` becomes
    /// Free; a beam that hit a surface within `update_range` marks the voxel
    /// containing the hit point Occupied. Within one scan Occupied marks win
    /// over Free marks from other beams.
    pub fn integrate_scan(
        &mut self,
        origin: &Vec3,
        beams: &[Beam],
        update_range: f64,
    ) -> Result<ScanUpdate> {
        if !(update_range > 0.0) {
            return Err(Error::SensorConfig(format!(
                "map update range must be positive, got {update_range}"
            )));
        }
        if !self.contains(origin) {
            return Err(Error::out_of_bounds(origin));
        }
        let mut free = Vec::new();
        let mut occupied = Vec::new();
        for beam in beams {
            let limit = beam.range.min(update_range);
            let hit_inside = beam.hit && beam.range <= update_range;
            self.traverse(origin, &beam.dir, limit, |v| {
                if hit_inside && v.t_enter <= beam.range && beam.range < v.t_exit {
                    occupied.push(v.linear);
                    return ControlFlow::Break(());
                }
                if v.t_enter >= limit {
                    return ControlFlow::Break(());
                }
                free.push(v.linear);
                ControlFlow::Continue(())
            })?;
        }
        occupied.sort_unstable();
        occupied.dedup();
        let mut update = ScanUpdate::default();
        for i in free {
            if occupied.binary_search(&i).is_ok() {
                continue;
            }
            let old = self.cells[i];
            if old != VoxelState::Free {
                update.newly_free += 1;
                if old == VoxelState::Unknown {
                    update.newly_known += 1;
                }
                self.set_linear(i, VoxelState::Free);
            }
        }
        for i in occupied {
            let old = self.cells[i];
            if old != VoxelState::Occupied {
                update.newly_occupied += 1;
                if old == VoxelState::Unknown {
                    update.newly_known += 1;
                }
                self.set_linear(i, VoxelState::Occupied);
            }
        }
        Ok(update)
    }

    /// Inclusive voxel index range overlapping the open box, clamped to the
    /// grid. `None` if the box reaches outside the grid.
    fn overlap_range(&self, b: &Aabb) -> Option<([usize; 3], [usize; 3])> {
        const EPS: f64 = 1e-9;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let l = ((b.min[a] - self.origin[a]) / self.resolution + EPS).floor();
            let h = ((b.max[a] - self.origin[a]) / self.resolution - EPS).ceil() - 1.0;
            if l < 0.0 || h >= self.dims[a] as f64 || h < l {
                return None;
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        Some((lo, hi))
    }

    /// Whether every voxel overlapping `bbox` centred at `center` is Free
    /// (or Free/Unknown when `unknown_is_obstacle` is false). Overlap with
    /// the outside of the grid counts as a collision.
    pub fn bbox_is_free(&self, center: &Vec3, bbox: &BoundingBox, unknown_is_obstacle: bool) -> bool {
        let Some((lo, hi)) = self.overlap_range(&bbox.at(center)) else {
            return false;
        };
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                let row = self.dims[0] * (y + self.dims[1] * z);
                for x in lo[0]..=hi[0] {
                    match self.cells[row + x] {
                        VoxelState::Free => {}
                        VoxelState::Unknown if !unknown_is_obstacle => {}
                        _ => return false,
                    }
                }
            }
        }
        true
    }

    /// Voxel indices overlapping the box; out-of-grid parts are dropped.
    pub fn voxels_overlapping(&self, b: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let l = ((b.min[a] - self.origin[a]) / self.resolution + 1e-9).floor().max(0.0);
            let h = (((b.max[a] - self.origin[a]) / self.resolution - 1e-9).ceil() - 1.0)
                .min(self.dims[a] as f64 - 1.0);
            if h < l {
                return out;
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    out.push(self.linear([x, y, z]));
                }
            }
        }
        out
    }

    /// Collision check of the polyline through `positions`: the box swept
    /// along every segment must be free. Touching a voxel face is allowed.
    pub fn is_path_collision_free(
        &self,
        positions: &[Vec3],
        bbox: &BoundingBox,
        unknown_is_obstacle: bool,
    ) -> bool {
        let Some(first) = positions.first() else {
            return false;
        };
        if !self.bbox_is_free(first, bbox, unknown_is_obstacle) {
            return false;
        }
        positions
            .windows(2)
            .all(|w| self.sweep_is_free(&w[0], &w[1], bbox, unknown_is_obstacle))
    }

    fn sweep_is_free(&self, a: &Vec3, b: &Vec3, bbox: &BoundingBox, unknown_is_obstacle: bool) -> bool {
        const EPS: f64 = 1e-9;
        let half = bbox.half_extents();
        let reach = half.add_scalar(0.5 * self.resolution - EPS);
        let d = b - a;
        let pieces = (d.norm() / self.resolution).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let p0 = a + d * (k as f64 / pieces as f64);
            let p1 = a + d * ((k + 1) as f64 / pieces as f64);
            let swept = Aabb::new(p0.inf(&p1) - half, p0.sup(&p1) + half);
            let Some((lo, hi)) = self.overlap_range(&swept) else {
                return false;
            };
            let step = p1 - p0;
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let i = self.linear([x, y, z]);
                        match self.cells[i] {
                            VoxelState::Free => continue,
                            VoxelState::Unknown if !unknown_is_obstacle => continue,
                            _ => {}
                        }
                        let c = self.center_linear(i);
                        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
                        let mut hit = true;
                        for ax in 0..3 {
                            let (lo_c, hi_c) = (c[ax] - reach[ax] - p0[ax], c[ax] + reach[ax] - p0[ax]);
                            if step[ax].abs() < 1e-15 {
                                if !(lo_c < 0.0 && 0.0 < hi_c) {
                                    hit = false;
                                    break;
                                }
                            } else {
                                let (u, v) = (lo_c / step[ax], hi_c / step[ax]);
                                t0 = t0.max(u.min(v));
                                t1 = t1.min(u.max(v));
                            }
                        }
                        if hit && t0 < t1 {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn segment_is_free(&self, a: &Vec3, b: &Vec3, bbox: &BoundingBox, unknown_is_obstacle: bool) -> bool {
        self.is_path_collision_free(&[*a, *b], bbox, unknown_is_obstacle)
    }

    /// Marks every Unknown voxel overlapping the box as Free. Used for the
    /// volume the robot physically occupies.
    pub fn clear_unknown_in_box(&mut self, b: &Aabb) -> usize {
        let mut n = 0;
        for i in self.voxels_overlapping(b) {
            if self.cells[i] == VoxelState::Unknown {
                self.set_linear(i, VoxelState::Free);
                n += 1;
            }
        }
        n
    }

    /// Writes the `VOXMAP v1` dump: one text header line, then one byte per
    /// voxel in x-fastest order.
    pub fn write_voxmap<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "VOXMAP v1 {} {} {} {} {} {} {}",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.resolution,
            self.origin.x,
            self.origin.y,
            self.origin.z
        )?;
        let bytes: Vec<u8> = self.cells.iter().map(|c| c.as_byte()).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_voxmap<R: BufRead>(mut r: R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 9 || parts[0] != "VOXMAP" || parts[1] != "v1" {
            return Err(Error::Format(format!("bad header {:?}", header.trim_end())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number {s:?}")))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad dimension {s:?}")))
        };
        let dims = [int(parts[2])?, int(parts[3])?, int(parts[4])?];
        let resolution = num(parts[5])?;
        let origin = Vec3::new(num(parts[6])?, num(parts[7])?, num(parts[8])?);
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| Error::Format("dims overflow".into()))?;
        let mut bytes = vec![0u8; n];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format(format!("expected {n} voxel bytes")))?;
        let cells = bytes
            .iter()
            .map(|b| VoxelState::from_byte(*b).ok_or_else(|| Error::Format(format!("bad voxel byte {b}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_cells(origin, resolution, dims, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(extent: f64, res: f64) -> OccupancyGrid {
        new_map(Aabb::new(Vec3::zeros(), Vec3::repeat(extent)), res).unwrap()
    }

    #[test]
    fn new_map_dims() {
        let m = cube(2.0, 1.0);
        assert_eq!(m.dims(), [2, 2, 2]);
        assert_eq!(m.counts(), VoxelCounts { free: 0, occupied: 0, unknown: 8 });

        let m = new_map(Aabb::new(Vec3::zeros(), Vec3::new(40.0, 40.0, 8.0)), 0.4).unwrap();
        assert_eq!(m.dims(), [100, 100, 20]);
        assert_eq!(m.len(), 200_000);

        // ceil(1 / 0.3) = ceil(3.33) = 4
        assert_eq!(cube(1.0, 0.3).dims(), [4, 4, 4]);
    }

    #[test]
    fn new_map_rejects_bad_geometry() {
        let b = Aabb::new(Vec3::zeros(), Vec3::repeat(1.0));
        assert!(new_map(b, 0.0).is_err());
        assert!(new_map(b, -0.1).is_err());
        let flat = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0));
        assert!(new_map(flat, 0.1).is_err());
    }

    #[test]
    fn index_round_trip() {
        let m = new_map(Aabb::new(Vec3::new(-1.0, 2.0, 0.5), Vec3::new(3.0, 5.0, 2.0)), 0.25).unwrap();
        for i in 0..m.len() {
            let idx = m.unlinear(i);
            assert_eq!(m.linear(idx), i);
            assert_eq!(m.voxel_of(&m.center(idx)), Some(idx));
        }
        assert_eq!(m.voxel_of(&Vec3::new(-1.01, 3.0, 1.0)), None);
    }

    #[test]
    fn single_beam_without_hit() {
        let mut m = cube(10.0, 1.0);
        let o = Vec3::new(0.0, 0.5, 0.5);
        let beam = Beam { dir: Vec3::x(), range: 3.0, hit: false };
        let u = m.integrate_scan(&o, &[beam], 10.0).unwrap();
        assert_eq!(u.newly_free, 3);
        assert_eq!(m.counts().free, 3);
        assert_eq!(m.counts().occupied, 0);
        assert_eq!(m.get([3, 0, 0]), VoxelState::Unknown);
    }

    #[test]
    fn single_beam_with_hit() {
        let mut m = cube(10.0, 1.0);
        let o = Vec3::new(0.0, 0.5, 0.5);
        let beam = Beam { dir: Vec3::x(), range: 2.5, hit: true };
        m.integrate_scan(&o, &[beam], 10.0).unwrap();
        assert_eq!(m.get([0, 0, 0]), VoxelState::Free);
        assert_eq!(m.get([1, 0, 0]), VoxelState::Free);
        assert_eq!(m.get([2, 0, 0]), VoxelState::Occupied);
        assert_eq!(m.counts().free, 2);
        assert_eq!(m.counts().occupied, 1);
    }

    #[test]
    fn hit_beyond_update_range_marks_no_obstacle() {
        let mut m = new_map(Aabb::new(Vec3::zeros(), Vec3::new(80.0, 1.0, 1.0)), 1.0).unwrap();
        let o = Vec3::new(0.5, 0.5, 0.5);
        let beam = Beam { dir: Vec3::x(), range: 60.0, hit: true };
        m.integrate_scan(&o, &[beam], 50.0).unwrap();
        assert_eq!(m.counts().occupied, 0);
        // voxels entered before t = 50 from x = 0.5: indices 0..=50
        assert_eq!(m.counts().free, 51);
        assert_eq!(m.get([51, 0, 0]), VoxelState::Unknown);
    }

    #[test]
    fn occupied_wins_within_scan() {
        let mut m = cube(10.0, 1.0);
        let o = Vec3::new(0.5, 0.5, 0.5);
        let short = Beam { dir: Vec3::x(), range: 2.5, hit: true };
        let long = Beam { dir: Vec3::x(), range: 6.0, hit: false };
        m.integrate_scan(&o, &[long, short], 10.0).unwrap();
        assert_eq!(m.get([3, 0, 0]), VoxelState::Occupied);
        // a later scan passing cleanly through may free it again
        m.integrate_scan(&o, &[long], 10.0).unwrap();
        assert_eq!(m.get([3, 0, 0]), VoxelState::Free);
    }

    #[test]
    fn integrate_scan_rejects_outside_pose() {
        let mut m = cube(4.0, 1.0);
        let beam = Beam { dir: Vec3::x(), range: 1.0, hit: false };
        assert!(m.integrate_scan(&Vec3::repeat(5.0), &[beam], 10.0).is_err());
        assert!(m.integrate_scan(&Vec3::repeat(0.5), &[beam], 0.0).is_err());
    }

    #[test]
    fn raycast_cases() {
        let mut m = new_map(Aabb::new(Vec3::zeros(), Vec3::new(20.0, 1.0, 1.0)), 1.0).unwrap();
        for x in 0..20 {
            m.set([x, 0, 0], VoxelState::Free);
        }
        let o = Vec3::new(0.5, 0.5, 0.5);
        assert_eq!(m.raycast(&o, &Vec3::x(), 10.0).unwrap(), None);
        m.set([7, 0, 0], VoxelState::Occupied);
        assert_eq!(
            m.raycast(&o, &Vec3::x(), 10.0).unwrap(),
            Some(([7, 0, 0], VoxelState::Occupied))
        );
        assert!(m.raycast(&Vec3::new(-1.0, 0.5, 0.5), &Vec3::x(), 3.0).is_err());
    }

    #[test]
    fn diagonal_tie_steps_all_axes() {
        let m = cube(4.0, 1.0);
        let mut seen = Vec::new();
        let d = Vec3::new(1.0, 1.0, 0.0).normalize();
        m.traverse(&Vec3::new(0.5, 0.5, 0.5), &d, 10.0, |v| {
            seen.push(v.index);
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(seen, vec![[0, 0, 0], [1, 1, 0], [2, 2, 0], [3, 3, 0]]);
    }

    fn corridor(width_voxels: usize) -> OccupancyGrid {
        // 10 m long corridor along x at 0.2 m resolution, centred in y/z
        let mut m = new_map(Aabb::new(Vec3::zeros(), Vec3::new(10.0, 3.0, 3.0)), 0.2).unwrap();
        let [nx, ny, nz] = m.dims();
        let y0 = (ny - width_voxels) / 2;
        let z0 = (nz - width_voxels) / 2;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let inside = (y0..y0 + width_voxels).contains(&y) && (z0..z0 + width_voxels).contains(&z);
                    m.set([x, y, z], if inside { VoxelState::Free } else { VoxelState::Occupied });
                }
            }
        }
        m
    }

    #[test]
    fn collision_corridor_widths() {
        let bbox = BoundingBox::from_dims(0.6, 0.6, 0.6).unwrap();
        // corridor spans y, z in [1.0, 2.0] (5 voxels = 1.0 m)
        let wide = corridor(5);
        let a = Vec3::new(1.0, 1.5, 1.5);
        let b = Vec3::new(9.0, 1.5, 1.5);
        assert!(wide.is_path_collision_free(&[a, b], &bbox, true));
        // 2 voxels = 0.4 m is narrower than the robot
        let narrow = corridor(2);
        let c = Vec3::new(1.0, 1.4, 1.4);
        let d = Vec3::new(9.0, 1.4, 1.4);
        assert!(!narrow.is_path_collision_free(&[c, d], &bbox, true));
    }

    #[test]
    fn collision_near_obstacle() {
        let mut m = cube(4.0, 0.2);
        for i in 0..m.len() {
            m.set_linear(i, VoxelState::Free);
        }
        let bbox = BoundingBox::from_dims(0.6, 0.6, 0.6).unwrap();
        let a = Vec3::new(1.0, 2.0, 2.0);
        let b = Vec3::new(3.0, 2.0, 2.0);
        assert!(m.is_path_collision_free(&[a, b], &bbox, true));
        // obstacle 0.2 m off the path axis, inside the 0.3 m half-extent
        let idx = m.voxel_of(&Vec3::new(2.0, 2.25, 2.0)).unwrap();
        m.set(idx, VoxelState::Occupied);
        assert!(!m.is_path_collision_free(&[a, b], &bbox, true));
        // unknown only blocks when requested
        m.set(idx, VoxelState::Unknown);
        assert!(!m.is_path_collision_free(&[a, b], &bbox, true));
        assert!(m.is_path_collision_free(&[a, b], &bbox, false));
        // leaving the grid is a collision
        assert!(!m.is_path_collision_free(&[Vec3::new(0.1, 2.0, 2.0)], &bbox, false));
    }

    #[test]
    fn voxmap_round_trip() {
        let mut m = new_map(Aabb::new(Vec3::new(-1.5, 0.0, 2.0), Vec3::new(1.5, 2.0, 3.0)), 0.5).unwrap();
        m.set([1, 2, 0], VoxelState::Free);
        m.set([2, 3, 1], VoxelState::Occupied);
        let mut buf = Vec::new();
        m.write_voxmap(&mut buf).unwrap();
        assert!(buf.starts_with(b"VOXMAP v1 6 4 2 0.5 -1.5 0 2\n"));
        let back = OccupancyGrid::read_voxmap(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert!(OccupancyGrid::read_voxmap(&b"VOXMAP v2 1 1 1 1 0 0 0\n\x00"[..]).is_err());
        assert!(OccupancyGrid::read_voxmap(&b"VOXMAP v1 2 1 1 1 0 0 0\n\x00"[..]).is_err());
    }
}
