use crate::motion_primitives::RobotState;
use crate::Vec3;

/// A time- or arc-parameterised state sequence.
///
/// `waypoints` indexes the states at which the sensor is evaluated: the
/// primitive endpoints for local paths, every state for a bare sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Path {
    pub states: Vec<RobotState>,
    pub waypoints: Vec<usize>,
}

impl Path {
    pub fn from_states(states: Vec<RobotState>) -> Self {
        let waypoints = (0..states.len()).collect();
        Self { states, waypoints }
    }

    /// Polyline flown at `speed`, with heading along each segment.
    pub fn from_positions(positions: &[Vec3], speed: f64) -> Self {
        let mut states = Vec::with_capacity(positions.len());
        for (i, p) in positions.iter().enumerate() {
            let seg = if i + 1 < positions.len() {
                positions[i + 1] - p
            } else if i > 0 {
                p - positions[i - 1]
            } else {
                Vec3::zeros()
            };
            let n = seg.norm();
            let (velocity, heading) = if n > 1e-12 {
                let v = if i + 1 < positions.len() { seg / n * speed } else { Vec3::zeros() };
                (v, seg.y.atan2(seg.x))
            } else {
                (Vec3::zeros(), 0.0)
            };
            states.push(RobotState { position: *p, velocity, heading });
        }
        let waypoints = if states.is_empty() { vec![] } else { vec![states.len() - 1] };
        Self { states, waypoints }
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.states.iter().map(|s| s.position).collect()
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.positions())
    }

    /// Cumulative arc length at every state.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.states.len());
        let mut acc = 0.0;
        for (i, s) in self.states.iter().enumerate() {
            if i > 0 {
                acc += (s.position - self.states[i - 1].position).norm();
            }
            out.push(acc);
        }
        out
    }

    pub fn first(&self) -> Option<&RobotState> {
        self.states.first()
    }

    pub fn last(&self) -> Option<&RobotState> {
        self.states.last()
    }
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Inserts points so that no segment is longer than `spacing`. Original
/// vertices are kept, so the polyline and its length are unchanged.
pub fn resample(points: &[Vec3], spacing: f64) -> Vec<Vec3> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let mut out = vec![*first];
    for w in points.windows(2) {
        let d = w[1] - w[0];
        let n = (d.norm() / spacing).ceil().max(1.0) as usize;
        for k in 1..n {
            out.push(w[0] + d * (k as f64 / n as f64));
        }
        out.push(w[1]);
    }
    out
}

/// Point at arc length `s` along the polyline (clamped to its ends).
pub fn point_at(points: &[Vec3], s: f64) -> Vec3 {
    let mut acc = 0.0;
    for w in points.windows(2) {
        let l = (w[1] - w[0]).norm();
        if acc + l >= s && l > 0.0 {
            return w[0] + (w[1] - w[0]) * ((s - acc) / l).clamp(0.0, 1.0);
        }
        acc += l;
    }
    *points.last().expect("non-empty polyline")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_keeps_length_and_vertices() {
        let pts = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 2.5, 0.0)];
        let r = resample(&pts, 0.3);
        assert!((polyline_length(&r) - 3.5).abs() < 1e-12);
        assert!(r.contains(&pts[1]));
        assert!(r.windows(2).all(|w| (w[1] - w[0]).norm() <= 0.3 + 1e-12));
        assert_eq!(point_at(&pts, 2.0), Vec3::new(1.0, 1.0, 0.0));
    }
}
