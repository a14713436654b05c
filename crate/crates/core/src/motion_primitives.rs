//! Robot state, first-order velocity-slew motion model, and the fixed
//! command lattice that fans out the local planner's tree.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Position, linear velocity and heading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Radians in (-pi, pi].
    pub heading: f64,
}

impl RobotState {
    pub fn at_rest(position: Vec3, heading: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            heading: wrap_angle(heading),
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionModel {
    /// m/s
    pub v_max: f64,
    /// m/s^2
    pub a_max: f64,
    /// rad/s
    pub yaw_rate_max: f64,
    /// s
    pub primitive_duration: f64,
    /// s
    pub sample_dt: f64,
    /// Largest vertical speed in the command lattice, m/s.
    pub vz_max: f64,
    /// Half-width of the heading fan, rad.
    pub yaw_fan: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            v_max: 2.0,
            a_max: 2.0,
            yaw_rate_max: PI / 2.0,
            primitive_duration: 2.0,
            sample_dt: 0.1,
            vz_max: 1.0,
            yaw_fan: PI / 2.0,
        }
    }
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("yaw_rate_max", self.yaw_rate_max),
            ("primitive_duration", self.primitive_duration),
            ("sample_dt", self.sample_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::MotionModel(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sample_dt > self.primitive_duration {
            return Err(Error::MotionModel(
                "sample_dt must not exceed primitive_duration".into(),
            ));
        }
        if !(self.vz_max >= 0.0) || !(self.yaw_fan >= 0.0) {
            return Err(Error::MotionModel("vz_max and yaw_fan must be non-negative".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.primitive_duration / self.sample_dt).round().max(1.0) as usize
    }
}

/// Fan-out of the command lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Branching {
    pub headings: usize,
    pub speeds: usize,
    pub vertical: usize,
}

impl Default for Branching {
    fn default() -> Self {
        Self {
            headings: 9,
            speeds: 2,
            vertical: 3,
        }
    }
}

impl Branching {
    pub fn command_count(&self) -> usize {
        self.headings * self.speeds * self.vertical + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Command {
    pub velocity: Vec3,
    /// Heading override; by default the heading follows the horizontal
    /// velocity direction.
    pub heading: Option<f64>,
}

impl Command {
    pub fn stop() -> Self {
        Self {
            velocity: Vec3::zeros(),
            heading: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionPrimitive {
    /// Sampled every `sample_dt`, starting with the input state.
    pub states: Vec<RobotState>,
    pub length: f64,
    pub duration: f64,
}

impl MotionPrimitive {
    pub fn terminal_state(&self) -> &RobotState {
        self.states.last().expect("primitive has at least one state")
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.states.iter().map(|s| s.position)
    }
}

/// `n` evenly spaced values covering `[-half, half]`; a single value is 0.
fn symmetric_steps(n: usize, half: f64) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|k| -half + 2.0 * half * k as f64 / (n - 1) as f64)
        .collect()
}

/// Deterministic command lattice.
///
/// Order: heading offset (from `-yaw_fan` to `+yaw_fan`), then speed (from
/// `v_max` downwards in steps of `v_max / speeds`), then vertical speed (from
/// `-vz_max` to `+vz_max`); the stop command comes last. Commands whose norm
/// would exceed `v_max` are rescaled onto it.
pub fn generate_primitive_commands(
    state: &RobotState,
    model: &MotionModel,
    branching: &Branching,
) -> Vec<Command> {
    let headings = symmetric_steps(branching.headings.max(1), model.yaw_fan);
    let n_speeds = branching.speeds.max(1);
    let speeds: Vec<f64> = (0..n_speeds)
        .map(|k| model.v_max * (n_speeds - k) as f64 / n_speeds as f64)
        .collect();
    let vz_max = model.vz_max.min(model.v_max);
    let verticals = symmetric_steps(branching.vertical.max(1), vz_max);

    let mut out = Vec::with_capacity(headings.len() * speeds.len() * verticals.len() + 1);
    for dpsi in &headings {
        let psi = state.heading + dpsi;
        let (s, c) = psi.sin_cos();
        for speed in &speeds {
            for vz in &verticals {
                let mut v = Vec3::new(c * speed, s * speed, *vz);
                let n = v.norm();
                if n > model.v_max {
                    v *= model.v_max / n;
                }
                out.push(Command {
                    velocity: v,
                    heading: None,
                });
            }
        }
    }
    out.push(Command::stop());
    out
}

/// Propagates `state` under `command` for one primitive duration.
///
/// Velocity slews toward the target at no more than `a_max`, position is the
/// trapezoidal integral of velocity, and heading slews at `yaw_rate_max`.
pub fn propagate(state: &RobotState, command: &Command, model: &MotionModel) -> Result<MotionPrimitive> {
    let target = command.velocity;
    if !(target.norm() <= model.v_max * (1.0 + 1e-12)) {
        return Err(Error::MotionCommand(format!(
            "target speed {:.3} exceeds v_max {:.3}",
            target.norm(),
            model.v_max
        )));
    }
    let target_heading = match command.heading {
        Some(h) => wrap_angle(h),
        None if target.x.hypot(target.y) > 1e-9 => target.y.atan2(target.x),
        None => state.heading,
    };
    let steps = model.steps();
    let dt = model.sample_dt;
    let dv_max = model.a_max * dt;
    let dpsi_max = model.yaw_rate_max * dt;

    let mut states = Vec::with_capacity(steps + 1);
    states.push(*state);
    let mut cur = *state;
    let mut length = 0.0;
    for _ in 0..steps {
        let dv = target - cur.velocity;
        let dv_norm = dv.norm();
        let v_next = if dv_norm > dv_max {
            cur.velocity + dv * (dv_max / dv_norm)
        } else {
            target
        };
        let p_next = cur.position + (cur.velocity + v_next) * (0.5 * dt);
        let dpsi = wrap_angle(target_heading - cur.heading).clamp(-dpsi_max, dpsi_max);
        let next = RobotState {
            position: p_next,
            velocity: v_next,
            heading: wrap_angle(cur.heading + dpsi),
        };
        length += (next.position - cur.position).norm();
        states.push(next);
        cur = next;
    }
    Ok(MotionPrimitive {
        states,
        length,
        duration: steps as f64 * dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hover_is_fixed_point() {
        let s = RobotState::at_rest(Vec3::new(1.0, 2.0, 3.0), 0.3);
        let p = propagate(&s, &Command::stop(), &MotionModel::default()).unwrap();
        assert_eq!(p.states.len(), 21);
        assert!(p.states.iter().all(|x| *x == s));
        assert_eq!(p.length, 0.0);
    }

    #[test]
    fn ramp_to_cruise_displacement() {
        // Oracle: the velocity ramps linearly 0 -> 2 m/s over 1 s (a_max = 2)
        // then holds, so the exact displacement is 0.5*2*1 + 2*1 = 3 m, and
        // the trapezoidal discrete sum over 0.1 s steps is exact for a
        // piecewise-linear velocity with breakpoints on the grid.
        let model = MotionModel::default();
        let s = RobotState::at_rest(Vec3::zeros(), 0.0);
        let cmd = Command { velocity: Vec3::new(2.0, 0.0, 0.0), heading: None };
        let p = propagate(&s, &cmd, &model).unwrap();
        let end = p.terminal_state();
        assert!((end.velocity - cmd.velocity).norm() < 1e-12);
        let discrete: f64 = p
            .states
            .windows(2)
            .map(|w| 0.5 * (w[0].velocity.x + w[1].velocity.x) * model.sample_dt)
            .sum();
        assert!((end.position.x - 3.0).abs() < 1e-9);
        assert!((discrete - 3.0).abs() < 1e-9);
        assert!((p.duration - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_overspeed() {
        let s = RobotState::at_rest(Vec3::zeros(), 0.0);
        let cmd = Command { velocity: Vec3::new(2.5, 0.0, 0.0), heading: None };
        assert!(propagate(&s, &cmd, &MotionModel::default()).is_err());
    }

    #[test]
    fn lattice_size_and_bounds() {
        let model = MotionModel::default();
        let s = RobotState::at_rest(Vec3::zeros(), 1.0);
        let cmds = generate_primitive_commands(&s, &model, &Branching::default());
        assert_eq!(cmds.len(), 55);
        assert_eq!(*cmds.last().unwrap(), Command::stop());
        assert!(cmds.iter().all(|c| c.velocity.norm() <= model.v_max + 1e-12));
        // climbing and descending commands are present
        assert!(cmds.iter().any(|c| c.velocity.z > 0.5));
        assert!(cmds.iter().any(|c| c.velocity.z < -0.5));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn primitives_are_dynamically_feasible(
            vx in -1.3f64..1.3, vy in -1.3f64..1.3, vz in -0.5f64..0.5,
            heading in -3.1f64..3.1,
            pick in 0usize..55,
        ) {
            let model = MotionModel::default();
            let s = RobotState {
                position: Vec3::new(1.0, -2.0, 0.5),
                velocity: Vec3::new(vx, vy, vz),
                heading,
            };
            let cmds = generate_primitive_commands(&s, &model, &Branching::default());
            let p = propagate(&s, &cmds[pick], &model).unwrap();
            prop_assert_eq!(p.states[0], s);
            let mut len = 0.0;
            for w in p.states.windows(2) {
                let dv = (w[1].velocity - w[0].velocity).norm();
                prop_assert!(dv / model.sample_dt <= model.a_max * (1.0 + 1e-9));
                let dpsi = wrap_angle(w[1].heading - w[0].heading).abs();
                prop_assert!(dpsi / model.sample_dt <= model.yaw_rate_max * (1.0 + 1e-9));
                let vbar = (w[0].velocity + w[1].velocity) * 0.5;
                let dp = w[1].position - w[0].position;
                prop_assert!((dp - vbar * model.sample_dt).norm() < 1e-9);
                prop_assert!(w[1].velocity.norm() <= model.v_max * (1.0 + 1e-9));
                len += dp.norm();
            }
            prop_assert!((len - p.length).abs() <= 1e-6 * len.max(1e-12));
            // determinism
            let again = propagate(&s, &cmds[pick], &model).unwrap();
            prop_assert_eq!(again, p);
        }
    }
}
