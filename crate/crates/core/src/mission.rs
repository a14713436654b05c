//! Mission controller: switches between local exploration, global
//! repositioning and homing, flies the chosen paths against the simulated
//! world, integrates scans, and keeps the endurance budget.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    frontier_step, nbvp_step, FrontierBaselineConfig, FrontierDecision, FrontierMemory, NbvpBaselineConfig,
};
use crate::error::{Error, Result};
use crate::global_planner::{
    detect_frontiers, plan_home, plan_to_frontier, roadmap_distance_home, update_graph, GlobalGraph,
    GlobalPlannerConfig, MissionBudget,
};
use crate::local_planner::{best_path, build_tree, check_local_completion, LocalPlannerConfig};
use crate::motion_primitives::{Command, MotionModel, RobotState};
use crate::path::{resample, Path};
use crate::sensor_sim::{simulate_scan, GroundTruthEnv, SensorConfig};
use crate::voxel_map::{BoundingBox, OccupancyGrid};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Mb,
    Frontier,
    Nbvp,
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mb" => Ok(PlannerKind::Mb),
            "frontier" => Ok(PlannerKind::Frontier),
            "nbvp" => Ok(PlannerKind::Nbvp),
            other => Err(Error::Config(format!("unknown planner '{other}'"))),
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::Mb => "mb",
            PlannerKind::Frontier => "frontier",
            PlannerKind::Nbvp => "nbvp",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DoneReason {
    Completed,
    Budget,
    Aborted,
}

impl DoneReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DoneReason::Completed => "completed",
            DoneReason::Budget => "budget",
            DoneReason::Aborted => "aborted",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    LocalExploration,
    GlobalRepositioning,
    Homing,
    Done(DoneReason),
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::LocalExploration => "local",
            Mode::GlobalRepositioning => "global",
            Mode::Homing => "homing",
            Mode::Done(_) => "done",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MissionState {
    pub mode: Mode,
    pub robot: RobotState,
    pub budget: MissionBudget,
    pub iteration: usize,
}

/// Everything a mission needs besides the world.
#[derive(Clone, Debug)]
pub struct MissionConfig {
    pub planner: PlannerKind,
    /// Sensor used to update the map.
    pub sensor: SensorConfig,
    /// Sensor model used to evaluate gain when planning.
    pub gain_sensor: SensorConfig,
    pub motion: MotionModel,
    pub local: LocalPlannerConfig,
    pub global: GlobalPlannerConfig,
    pub frontier: FrontierBaselineConfig,
    pub nbvp: NbvpBaselineConfig,
    pub bbox: BoundingBox,
    /// Box around home, length/width/height in m, whose Unknown voxels are
    /// marked Free before the first scan. It must be free in the world.
    /// Zero leaves only the robot's own box.
    pub init_clear: [f64; 3],
    pub map_resolution: f64,
    pub total_endurance: f64,
    pub homing_margin: f64,
    pub nominal_speed: f64,
    /// Return home when the budget runs low. When false the mission simply
    /// stops once the budget is spent.
    pub homing: bool,
    /// Scan spacing along flown global paths, m.
    pub scan_spacing: f64,
    /// Consecutive local steps without new voxels before local completion.
    pub stall_limit: usize,
    pub max_steps: usize,
    /// Record wall-clock planning time (makes metrics non-reproducible).
    pub wall_clock: bool,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            planner: PlannerKind::Mb,
            sensor: SensorConfig::default(),
            gain_sensor: SensorConfig::default(),
            motion: MotionModel::default(),
            local: LocalPlannerConfig::default(),
            global: GlobalPlannerConfig::default(),
            frontier: FrontierBaselineConfig::default(),
            nbvp: NbvpBaselineConfig::default(),
            bbox: BoundingBox::from_dims(0.6, 0.6, 0.6).expect("positive"),
            init_clear: [0.0; 3],
            map_resolution: 0.2,
            total_endurance: 900.0,
            homing_margin: 1.3,
            nominal_speed: 2.0,
            homing: true,
            scan_spacing: 1.0,
            stall_limit: 10,
            max_steps: 100_000,
            wall_clock: false,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.gain_sensor.validate()?;
        self.motion.validate()?;
        self.local.validate()?;
        self.global.validate()?;
        self.frontier.validate()?;
        self.nbvp.validate()?;
        MissionBudget::new(self.total_endurance, self.homing_margin, self.nominal_speed)?;
        if !(self.map_resolution > 0.0) || !(self.scan_spacing > 0.0) {
            return Err(Error::Config("map_resolution and scan_spacing must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub t: f64,
    pub mode: &'static str,
    pub position: Vec3,
    pub explored_m3: f64,
    pub free_voxels: usize,
    pub occupied_voxels: usize,
    pub unknown_voxels: usize,
    pub tree_nodes: usize,
    pub best_gain: f64,
    pub plan_wall_ms: f64,
}

pub const METRICS_HEADER: &str =
    "t_s,mode,x,y,z,explored_m3,free_voxels,occupied_voxels,unknown_voxels,tree_nodes,best_gain,plan_wall_ms";

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.3},{},{:.3},{:.3},{:.3},{:.3},{},{},{},{},{:.4},{:.3}",
            self.t,
            self.mode,
            self.position.x,
            self.position.y,
            self.position.z,
            self.explored_m3,
            self.free_voxels,
            self.occupied_voxels,
            self.unknown_voxels,
            self.tree_nodes,
            self.best_gain,
            self.plan_wall_ms
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct MissionLog {
    pub records: Vec<MetricsRecord>,
    /// Mode sequence, with global steps labelled by their outcome.
    pub transitions: Vec<String>,
    /// Notable events with their simulated time.
    pub events: Vec<(f64, String)>,
    pub termination: Option<DoneReason>,
    /// Executed samples at which the robot box overlapped ground-truth
    /// Occupied voxels.
    pub collisions: usize,
    pub samples_checked: usize,
    pub homing_by_budget: bool,
    pub homing_started_at: Option<f64>,
    /// Every executed position, in order.
    pub trajectory: Vec<Vec3>,
}

impl MissionLog {
    pub fn has_event(&self, name: &str) -> bool {
        self.events.iter().any(|(_, e)| e == name)
    }

    pub fn write_metrics<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{METRICS_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }

    /// Whether `sequence` occurs, in order but not necessarily contiguously,
    /// in the transition log.
    pub fn contains_subsequence(&self, sequence: &[&str]) -> bool {
        let mut it = self.transitions.iter();
        sequence.iter().all(|want| it.any(|t| t == want))
    }
}

struct Flight {
    positions: Vec<Vec3>,
    truncated: bool,
    newly_known: usize,
}

/// Rest-to-rest velocity profile over a path of known length.
#[derive(Clone, Copy, Debug)]
struct Trapezoid {
    length: f64,
    peak: f64,
    accel: f64,
    ramp: f64,
}

impl Trapezoid {
    fn new(length: f64, speed: f64, accel: f64) -> Self {
        let peak = speed.min((accel * length).sqrt());
        Self {
            length,
            peak,
            accel,
            ramp: peak * peak / (2.0 * accel),
        }
    }

    fn duration(&self) -> f64 {
        if self.peak <= 0.0 {
            return 0.0;
        }
        2.0 * self.peak / self.accel + (self.length - 2.0 * self.ramp).max(0.0) / self.peak
    }

    /// Time at which arc length `s` is reached.
    fn time_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length);
        if s <= self.ramp {
            (2.0 * s / self.accel).sqrt()
        } else if s <= self.length - self.ramp {
            self.peak / self.accel + (s - self.ramp) / self.peak
        } else {
            self.duration() - (2.0 * (self.length - s) / self.accel).sqrt()
        }
    }

    fn speed_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length);
        self.peak
            .min((2.0 * self.accel * s).sqrt())
            .min((2.0 * self.accel * (self.length - s)).sqrt())
    }
}

pub struct Mission<'a> {
    env: &'a GroundTruthEnv,
    pub config: MissionConfig,
    pub state: MissionState,
    pub map: OccupancyGrid,
    pub graph: GlobalGraph,
    pub log: MissionLog,
    rng: ChaCha8Rng,
    frontier_memory: FrontierMemory,
    stalls: usize,
    /// Frontier positions whose neighbourhood turned out to hold nothing
    /// the local planner could use.
    reposition_blacklist: Vec<Vec3>,
    last_reposition: Option<Vec3>,
    local_steps_since_reposition: usize,
    homing_reason: DoneReason,
    bbox: BoundingBox,
}

impl<'a> Mission<'a> {
    pub fn new(env: &'a GroundTruthEnv, config: MissionConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let grid = env.grid();
        let map = OccupancyGrid::blank_like(grid);
        if (map.resolution() - config.map_resolution).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "map resolution {} does not match environment resolution {}",
                config.map_resolution,
                map.resolution()
            )));
        }
        let home = env.home();
        let budget = MissionBudget::new(config.total_endurance, config.homing_margin, config.nominal_speed)?;
        let bbox = config.bbox;
        let mut mission = Self {
            env,
            state: MissionState {
                mode: Mode::LocalExploration,
                robot: RobotState::at_rest(home, 0.0),
                budget,
                iteration: 0,
            },
            map,
            graph: GlobalGraph::new(home),
            log: MissionLog::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            frontier_memory: FrontierMemory::default(),
            stalls: 0,
            reposition_blacklist: Vec::new(),
            last_reposition: None,
            local_steps_since_reposition: 0,
            homing_reason: DoneReason::Completed,
            bbox,
            config,
        };
        if mission.config.init_clear.iter().all(|d| *d > 0.0) {
            let [l, w, h] = mission.config.init_clear;
            let b = BoundingBox::from_dims(l, w, h)?.at(&home);
            if !grid.bbox_is_free(&home, &BoundingBox::from_dims(l, w, h)?, false) {
                return Err(Error::Config("init_clear box around home is not free".into()));
            }
            mission.map.clear_unknown_in_box(&b);
        }
        mission.log.trajectory.push(home);
        mission.check_safety(&home);
        mission.scan()?;
        mission.log.transitions.push("Local".into());
        Ok(mission)
    }

    pub fn is_done(&self) -> bool {
        matches!(self.state.mode, Mode::Done(_))
    }

    pub fn run(mut self) -> Result<MissionOutcome> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(MissionOutcome {
            log: self.log,
            map: self.map,
            graph: self.graph,
            final_state: self.state,
        })
    }

    fn event(&mut self, name: &str) {
        self.log.events.push((self.state.budget.elapsed, name.to_string()));
    }

    fn transition(&mut self, mode: Mode, label: &str) {
        self.state.mode = mode;
        self.log.transitions.push(label.to_string());
        if let Mode::Done(reason) = mode {
            self.log.termination = Some(reason);
        }
    }

    fn finish(&mut self, reason: DoneReason) {
        self.transition(Mode::Done(reason), &format!("Done({})", reason.as_str()));
    }

    fn start_homing(&mut self, reason: DoneReason, by_budget: bool) {
        self.homing_reason = reason;
        self.log.homing_by_budget = by_budget;
        self.log.homing_started_at = Some(self.state.budget.elapsed);
        self.event(if by_budget { "homing_trigger_budget" } else { "homing_trigger_completion" });
        self.transition(Mode::Homing, "Homing");
    }

    fn check_safety(&mut self, p: &Vec3) {
        self.log.samples_checked += 1;
        if !self.env.grid().bbox_is_free(p, &self.bbox, false) {
            self.log.collisions += 1;
        }
    }

    /// Scans at the current pose and marks the robot's own volume as seen.
    fn scan(&mut self) -> Result<usize> {
        let robot = self.state.robot;
        let beams = simulate_scan(self.env, &robot.position, robot.heading, &self.config.sensor)?;
        let update = self.map.integrate_scan(&robot.position, &beams, self.config.sensor.map_update_range)?;
        let cleared = self.map.clear_unknown_in_box(&self.bbox.at(&robot.position));
        Ok(update.newly_known + cleared)
    }

    fn budget_spent(&self) -> bool {
        self.state.budget.elapsed >= self.state.budget.total_endurance - 1e-9
    }

    /// One controller iteration. Appends a metrics record.
    pub fn step(&mut self) -> Result<()> {
        if self.is_done() {
            return Err(Error::Config("mission already finished".into()));
        }
        self.state.iteration += 1;
        let started = Instant::now();
        let mut tree_nodes = 0;
        let mut best_gain = 0.0;
        let mode = self.state.mode;

        if self.state.iteration > self.config.max_steps {
            self.event("step_limit");
            self.finish(DoneReason::Aborted);
        } else if !self.config.homing && self.budget_spent() {
            self.finish(DoneReason::Budget);
        } else {
            match mode {
                Mode::LocalExploration => match self.config.planner {
                    PlannerKind::Mb => (tree_nodes, best_gain) = self.local_step()?,
                    PlannerKind::Frontier => self.frontier_baseline_step()?,
                    PlannerKind::Nbvp => (tree_nodes, best_gain) = self.nbvp_baseline_step()?,
                },
                Mode::GlobalRepositioning => self.global_step()?,
                Mode::Homing => self.homing_step()?,
                Mode::Done(_) => unreachable!(),
            }
        }

        let plan_wall_ms = if self.config.wall_clock {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let counts = self.map.counts();
        self.log.records.push(MetricsRecord {
            t: self.state.budget.elapsed,
            mode: mode.label(),
            position: self.state.robot.position,
            explored_m3: counts.known() as f64 * self.map.voxel_volume(),
            free_voxels: counts.free,
            occupied_voxels: counts.occupied,
            unknown_voxels: counts.unknown,
            tree_nodes,
            best_gain,
            plan_wall_ms,
        });
        Ok(())
    }

    /// Budget rule, evaluated before committing to `lookahead` seconds of
    /// flight that may carry the robot up to `excursion` metres further
    /// from home. Switches to homing and returns true when due.
    fn budget_check(&mut self, lookahead: f64, excursion: f64) -> Result<bool> {
        if !self.config.homing {
            return Ok(false);
        }
        let b = self.state.budget;
        let tth = match roadmap_distance_home(&self.graph, &self.state.robot.position, &self.map, &self.bbox) {
            Ok(d) => (d + excursion) / b.nominal_speed,
            Err(_) => {
                self.event("home_unreachable");
                self.finish(DoneReason::Aborted);
                return Ok(true);
            }
        };
        if b.homing_due(tth, lookahead) {
            self.start_homing(DoneReason::Budget, true);
            return Ok(true);
        }
        Ok(false)
    }

    fn enter_global(&mut self) {
        self.event("local_completion");
        self.stalls = 0;
        if self.local_steps_since_reposition <= 1 {
            if let Some(p) = self.last_reposition.take() {
                self.reposition_blacklist.push(p);
            }
        }
        self.state.mode = Mode::GlobalRepositioning;
    }

    fn local_step(&mut self) -> Result<(usize, f64)> {
        let primitives = self.config.local.execute_primitives.max(1);
        let lookahead = primitives as f64 * self.config.motion.primitive_duration;
        if self.budget_check(lookahead, self.config.motion.v_max * lookahead)? {
            return Ok((0, 0.0));
        }
        self.local_steps_since_reposition += 1;

        let tree = match build_tree(
            &self.map,
            &self.state.robot,
            &self.config.motion,
            &self.config.gain_sensor,
            &self.config.local,
            &self.bbox,
        ) {
            Ok(t) => t,
            Err(Error::RootInCollision) => return self.recover().map(|_| (0, 0.0)),
            Err(e) => return Err(e),
        };
        let best = best_path(&tree, &self.config.local);
        let nodes = tree.len();
        let gain = best.gain;

        if check_local_completion(&tree, &self.config.local)
            || best.node == 0
            || best.gain < self.config.local.completion_threshold
            || self.stalls >= self.config.stall_limit
        {
            self.enter_global();
            return Ok((nodes, gain));
        }

        let lineage = tree.lineage(best.node);
        let mut known = 0;
        for &id in lineage.iter().skip(1).take(primitives) {
            let prim = tree.nodes[id].primitive.as_ref().expect("non-root node has a primitive");
            for s in prim.states.iter().skip(1) {
                self.state.robot = *s;
                self.log.trajectory.push(s.position);
                self.check_safety(&s.position);
            }
            self.state.budget.elapsed += prim.duration;
            known += self.scan()?;
            let positions: Vec<Vec3> = prim.positions().collect();
            update_graph(&mut self.graph, &Path::from_positions(&positions, 1.0), &self.map, &self.config.global, &self.bbox);
        }
        if known == 0 {
            self.stalls += 1;
        } else {
            self.stalls = 0;
        }
        Ok((nodes, gain))
    }

    /// Hover in place, then retry the tree once with a half-size box.
    fn recover(&mut self) -> Result<()> {
        self.event("root_in_collision");
        self.hover()?;
        let half = self.bbox.scaled(0.5);
        match build_tree(
            &self.map,
            &self.state.robot,
            &self.config.motion,
            &self.config.gain_sensor,
            &self.config.local,
            &half,
        ) {
            Ok(_) if self.map.bbox_is_free(&self.state.robot.position, &self.bbox, true) => Ok(()),
            _ => {
                self.finish(DoneReason::Aborted);
                Ok(())
            }
        }
    }

    fn hover(&mut self) -> Result<()> {
        let prim = crate::motion_primitives::propagate(&self.state.robot, &Command::stop(), &self.config.motion)?;
        for s in prim.states.iter().skip(1) {
            self.state.robot = *s;
            self.log.trajectory.push(s.position);
            self.check_safety(&s.position);
        }
        self.state.budget.elapsed += prim.duration;
        self.scan()?;
        Ok(())
    }

    fn global_step(&mut self) -> Result<()> {
        let mut frontiers = detect_frontiers(
            &self.map,
            &mut self.graph,
            &self.config.gain_sensor,
            &self.config.global,
            &self.bbox,
        );
        frontiers.retain(|f| !self.reposition_blacklist.iter().any(|b| (b - f.approach).norm() < 1.0));
        let plan = if frontiers.is_empty() {
            None
        } else {
            match plan_to_frontier(
                &mut self.graph,
                &self.state.robot,
                &frontiers,
                &self.map,
                &self.config.global,
                &self.bbox,
                self.config.nominal_speed,
            ) {
                Ok(p) => Some(p),
                Err(Error::NoReachableFrontier) | Err(Error::NoPath(_)) => None,
                Err(e) => return Err(e),
            }
        };
        let Some((plan, chosen)) = plan else {
            self.event("global_completion");
            self.log.transitions.push("Global(completion)".into());
            if self.config.homing {
                self.start_homing(DoneReason::Completed, false);
            } else {
                self.finish(DoneReason::Completed);
            }
            return Ok(());
        };

        if self.config.homing {
            let length = plan.path.length();
            let duration = length / self.config.nominal_speed;
            if self.budget_check(duration, length)? {
                return Ok(());
            }
        }
        self.log.transitions.push("Global(reposition)".into());
        self.event("reposition");
        let target = frontiers[chosen].approach;
        let flight = self.fly(&plan.path.positions(), self.config.nominal_speed)?;
        if flight.truncated {
            self.event("reposition_truncated");
        }
        self.last_reposition = Some(target);
        self.local_steps_since_reposition = 0;
        self.stalls = 0;
        self.transition(Mode::LocalExploration, "Local");
        Ok(())
    }

    fn homing_step(&mut self) -> Result<()> {
        const REPLANS: usize = 5;
        for _ in 0..REPLANS {
            let plan = match plan_home(
                &mut self.graph,
                &self.state.robot,
                &self.map,
                &self.config.global,
                &self.bbox,
                self.config.nominal_speed,
            ) {
                Ok(p) => p,
                Err(_) => {
                    self.event("home_unreachable");
                    self.finish(DoneReason::Aborted);
                    return Ok(());
                }
            };
            let flight = self.fly(&plan.path.positions(), self.config.nominal_speed)?;
            if !flight.truncated {
                self.event("home_reached");
                let reason = self.homing_reason;
                self.finish(reason);
                return Ok(());
            }
        }
        self.event("home_unreachable");
        self.finish(DoneReason::Aborted);
        Ok(())
    }

    /// Flies a polyline from rest to rest, accelerating at `a_max` up to
    /// `speed`, scanning every `scan_spacing` metres and at the end. Stops
    /// early if a scan reveals an obstacle on the remaining path, or when the
    /// budget is spent and homing is off.
    fn fly(&mut self, points: &[Vec3], speed: f64) -> Result<Flight> {
        let step = 0.5 * self.map.resolution();
        let dense = resample(points, step);
        let total: f64 = dense.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let profile = Trapezoid::new(total, speed, self.config.motion.a_max);
        let mut s = 0.0;
        let mut flown = vec![self.state.robot.position];
        let mut since_scan = 0.0;
        let mut known = 0;
        let mut truncated = false;
        for i in 1..dense.len() {
            if !self.config.homing && self.budget_spent() {
                truncated = true;
                break;
            }
            let seg = dense[i] - dense[i - 1];
            let d = seg.norm();
            if d > 1e-12 {
                self.state.robot = RobotState {
                    position: dense[i],
                    velocity: seg / d * profile.speed_at(s + d),
                    heading: seg.y.atan2(seg.x),
                };
            }
            self.state.budget.elapsed += profile.time_at(s + d) - profile.time_at(s);
            s += d;
            since_scan += d;
            self.log.trajectory.push(dense[i]);
            self.check_safety(&dense[i]);
            flown.push(dense[i]);
            if since_scan >= self.config.scan_spacing && i + 1 < dense.len() {
                since_scan = 0.0;
                known += self.scan()?;
                if !self.map.is_path_collision_free(&dense[i..], &self.bbox, false) {
                    truncated = true;
                    break;
                }
            }
        }
        self.state.robot.velocity = Vec3::zeros();
        known += self.scan()?;
        update_graph(&mut self.graph, &Path::from_positions(&flown, speed), &self.map, &self.config.global, &self.bbox);
        Ok(Flight {
            positions: flown,
            truncated,
            newly_known: known,
        })
    }

    fn frontier_baseline_step(&mut self) -> Result<()> {
        let decision = frontier_step(
            &self.map,
            &self.state.robot.position,
            &self.config.frontier,
            &mut self.frontier_memory,
            &self.bbox,
            self.config.nominal_speed,
        )?;
        match decision {
            FrontierDecision::Complete => {
                self.event("global_completion");
                if self.config.homing {
                    self.start_homing(DoneReason::Completed, false);
                } else {
                    self.finish(DoneReason::Completed);
                }
            }
            FrontierDecision::Retry { blacklisted, .. } => {
                self.event(if blacklisted { "frontier_blacklisted" } else { "frontier_wait" });
                if !self.budget_check(self.config.motion.primitive_duration, 0.0)? {
                    self.hover()?;
                }
            }
            FrontierDecision::Fly { path, .. } => {
                let length = path.length();
                if self.budget_check(length / self.config.nominal_speed, length)? {
                    return Ok(());
                }
                self.fly(&path.positions(), self.config.nominal_speed)?;
            }
        }
        Ok(())
    }

    fn nbvp_baseline_step(&mut self) -> Result<(usize, f64)> {
        let decision = nbvp_step(
            &self.map,
            &self.state.robot.position,
            self.state.robot.heading,
            &self.config.gain_sensor,
            &self.config.nbvp,
            &self.bbox,
            &mut self.rng,
        );
        let nodes = decision.nodes.len();
        let gain = decision.best_gain();
        match decision.first_edge {
            Some([a, b]) if gain >= self.config.nbvp.completion_threshold => {
                self.stalls = 0;
                let length = (b - a).norm();
                if self.budget_check(length / self.config.nominal_speed, length)? {
                    return Ok((nodes, gain));
                }
                let flight = self.fly(&[a, b], self.config.nominal_speed)?;
                if flight.newly_known == 0 && flight.positions.len() <= 1 {
                    self.stalls += 1;
                }
            }
            _ => {
                self.event("nbvp_stall");
                self.stalls += 1;
                if self.stalls >= self.config.stall_limit {
                    self.event("global_completion");
                    if self.config.homing {
                        self.start_homing(DoneReason::Completed, false);
                    } else {
                        self.finish(DoneReason::Completed);
                    }
                } else if !self.budget_check(self.config.motion.primitive_duration, 0.0)? {
                    self.hover()?;
                }
            }
        }
        Ok((nodes, gain))
    }
}

/// Final products of a mission.
pub struct MissionOutcome {
    pub log: MissionLog,
    pub map: OccupancyGrid,
    pub graph: GlobalGraph,
    pub final_state: MissionState,
}

impl MissionOutcome {
    pub fn termination(&self) -> DoneReason {
        self.log.termination.unwrap_or(DoneReason::Aborted)
    }
}

/// Runs a mission to completion. Deterministic given its arguments.
pub fn run_mission(env: &GroundTruthEnv, config: &MissionConfig, seed: u64) -> Result<MissionOutcome> {
    Mission::new(env, config.clone(), seed)?.run()
}
