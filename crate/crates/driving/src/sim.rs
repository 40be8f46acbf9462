//! Closed-loop kinematic simulation of the driving graph.

use std::collections::HashMap;
use std::sync::Arc;

use arbitration_core::SelectionTrace;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::DrivingGraph;
use crate::geometry::{normalize_angle, OrientedRect, Point, Polyline, Pose, Shape};
use crate::maneuver::{CorridorCommand, LaneChangeStatus, ManeuverCommand, predicted_entry, ObjectFlag, TrajectoryCommand};
use crate::params::{BehaviorParams, CostParams};
use crate::world::{EgoState, EnvironmentSnapshot, LaneGraphMap, LaneId, RouteInfo, Side, StaticObstacle, TrackedObject};

pub const WHEELBASE: f64 = 2.7;
pub const MAX_STEER: f64 = 0.6;
/// Longitudinal gain towards the velocity objective, 1/s.
const SPEED_GAIN: f64 = 1.0;
const ACC_GAP_GAIN: f64 = 0.2;
const ACC_SPEED_GAIN: f64 = 0.6;
const TIME_GAP: f64 = 2.0;
const STANDSTILL_GAP: f64 = 5.0;
/// Margin between the front bumper and a virtual stop line.
const STOP_MARGIN: f64 = 1.0;
const GOAL_RADIUS: f64 = 1.5;
const STANDSTILL: f64 = 0.1;
/// How long SafeStop has to hold standstill after parking before the run ends.
const FINAL_HOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub max_duration: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 0.1, max_duration: 120.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimConfigError {
    #[error("dt must lie in (0, 0.5], got {0}")]
    Dt(f64),
    #[error("max_duration must be positive, got {0}")]
    MaxDuration(f64),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimConfigError> {
        if !(self.dt > 0.0 && self.dt <= 0.5) {
            return Err(SimConfigError::Dt(self.dt));
        }
        if !(self.max_duration > 0.0) {
            return Err(SimConfigError::MaxDuration(self.max_duration));
        }
        Ok(())
    }
}

/// Limits used by the corridor follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLimits {
    pub a_cmf: f64,
    pub a_max_brake: f64,
}

impl ControlLimits {
    pub fn new(cost: &CostParams, behavior: &BehaviorParams) -> Self {
        Self { a_cmf: cost.a_cmf, a_max_brake: behavior.a_emergency }
    }
}

fn lookahead(speed: f64) -> f64 {
    speed.max(5.0)
}

/// Bicycle model step with the steering angle and the new speed given.
fn bicycle(ego: &EgoState, steer: f64, v1: f64, dt: f64) -> EgoState {
    let ds = 0.5 * (ego.speed + v1) * dt;
    let h0 = ego.pose.heading;
    let h1 = h0 + ds * steer.tan() / WHEELBASE;
    let hm = 0.5 * (h0 + h1);
    EgoState {
        pose: Pose::new(ego.pose.x + ds * hm.cos(), ego.pose.y + ds * hm.sin(), normalize_angle(h1)),
        speed: v1,
        shape: ego.shape,
        reversing: false,
    }
}

/// Pure pursuit towards the corridor reference line.
fn steering(ego: &EgoState, cmd: &CorridorCommand, s0: f64) -> f64 {
    let c = &cmd.corridor;
    let s_t = (s0 + lookahead(ego.speed)).min(c.length());
    let target = c.base.offset_point(s_t, c.reference_at(s_t));
    let to = target.sub(ego.pose.position());
    let ld = to.norm();
    if ld < 1e-6 {
        return 0.0;
    }
    let alpha = normalize_angle(to.y.atan2(to.x) - ego.pose.heading);
    let kappa = 2.0 * alpha.sin() / ld;
    (kappa * WHEELBASE).atan().clamp(-MAX_STEER, MAX_STEER)
}

/// Acceleration bound from reaching `v_target` after `dist`: brake harder
/// than comfortable once needed, and never accelerate beyond the speed from
/// which a comfortable stop is still possible.
fn envelope(v: f64, v_target: f64, dist: f64, dt: f64, a_cmf: f64) -> f64 {
    let dist = dist.max(0.0);
    let v_allowed = (v_target * v_target + 2.0 * a_cmf * dist).sqrt();
    let cap = (v_allowed - v) / dt;
    if v <= v_target {
        return cap.max(0.0);
    }
    if dist <= 1e-3 {
        return -(v - v_target) / dt;
    }
    let a_req = (v * v - v_target * v_target) / (2.0 * dist);
    if a_req >= a_cmf {
        -a_req
    } else {
        cap
    }
}

/// Advances the ego along a corridor command: pure pursuit laterally, and
/// objective tracking, braking envelope, stop lines and time-gap following
/// longitudinally.
pub fn step_ego_corridor(ego: &EgoState, cmd: &CorridorCommand, objects: &[TrackedObject], limits: ControlLimits, dt: f64) -> EgoState {
    let c = &cmd.corridor;
    let s0 = c.base.project(ego.pose.position()).s;
    let v = ego.speed;
    let half = ego.shape.length / 2.0;

    let mut a = (SPEED_GAIN * (c.objective_at(s0) - v)).clamp(-limits.a_cmf, limits.a_cmf);
    for o in c.velocity_objectives.iter().filter(|o| o.s > s0) {
        a = a.min(envelope(v, o.speed, o.s - s0, dt, limits.a_cmf));
    }
    let stops = cmd.virtual_objects.iter().chain(
        objects
            .iter()
            .filter(|o| o.is_virtual_stop && cmd.variant.flag_of(&o.id) == Some(ObjectFlag::VirtualStop)),
    );
    for stop in stops {
        let dist = c.base.project(stop.pose.position()).s - s0 - half - STOP_MARGIN;
        if dist < -half {
            continue;
        }
        a = a.min(envelope(v, 0.0, dist, dt, limits.a_cmf));
    }
    for o in objects.iter().filter(|o| cmd.variant.flag_of(&o.id) == Some(ObjectFlag::YieldTo)) {
        if let Some(entry) = predicted_entry(c, o, s0) {
            let dist = entry - s0 - half - o.shape.width / 2.0 - STOP_MARGIN;
            if dist >= -half {
                a = a.min(envelope(v, 0.0, dist, dt, limits.a_cmf));
            }
        }
    }
    for o in objects.iter().filter(|o| {
        matches!(cmd.variant.flag_of(&o.id), Some(ObjectFlag::AccLeading | ObjectFlag::TargetLaneLeading))
    }) {
        let pr = c.base.project(o.pose.position());
        let gap = pr.s - s0 - half - o.shape.length / 2.0;
        let v_lead = o.speed * (o.pose.heading - c.base.heading_at(pr.s)).cos();
        let a_acc = ACC_GAP_GAIN * (gap - (TIME_GAP * v + STANDSTILL_GAP)) + ACC_SPEED_GAIN * (v_lead - v);
        a = a.min(a_acc);
    }
    let a = a.clamp(-limits.a_max_brake, limits.a_cmf);
    let v1 = (v + a * dt).max(0.0);
    bicycle(ego, steering(ego, cmd, s0), v1, dt)
}

/// Idealized tracking: the ego is placed on the trajectory at `t + dt`.
pub fn step_ego_trajectory(ego: &EgoState, cmd: &TrajectoryCommand, t: f64, dt: f64) -> EgoState {
    let p = cmd.sample(t + dt);
    EgoState { pose: p.pose, speed: p.speed.abs(), shape: ego.shape, reversing: p.speed < 0.0 }
}

fn velocity(heading: f64, speed: f64) -> Point {
    Point::unit(heading).scale(speed)
}

/// First object (or static obstacle) whose footprint strictly overlaps the
/// ego, with the relative speed at contact.
pub fn detect_collision(ego: &EgoState, objects: &[TrackedObject], obstacles: &[StaticObstacle]) -> Option<(String, f64)> {
    let rect = ego.footprint();
    let v_ego = velocity(ego.pose.heading, if ego.reversing { -ego.speed } else { ego.speed });
    objects
        .iter()
        .filter(|o| !o.is_virtual_stop)
        .find(|o| rect.overlaps(&o.footprint()))
        .map(|o| (o.id.clone(), v_ego.sub(velocity(o.pose.heading, o.speed)).norm()))
        .or_else(|| {
            obstacles
                .iter()
                .find(|o| rect.overlaps(&o.footprint()))
                .map(|o| (o.id.clone(), v_ego.norm()))
        })
}

/// Piecewise-linear speed over time, held at both ends.
fn profile_speed(profile: &[(f64, f64)], t: f64) -> f64 {
    match profile {
        [] => 0.0,
        [(_, v)] => *v,
        _ => {
            let i = profile.partition_point(|(ti, _)| *ti <= t);
            if i == 0 {
                return profile[0].1;
            }
            if i >= profile.len() {
                return profile[profile.len() - 1].1;
            }
            let ((t0, v0), (t1, v1)) = (profile[i - 1], profile[i]);
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

#[derive(Debug, Clone)]
pub enum AgentMotion {
    ConstantVelocity,
    /// Drives along a lane and its first successors with a speed profile of
    /// `(time, speed)` pairs.
    LaneFollowing { path: Polyline, s: f64, profile: Vec<(f64, f64)> },
    /// Passes through `(time, position)` waypoints, then stands still.
    Scripted { waypoints: Vec<(f64, Point)> },
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub id: String,
    pub shape: Shape,
    pub pose: Pose,
    pub speed: f64,
    pub motion: AgentMotion,
}

/// Centerline of `lane` continued through first successors.
pub fn lane_path(map: &LaneGraphMap, lane: LaneId) -> Polyline {
    let mut pts: Vec<Point> = Vec::new();
    let mut seen = vec![false; map.lanes.len()];
    let mut cur = Some(lane);
    while let Some(l) = cur {
        if std::mem::replace(&mut seen[l], true) {
            break;
        }
        pts.extend_from_slice(map.lane(l).centerline.points());
        cur = map.lane(l).successors.first().copied();
    }
    Polyline::new(pts)
}

impl Agent {
    pub fn constant_velocity(id: impl Into<String>, pose: Pose, speed: f64, shape: Shape) -> Self {
        Self { id: id.into(), shape, pose, speed, motion: AgentMotion::ConstantVelocity }
    }

    pub fn lane_following(id: impl Into<String>, map: &LaneGraphMap, lane: LaneId, s: f64, profile: Vec<(f64, f64)>, shape: Shape) -> Self {
        let path = lane_path(map, lane);
        let pose = path.pose_at(s);
        let speed = profile_speed(&profile, 0.0);
        Self { id: id.into(), shape, pose, speed, motion: AgentMotion::LaneFollowing { path, s, profile } }
    }

    pub fn scripted(id: impl Into<String>, waypoints: Vec<(f64, Point)>, shape: Shape) -> Self {
        let mut agent = Self {
            id: id.into(),
            shape,
            pose: Pose::new(0.0, 0.0, 0.0),
            speed: 0.0,
            motion: AgentMotion::Scripted { waypoints },
        };
        agent.place_scripted(0.0);
        agent
    }

    fn place_scripted(&mut self, t: f64) {
        let AgentMotion::Scripted { waypoints } = &self.motion else {
            return;
        };
        let n = waypoints.len();
        if n == 0 {
            return;
        }
        let i = waypoints.partition_point(|(ti, _)| *ti <= t).clamp(1, n.max(2) - 1);
        if n == 1 {
            self.pose = Pose::new(waypoints[0].1.x, waypoints[0].1.y, self.pose.heading);
            return;
        }
        let ((t0, p0), (t1, p1)) = (waypoints[i - 1], waypoints[i]);
        let d = p1.sub(p0);
        let heading = if d.norm() > 1e-9 { d.y.atan2(d.x) } else { self.pose.heading };
        let f = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let p = p0.lerp(p1, f);
        self.pose = Pose::new(p.x, p.y, heading);
        self.speed = if t >= t0 && t < t1 { d.norm() / (t1 - t0) } else { 0.0 };
    }

    /// Advances from `t` to `t + dt`.
    pub fn advance(&mut self, t: f64, dt: f64) {
        match &mut self.motion {
            AgentMotion::ConstantVelocity => {
                self.pose = self.pose.offset(self.speed * dt, 0.0);
            }
            AgentMotion::LaneFollowing { path, s, profile } => {
                let v1 = profile_speed(profile, t + dt);
                *s += 0.5 * (self.speed + v1) * dt;
                self.pose = path.pose_at(*s);
                self.speed = v1;
            }
            AgentMotion::Scripted { .. } => self.place_scripted(t + dt),
        }
    }

    pub fn tracked(&self, horizon: f64, dt: f64) -> TrackedObject {
        TrackedObject::new(self.id.clone(), self.pose, self.speed, self.shape).with_prediction(horizon, dt)
    }
}

/// A fully resolved scenario, ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub map: Arc<LaneGraphMap>,
    pub route: Arc<RouteInfo>,
    pub ego: EgoState,
    pub agents: Vec<Agent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum EventKind {
    LaneChangeStart,
    LaneChangeDone,
    LaneChangeAbort,
    Parked,
    Collision,
    SafeStopEngaged,
    GoalReached,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    Parked,
    Collision,
    Fatal,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommandSummary {
    pub kind: &'static str,
    pub homotopy: Option<String>,
    pub turn_signal: Option<Side>,
    pub lane_change: Option<LaneChangeStatus>,
}

impl CommandSummary {
    fn of(cmd: &ManeuverCommand) -> Self {
        match cmd {
            ManeuverCommand::Corridor(c) => Self {
                kind: cmd.kind(),
                homotopy: Some(c.variant.homotopy.clone()),
                turn_signal: c.turn_signal,
                lane_change: c.lane_change,
            },
            ManeuverCommand::Trajectory(_) => Self { kind: cmd.kind(), homotopy: None, turn_signal: None, lane_change: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EgoRecord {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub lane: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickRecord {
    pub time: f64,
    pub ego: EgoRecord,
    pub selection: SelectionTrace,
    pub command: CommandSummary,
}

impl TickRecord {
    pub fn active_leaf(&self) -> Option<&str> {
        self.selection.active_leaf()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub scenario: String,
    pub seed: u64,
    pub dt: f64,
    pub ticks: Vec<TickRecord>,
    pub events: Vec<Event>,
    pub outcome: Outcome,
}

impl RunTrace {
    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Leaf ids in order of activation, with consecutive repeats collapsed.
    pub fn leaf_sequence(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for leaf in self.ticks.iter().filter_map(|t| t.active_leaf()) {
            if out.last().map(String::as_str) != Some(leaf) {
                out.push(leaf.to_string());
            }
        }
        out
    }
}

fn fully_in(map: &LaneGraphMap, lane: LaneId, rect: &OrientedRect) -> bool {
    let l = map.lane(lane);
    l.contains_rect(rect) || l.successors.iter().any(|&s| map.lane(s).contains_rect(rect))
}

/// Runs the closed loop until the goal is reached, the ego is parked and
/// held by SafeStop, a collision or engine failure occurs, or time runs out.
pub fn run_scenario(
    scenario: &Scenario,
    graph: &mut DrivingGraph,
    behavior: &BehaviorParams,
    cost: &CostParams,
    config: &SimConfig,
) -> RunTrace {
    let dt = config.dt;
    let limits = ControlLimits::new(cost, behavior);
    let map = &scenario.map;
    let mut ego = scenario.ego.clone();
    let mut agents = scenario.agents.clone();
    let mut ticks = Vec::new();
    let mut events = Vec::new();
    let mut ongoing: HashMap<String, LaneChangeStatus> = HashMap::new();
    let mut last_leaf: Option<String> = None;
    let mut parked_at: Option<f64> = None;
    let mut held_since: Option<f64> = None;
    let n_max = (config.max_duration / dt).round() as u64;
    let mut outcome = Outcome::Timeout;

    let event = |events: &mut Vec<Event>, time: f64, kind: EventKind, detail: String| {
        events.push(Event { time, kind, detail });
    };

    for k in 0..=n_max {
        let t = k as f64 * dt;
        let objects: Vec<TrackedObject> =
            agents.iter().map(|a| a.tracked(behavior.prediction_horizon, behavior.prediction_dt)).collect();
        let env = EnvironmentSnapshot::new(t, map.clone(), scenario.route.clone(), ego.clone(), objects);
        let (cmd, selection) = match graph.step(&env, t) {
            Ok(r) => r,
            Err(e) => {
                event(&mut events, t, EventKind::Fatal, e.to_string());
                outcome = Outcome::Fatal;
                break;
            }
        };
        let leaf = selection.active_leaf().map(str::to_string);
        let summary = CommandSummary::of(&cmd);

        // Lane-change bookkeeping, keyed by leaf and maneuver id.
        let current = summary.lane_change.and_then(|s| leaf.clone().map(|l| (format!("{l}#{}", s.id), s)));
        let finished: Vec<String> = ongoing
            .keys()
            .filter(|key| current.as_ref().is_none_or(|(c, _)| c != *key))
            .cloned()
            .collect();
        let mut finished = finished;
        finished.sort();
        for key in finished {
            let status = ongoing.remove(&key).expect("key present");
            if !status.aborting && fully_in(map, status.target_lane, &ego.footprint()) {
                event(&mut events, t, EventKind::LaneChangeDone, format!("{} -> {}", map.lanes[status.start_lane].id, map.lanes[status.target_lane].id));
            }
        }
        if let Some((key, status)) = current {
            match ongoing.get(&key) {
                None => event(&mut events, t, EventKind::LaneChangeStart, format!("{} -> {}", map.lanes[status.start_lane].id, map.lanes[status.target_lane].id)),
                Some(prev) if status.aborting && !prev.aborting => {
                    event(&mut events, t, EventKind::LaneChangeAbort, format!("back to {}", map.lanes[status.start_lane].id))
                }
                _ => {}
            }
            ongoing.insert(key, status);
        }
        if leaf.as_deref() == Some("SafeStop") && last_leaf.as_deref() != Some("SafeStop") {
            event(&mut events, t, EventKind::SafeStopEngaged, String::new());
        }

        ticks.push(TickRecord {
            time: t,
            ego: EgoRecord {
                x: ego.pose.x,
                y: ego.pose.y,
                heading: ego.pose.heading,
                speed: ego.speed,
                lane: env.ego_lane.map(|l| map.lanes[l].id.clone()),
            },
            selection,
            command: summary,
        });

        if leaf.as_deref() == Some("SafeStop") && ego.speed < STANDSTILL && parked_at.is_some() {
            let since = *held_since.get_or_insert(t);
            if t - since >= FINAL_HOLD - 1e-9 {
                outcome = Outcome::Parked;
                break;
            }
        } else {
            held_since = None;
        }
        last_leaf = leaf;
        if k == n_max {
            break;
        }

        ego = match &cmd {
            ManeuverCommand::Corridor(c) => step_ego_corridor(&ego, c, &env.objects, limits, dt),
            ManeuverCommand::Trajectory(tr) => step_ego_trajectory(&ego, tr, t, dt),
        };
        for a in &mut agents {
            a.advance(t, dt);
        }
        let t1 = (k + 1) as f64 * dt;
        let objects: Vec<TrackedObject> = agents.iter().map(|a| a.tracked(0.0, 1.0)).collect();
        if let Some((id, speed)) = detect_collision(&ego, &objects, &map.obstacles) {
            event(&mut events, t1, EventKind::Collision, format!("{id} at {speed:.2} m/s"));
            outcome = Outcome::Collision;
            break;
        }
        match env.goal_spot() {
            Some(spot) => {
                if parked_at.is_none() && ego.pose.distance(&spot.pose) <= behavior.r_min_parking && ego.speed < STANDSTILL {
                    parked_at = Some(t1);
                    event(&mut events, t1, EventKind::Parked, spot.id.clone());
                }
            }
            None => {
                let goal = scenario.route.route.goal;
                if ego.pose.distance(&goal) <= GOAL_RADIUS && ego.speed < STANDSTILL {
                    event(&mut events, t1, EventKind::GoalReached, String::new());
                    outcome = Outcome::GoalReached;
                    break;
                }
            }
        }
    }

    RunTrace { scenario: scenario.name.clone(), seed: config.seed, dt, ticks, events, outcome }
}
