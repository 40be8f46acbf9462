//! Maneuver commands: corridors with velocity objectives for structured
//! driving, timed trajectories for everything else.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Point, Polyline, Pose};
use crate::world::{EgoState, LaneGraphMap, LaneId, RouteInfo, Side, TrackedObject};

/// Arclength spacing of corridor samples.
pub const CORRIDOR_STEP: f64 = 1.0;
const CURVATURE_EPS: f64 = 1e-6;
const CURVATURE_BASE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorridorError {
    #[error("no reachable {0} neighbour lane")]
    NotApplicable(Side),
    #[error("lane `{0}` is not routable")]
    Unroutable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityObjective {
    pub s: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Open,
    Goal,
    ForcedLaneChange,
}

impl Terminal {
    pub fn stops(self) -> bool {
        !matches!(self, Terminal::Open)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorridorKind {
    Follow,
    Change {
        side: Side,
        start_lane: LaneId,
        target_lane: LaneId,
        /// Corridor arclength up to which the start lane is part of the corridor.
        start_portion: f64,
    },
}

/// Stretch of the corridor that runs along one lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneSpan {
    pub lane: LaneId,
    pub start: f64,
    pub end: f64,
}

/// Drivable area along a base line, with bounds and reference expressed as
/// lateral offsets (left positive) at every base sample.
#[derive(Debug, Clone)]
pub struct Corridor {
    pub base: Polyline,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub reference: Vec<f64>,
    pub speed_limits: Vec<f64>,
    pub spans: Vec<LaneSpan>,
    pub kind: CorridorKind,
    pub terminal: Terminal,
    pub velocity_objectives: Vec<VelocityObjective>,
}

impl Corridor {
    pub fn length(&self) -> f64 {
        self.base.length()
    }

    fn interp(&self, values: &[f64], s: f64) -> f64 {
        let pts = self.base.points();
        if values.len() < 2 || pts.len() < 2 {
            return values.first().copied().unwrap_or(0.0);
        }
        // Samples are evenly spaced except for the last one.
        let f = (s.max(0.0) / CORRIDOR_STEP).min((values.len() - 1) as f64);
        let i = (f.floor() as usize).min(values.len() - 2);
        let s_i = i as f64 * CORRIDOR_STEP;
        let s_j = if i + 1 == values.len() - 1 { self.length() } else { s_i + CORRIDOR_STEP };
        let t = ((s - s_i) / (s_j - s_i).max(1e-9)).clamp(0.0, 1.0);
        values[i] + (values[i + 1] - values[i]) * t
    }

    pub fn left_at(&self, s: f64) -> f64 {
        self.interp(&self.left, s)
    }

    pub fn right_at(&self, s: f64) -> f64 {
        self.interp(&self.right, s)
    }

    pub fn reference_at(&self, s: f64) -> f64 {
        self.interp(&self.reference, s)
    }

    fn offset_line(&self, values: &[f64]) -> Polyline {
        let pts = self.base.points();
        let mut s = 0.0;
        let mut out = Vec::with_capacity(pts.len());
        for (i, _) in pts.iter().enumerate() {
            if i > 0 {
                s += pts[i - 1].distance(pts[i]);
            }
            out.push(self.base.offset_point(s, values[i]));
        }
        Polyline::new(out)
    }

    pub fn left_bound(&self) -> Polyline {
        self.offset_line(&self.left)
    }

    pub fn right_bound(&self) -> Polyline {
        self.offset_line(&self.right)
    }

    pub fn reference_line(&self) -> Polyline {
        self.offset_line(&self.reference)
    }

    pub fn lane_at(&self, s: f64) -> Option<LaneId> {
        self.spans
            .iter()
            .find(|sp| s >= sp.start && s <= sp.end)
            .or(self.spans.last())
            .map(|sp| sp.lane)
    }

    /// Target speed in force at `s`.
    pub fn objective_at(&self, s: f64) -> f64 {
        let mut v = self.velocity_objectives.first().map_or(0.0, |o| o.speed);
        for o in &self.velocity_objectives {
            if o.s <= s {
                v = o.speed;
            }
        }
        v
    }

    /// Lateral containment of a point with extra half-width `margin`.
    pub fn contains(&self, p: Point, margin: f64) -> bool {
        let pr = self.base.project(p);
        if pr.s < -margin || pr.s > self.length() + margin {
            return false;
        }
        let s = pr.s.clamp(0.0, self.length());
        pr.lateral <= self.left_at(s) + margin && pr.lateral >= self.right_at(s) - margin
    }

    /// Caps every objective at `speed`.
    pub fn limit_speed(&mut self, speed: f64) {
        for o in &mut self.velocity_objectives {
            o.speed = o.speed.min(speed.max(0.0));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectFlag {
    AccLeading,
    TargetLaneLeading,
    TargetLaneFollowing,
    YieldTo,
    VirtualStop,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ManeuverVariant {
    pub flagged: Vec<(String, ObjectFlag)>,
    pub homotopy: String,
}

impl ManeuverVariant {
    pub fn flag_of(&self, id: &str) -> Option<ObjectFlag> {
        self.flagged.iter().find(|(o, _)| o == id).map(|(_, f)| *f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LaneChangeStatus {
    pub id: u64,
    pub start_lane: LaneId,
    pub target_lane: LaneId,
    pub aborting: bool,
}

#[derive(Debug, Clone)]
pub struct CorridorCommand {
    pub corridor: Corridor,
    pub variant: ManeuverVariant,
    /// Extra objects the command adds, such as virtual stop lines.
    pub virtual_objects: Vec<TrackedObject>,
    pub turn_signal: Option<Side>,
    pub lane_change: Option<LaneChangeStatus>,
}

impl CorridorCommand {
    pub fn new(corridor: Corridor, variant: ManeuverVariant) -> Self {
        Self { corridor, variant, virtual_objects: Vec::new(), turn_signal: None, lane_change: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    /// Absolute simulation time.
    pub t: f64,
    pub pose: Pose,
    /// Signed speed; negative when reversing.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("trajectory timestamps must be strictly increasing (index {0})")]
pub struct TrajectoryError(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCommand {
    points: Vec<TrajectoryPoint>,
}

impl TrajectoryCommand {
    pub fn new(points: Vec<TrajectoryPoint>) -> Result<Self, TrajectoryError> {
        if points.is_empty() {
            return Err(TrajectoryError(0));
        }
        if let Some(i) = points.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(TrajectoryError(i + 1));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn end_time(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t)
    }

    /// Interpolated state at `t`, holding the first or last point outside
    /// the covered interval.
    pub fn sample(&self, t: f64) -> TrajectoryPoint {
        let p = &self.points;
        if t <= p[0].t {
            return p[0];
        }
        let i = p.partition_point(|q| q.t <= t);
        if i >= p.len() {
            let last = p[p.len() - 1];
            return TrajectoryPoint { speed: 0.0, ..last };
        }
        let (a, b) = (p[i - 1], p[i]);
        let f = (t - a.t) / (b.t - a.t);
        let pos = a.pose.position().lerp(b.pose.position(), f);
        let dh = crate::geometry::normalize_angle(b.pose.heading - a.pose.heading);
        TrajectoryPoint {
            t,
            pose: Pose::new(pos.x, pos.y, a.pose.heading + dh * f),
            speed: a.speed + (b.speed - a.speed) * f,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ManeuverCommand {
    Corridor(Box<CorridorCommand>),
    Trajectory(TrajectoryCommand),
}

impl ManeuverCommand {
    pub fn kind(&self) -> &'static str {
        match self {
            ManeuverCommand::Corridor(_) => "corridor",
            ManeuverCommand::Trajectory(_) => "trajectory",
        }
    }

    pub fn as_corridor(&self) -> Option<&CorridorCommand> {
        match self {
            ManeuverCommand::Corridor(c) => Some(c),
            ManeuverCommand::Trajectory(_) => None,
        }
    }
}

/// Speed at which lateral acceleration reaches `a_lat` on the given curvature.
pub fn curvature_speed_cap(curvature: f64, a_lat: f64) -> f64 {
    (a_lat / curvature.abs().max(CURVATURE_EPS)).sqrt()
}

struct Samples {
    points: Vec<Point>,
    half_widths: Vec<f64>,
    limits: Vec<f64>,
    spans: Vec<LaneSpan>,
}

/// Samples the lane chain from arclength `s0` on the first lane, ending at
/// the goal when the chain reaches it.
fn sample_chain(map: &LaneGraphMap, route: &RouteInfo, chain: &[LaneId], s0: f64, ends_at_goal: bool) -> Samples {
    let mut pts: Vec<(Point, f64, f64)> = Vec::new();
    let mut spans = Vec::with_capacity(chain.len());
    let mut chain_s = 0.0;
    for (k, &lane_id) in chain.iter().enumerate() {
        let lane = map.lane(lane_id);
        let from = if k == 0 { s0.clamp(0.0, lane.length()) } else { 0.0 };
        let mut to = lane.length();
        if ends_at_goal && k + 1 == chain.len() {
            to = route.goal_s().clamp(from, lane.length());
        }
        let slice = lane.centerline.slice(from, to, CORRIDOR_STEP);
        spans.push(LaneSpan { lane: lane_id, start: chain_s, end: chain_s + (to - from) });
        chain_s += to - from;
        for p in slice.points() {
            pts.push((*p, lane.width / 2.0, lane.speed_limit));
        }
    }
    // Resample the concatenation so spacing is uniform across lane joins.
    let mut raw: Vec<(Point, f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        if raw.last().is_none_or(|q| q.0.distance(p.0) > 1e-6) {
            raw.push(p);
        }
    }
    if raw.is_empty() {
        return Samples { points: vec![], half_widths: vec![], limits: vec![], spans };
    }
    let line = Polyline::new(raw.iter().map(|r| r.0).collect());
    let mut cum = vec![0.0];
    for w in raw.windows(2) {
        cum.push(cum.last().unwrap() + w[0].0.distance(w[1].0));
    }
    let len = line.length();
    let mut samples = Samples {
        points: Vec::new(),
        half_widths: Vec::new(),
        limits: Vec::new(),
        spans,
    };
    let n = (len / CORRIDOR_STEP).ceil() as usize;
    for k in 0..=n {
        let s = (k as f64 * CORRIDOR_STEP).min(len);
        let i = cum.partition_point(|c| *c <= s).saturating_sub(1).min(raw.len() - 1);
        samples.points.push(line.point_at(s));
        samples.half_widths.push(raw[i].1);
        samples.limits.push(raw[i].2);
        if s >= len {
            break;
        }
    }
    // Span boundaries follow the actual resampled length.
    let scale = if chain_s > 0.0 { len / chain_s } else { 1.0 };
    for sp in &mut samples.spans {
        sp.start *= scale;
        sp.end *= scale;
    }
    samples
}

fn terminal_for(route: &RouteInfo, chain: &[LaneId], changes: u32) -> Terminal {
    match chain.last() {
        Some(&l) if l == route.goal_lane() && changes == 0 => Terminal::Goal,
        _ if changes > 0 => Terminal::ForcedLaneChange,
        _ => Terminal::Open,
    }
}

fn finish(samples: Samples, left: Vec<f64>, right: Vec<f64>, reference: Vec<f64>, kind: CorridorKind, terminal: Terminal, a_lat: f64) -> Corridor {
    let mut c = Corridor {
        base: Polyline::new(samples.points.clone()),
        left,
        right,
        reference,
        speed_limits: samples.limits,
        spans: samples.spans,
        kind,
        terminal,
        velocity_objectives: Vec::new(),
    };
    // Polyline::new may merge a coincident final sample.
    let n = c.base.points().len().max(1);
    c.left.truncate(n);
    c.right.truncate(n);
    c.reference.truncate(n);
    c.speed_limits.truncate(n);
    c.velocity_objectives = assign_velocity_objectives(&c, a_lat);
    c
}

/// Corridor along the ego lane and its successors on the route, cut where
/// a required lane change becomes impossible, or at the goal.
pub fn build_follow_corridor(
    map: &LaneGraphMap,
    route: &RouteInfo,
    ego_lane: LaneId,
    ego_pose: &Pose,
    a_lat: f64,
) -> Result<Corridor, CorridorError> {
    let changes = route
        .changes_needed(ego_lane)
        .ok_or_else(|| CorridorError::Unroutable(map.lane(ego_lane).id.clone()))?;
    let chain = route.follow_chain(map, ego_lane);
    let s0 = map.lane(ego_lane).centerline.project(ego_pose.position()).s;
    let terminal = terminal_for(route, &chain, changes);
    let samples = sample_chain(map, route, &chain, s0, terminal == Terminal::Goal);
    let left = samples.half_widths.clone();
    let right = samples.half_widths.iter().map(|w| -w).collect();
    let reference = vec![0.0; samples.points.len()];
    Ok(finish(samples, left, right, reference, CorridorKind::Follow, terminal, a_lat))
}

/// Corridor for changing from `ego_lane` into its neighbour on `side`.
pub fn build_change_corridor(
    map: &LaneGraphMap,
    route: &RouteInfo,
    ego_lane: LaneId,
    side: Side,
    ego: &EgoState,
    d_max_lane_change: f64,
    a_lat: f64,
) -> Result<Corridor, CorridorError> {
    let adj = map
        .lane(ego_lane)
        .adjacent(side)
        .filter(|a| a.reachable)
        .ok_or(CorridorError::NotApplicable(side))?;
    build_transition_corridor(map, route, ego_lane, adj.lane, side, ego, d_max_lane_change, a_lat)
}

/// Length over which the reference line blends onto the target lane.
pub fn transition_length(speed: f64, d_max_lane_change: f64) -> f64 {
    (d_max_lane_change / 2.0).min((3.0 * speed).max(10.0))
}

/// Corridor spanning `from` and its neighbour `to` (lying on `side` of it),
/// continuing along the route from `to`.
#[allow(clippy::too_many_arguments)]
pub fn build_transition_corridor(
    map: &LaneGraphMap,
    route: &RouteInfo,
    from: LaneId,
    to: LaneId,
    side: Side,
    ego: &EgoState,
    d_max_lane_change: f64,
    a_lat: f64,
) -> Result<Corridor, CorridorError> {
    let changes = route
        .changes_needed(to)
        .ok_or_else(|| CorridorError::Unroutable(map.lane(to).id.clone()))?;
    let chain = route.follow_chain(map, to);
    let target = map.lane(to);
    let start = map.lane(from);
    let on_target = target.centerline.project(ego.pose.position());
    let on_start = start.centerline.project(ego.pose.position());
    let terminal = terminal_for(route, &chain, changes);
    let samples = sample_chain(map, route, &chain, on_target.s, terminal == Terminal::Goal);

    let start_portion = d_max_lane_change.min((start.length() - on_start.s.max(0.0)).max(0.0));
    let extra = start.width;
    let mut left: Vec<f64> = samples.half_widths.clone();
    let mut right: Vec<f64> = samples.half_widths.iter().map(|w| -w).collect();
    let mut s = 0.0;
    for i in 0..samples.points.len() {
        if i > 0 {
            s += samples.points[i - 1].distance(samples.points[i]);
        }
        if s <= start_portion + 1e-9 {
            match side {
                Side::Right => left[i] += extra,
                Side::Left => right[i] -= extra,
            }
        }
    }

    let blend = transition_length(ego.speed, d_max_lane_change).min(start_portion.max(1.0));
    let d0 = on_target.lateral;
    let mut reference = Vec::with_capacity(samples.points.len());
    let mut s = 0.0;
    for i in 0..samples.points.len() {
        if i > 0 {
            s += samples.points[i - 1].distance(samples.points[i]);
        }
        let w = if s < blend { 0.5 * (1.0 + (std::f64::consts::PI * s / blend).cos()) } else { 0.0 };
        reference.push((d0 * w).clamp(right[i] + 0.05, left[i] - 0.05));
    }
    let kind = CorridorKind::Change { side, start_lane: from, target_lane: to, start_portion };
    Ok(finish(samples, left, right, reference, kind, terminal, a_lat))
}

/// Target speeds along the corridor from speed limits and curvature, with a
/// final stop objective when the corridor ends at a forced stop.
pub fn assign_velocity_objectives(corridor: &Corridor, a_lat: f64) -> Vec<VelocityObjective> {
    let base = &corridor.base;
    let len = base.length();
    let mut out: Vec<VelocityObjective> = Vec::new();
    let mut s = 0.0;
    for (i, limit) in corridor.speed_limits.iter().enumerate() {
        if i > 0 {
            s += base.points()[i - 1].distance(base.points()[i]);
        }
        let cap = curvature_speed_cap(base.curvature_at(s, CURVATURE_BASE), a_lat);
        let target = if cap < *limit { (cap * 10.0).floor() / 10.0 } else { *limit };
        if out.last().is_none_or(|o| (o.speed - target).abs() > 1e-9) {
            out.push(VelocityObjective { s: s.min(len), speed: target });
        }
    }
    if out.is_empty() {
        out.push(VelocityObjective { s: 0.0, speed: 0.0 });
    }
    if corridor.terminal.stops() {
        out.push(VelocityObjective { s: len, speed: 0.0 });
    }
    out
}

/// Assigns each object at most one role relative to the corridor.
pub fn flag_objects(corridor: &Corridor, objects: &[TrackedObject], ego: &EgoState, homotopy: &str) -> ManeuverVariant {
    let ego_s = corridor.base.project(ego.pose.position()).s;
    let mut flagged = Vec::new();
    for obj in objects {
        let flag = if obj.is_virtual_stop {
            Some(ObjectFlag::VirtualStop)
        } else {
            classify(corridor, obj, ego_s)
        };
        if let Some(f) = flag {
            flagged.push((obj.id.clone(), f));
        }
    }
    ManeuverVariant { flagged, homotopy: homotopy.to_string() }
}

fn classify(corridor: &Corridor, obj: &TrackedObject, ego_s: f64) -> Option<ObjectFlag> {
    let hw = obj.shape.width / 2.0;
    let pr = corridor.base.project(obj.pose.position());
    if corridor.contains(obj.pose.position(), hw) {
        let ahead = pr.s > ego_s;
        return match corridor.kind {
            CorridorKind::Follow => ahead.then_some(ObjectFlag::AccLeading),
            CorridorKind::Change { side, .. } => {
                let s = pr.s.clamp(0.0, corridor.length());
                // The base line is the target centerline; the far bound on
                // the side away from the start lane is the target lane edge.
                let target_half = match side {
                    Side::Right => -corridor.right_at(s),
                    Side::Left => corridor.left_at(s),
                };
                if pr.lateral.abs() <= target_half {
                    Some(if ahead { ObjectFlag::TargetLaneLeading } else { ObjectFlag::TargetLaneFollowing })
                } else {
                    ahead.then_some(ObjectFlag::AccLeading)
                }
            }
        };
    }
    // Same-lane traffic behind the corridor start is following, not crossing.
    if pr.s <= 0.0 && pr.lateral <= corridor.left_at(0.0) + hw && pr.lateral >= corridor.right_at(0.0) - hw {
        return None;
    }
    predicted_entry(corridor, obj, ego_s).map(|_| ObjectFlag::YieldTo)
}

/// Corridor arclength where the object's prediction first enters the
/// corridor ahead of `ego_s`.
pub fn predicted_entry(corridor: &Corridor, obj: &TrackedObject, ego_s: f64) -> Option<f64> {
    let hw = obj.shape.width / 2.0;
    obj.prediction.iter().filter(|tp| tp.t > 0.0).find_map(|tp| {
        let p = tp.pose.position();
        let s = corridor.base.project(p).s;
        (corridor.contains(p, hw) && s > ego_s).then_some(s)
    })
}
