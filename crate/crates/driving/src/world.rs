//! Lane-graph map, route, ego and object state, and the immutable snapshot
//! handed to behaviors each tick.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrientedRect, Point, Polyline, Pose, Shape};

pub type LaneId = usize;

/// Slack added to the half lane width when matching the ego to a lane.
pub const MATCH_MARGIN: f64 = 0.5;
/// Maximum endpoint gap between a lane and its successor.
pub const CONTINUITY_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneKind {
    #[default]
    Urban,
    Highway,
    Onramp,
    Offramp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// +1 for left, -1 for right, matching the sign of lateral offsets.
    /// Capitalized name, as used in block names.
    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "Left",
            Side::Right => "Right",
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacency {
    pub lane: LaneId,
    /// Whether a lane change into `lane` is permitted.
    pub reachable: bool,
}

#[derive(Debug, Clone)]
pub struct Lane {
    pub id: String,
    pub centerline: Polyline,
    pub width: f64,
    pub speed_limit: f64,
    pub successors: Vec<LaneId>,
    pub left: Option<Adjacency>,
    pub right: Option<Adjacency>,
    pub kind: LaneKind,
    pub intersection_arm: bool,
}

impl Lane {
    pub fn length(&self) -> f64 {
        self.centerline.length()
    }

    pub fn adjacent(&self, side: Side) -> Option<Adjacency> {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    /// Fraction of the rectangle's area lying inside this lane's strip.
    pub fn area_fraction(&self, rect: &OrientedRect) -> f64 {
        let samples = rect.area_samples(10, 4);
        let inside = samples
            .iter()
            .filter(|p| {
                let pr = self.centerline.project(**p);
                pr.lateral.abs() <= self.width / 2.0
            })
            .count();
        inside as f64 / samples.len() as f64
    }

    /// True when every corner of the rectangle lies within the lane strip.
    pub fn contains_rect(&self, rect: &OrientedRect) -> bool {
        rect.corners().iter().all(|p| {
            let pr = self.centerline.project(*p);
            pr.lateral.abs() <= self.width / 2.0 + 1e-9
        })
    }
}

#[derive(Debug, Clone)]
pub struct ParkingSpot {
    pub id: String,
    pub pose: Pose,
    pub entry_lane: Option<LaneId>,
}

#[derive(Debug, Clone)]
pub struct StaticObstacle {
    pub id: String,
    pub pose: Pose,
    pub shape: Shape,
}

impl StaticObstacle {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.pose, self.shape)
    }
}

/// Lane definition with string references, resolved by [`LaneGraphMap::from_defs`].
#[derive(Debug, Clone, PartialEq)]
pub struct LaneDef {
    pub id: String,
    pub centerline: Vec<Point>,
    pub width: f64,
    pub speed_limit: f64,
    pub successors: Vec<String>,
    pub left: Option<(String, bool)>,
    pub right: Option<(String, bool)>,
    pub kind: LaneKind,
    pub intersection_arm: bool,
}

impl LaneDef {
    pub fn new(id: impl Into<String>, centerline: Vec<Point>, width: f64, speed_limit: f64) -> Self {
        Self {
            id: id.into(),
            centerline,
            width,
            speed_limit,
            successors: Vec::new(),
            left: None,
            right: None,
            kind: LaneKind::Urban,
            intersection_arm: false,
        }
    }

    pub fn successor(mut self, id: impl Into<String>) -> Self {
        self.successors.push(id.into());
        self
    }

    pub fn left(mut self, id: impl Into<String>, reachable: bool) -> Self {
        self.left = Some((id.into(), reachable));
        self
    }

    pub fn right(mut self, id: impl Into<String>, reachable: bool) -> Self {
        self.right = Some((id.into(), reachable));
        self
    }

    pub fn kind(mut self, kind: LaneKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn intersection_arm(mut self) -> Self {
        self.intersection_arm = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotDef {
    pub id: String,
    pub pose: Pose,
    pub entry_lane: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("`{from}` references unknown lane `{to}`")]
    DanglingReference { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapViolation {
    #[error("lane `{lane}` has {side} neighbour `{other}` whose {} neighbour is not `{lane}`", .side.opposite())]
    AsymmetricAdjacency { lane: String, side: Side, other: String },
    #[error("successor `{to}` starts {gap:.3} m away from the end of `{from}`")]
    Discontinuous { from: String, to: String, gap: f64 },
    #[error("lane `{lane}` has non-positive width {width}")]
    NonPositiveWidth { lane: String, width: f64 },
    #[error("lane `{lane}` centerline has fewer than two distinct points")]
    DegenerateCenterline { lane: String },
}

#[derive(Debug, Clone, Default)]
pub struct LaneGraphMap {
    pub lanes: Vec<Lane>,
    pub parking_spots: Vec<ParkingSpot>,
    pub obstacles: Vec<StaticObstacle>,
    index: HashMap<String, LaneId>,
}

impl LaneGraphMap {
    pub fn from_defs(
        lanes: Vec<LaneDef>,
        spots: Vec<SpotDef>,
        obstacles: Vec<StaticObstacle>,
    ) -> Result<Self, MapError> {
        let mut index = HashMap::new();
        for (i, l) in lanes.iter().enumerate() {
            if index.insert(l.id.clone(), i).is_some() {
                return Err(MapError::DuplicateId(l.id.clone()));
            }
        }
        let resolve = |from: &str, to: &str| {
            index.get(to).copied().ok_or_else(|| MapError::DanglingReference {
                from: from.to_string(),
                to: to.to_string(),
            })
        };
        let mut out = Vec::with_capacity(lanes.len());
        for def in &lanes {
            let adj = |a: &Option<(String, bool)>| -> Result<Option<Adjacency>, MapError> {
                a.as_ref()
                    .map(|(id, reachable)| {
                        Ok(Adjacency { lane: resolve(&def.id, id)?, reachable: *reachable })
                    })
                    .transpose()
            };
            out.push(Lane {
                id: def.id.clone(),
                centerline: Polyline::new(def.centerline.clone()),
                width: def.width,
                speed_limit: def.speed_limit,
                successors: def
                    .successors
                    .iter()
                    .map(|s| resolve(&def.id, s))
                    .collect::<Result<_, _>>()?,
                left: adj(&def.left)?,
                right: adj(&def.right)?,
                kind: def.kind,
                intersection_arm: def.intersection_arm,
            });
        }
        let mut spot_ids = HashMap::new();
        let mut parking_spots = Vec::with_capacity(spots.len());
        for s in spots {
            if spot_ids.insert(s.id.clone(), ()).is_some() {
                return Err(MapError::DuplicateId(s.id));
            }
            let entry_lane = s.entry_lane.as_deref().map(|l| resolve(&s.id, l)).transpose()?;
            parking_spots.push(ParkingSpot { id: s.id, pose: s.pose, entry_lane });
        }
        Ok(Self { lanes: out, parking_spots, obstacles, index })
    }

    pub fn lane(&self, id: LaneId) -> &Lane {
        &self.lanes[id]
    }

    pub fn lane_id(&self, name: &str) -> Option<LaneId> {
        self.index.get(name).copied()
    }

    pub fn spot_id(&self, name: &str) -> Option<usize> {
        self.parking_spots.iter().position(|s| s.id == name)
    }

    /// Lanes that list `lane` as a successor.
    pub fn predecessors(&self, lane: LaneId) -> impl Iterator<Item = LaneId> + '_ {
        self.lanes
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.successors.contains(&lane))
            .map(|(i, _)| i)
    }
}

/// Returns every invariant violation; an empty list means the map is usable.
pub fn validate_map(map: &LaneGraphMap) -> Vec<MapViolation> {
    let mut out = Vec::new();
    for lane in &map.lanes {
        if !(lane.width > 0.0) {
            out.push(MapViolation::NonPositiveWidth { lane: lane.id.clone(), width: lane.width });
        }
        if lane.centerline.points().len() < 2 {
            out.push(MapViolation::DegenerateCenterline { lane: lane.id.clone() });
        }
    }
    for (i, lane) in map.lanes.iter().enumerate() {
        for side in [Side::Left, Side::Right] {
            if let Some(adj) = lane.adjacent(side) {
                let back = map.lanes[adj.lane].adjacent(side.opposite());
                if back.map(|b| b.lane) != Some(i) {
                    out.push(MapViolation::AsymmetricAdjacency {
                        lane: lane.id.clone(),
                        side,
                        other: map.lanes[adj.lane].id.clone(),
                    });
                }
            }
        }
        for &succ in &lane.successors {
            let next = &map.lanes[succ];
            if let (Some(end), Some(start)) = (lane.centerline.last(), next.centerline.first()) {
                let gap = end.distance(start);
                if gap > CONTINUITY_TOLERANCE {
                    out.push(MapViolation::Discontinuous {
                        from: lane.id.clone(),
                        to: next.id.clone(),
                        gap,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub lanes: Vec<LaneId>,
    pub goal: Pose,
    pub parking_spot: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("route is empty")]
    Empty,
    #[error("route lanes `{0}` and `{1}` are neither successors nor neighbours")]
    Disconnected(String, String),
    #[error("lane `{0}` cannot reach the goal along the route")]
    Unroutable(String),
}

/// A route together with the per-lane lane-change distance to the goal lane.
#[derive(Debug, Clone)]
pub struct RouteInfo {
    pub route: Route,
    on_route: Vec<bool>,
    changes: Vec<Option<u32>>,
    goal_s: f64,
}

impl RouteInfo {
    pub fn new(map: &LaneGraphMap, route: Route) -> Result<Self, RouteError> {
        let goal_lane = *route.lanes.last().ok_or(RouteError::Empty)?;
        for w in route.lanes.windows(2) {
            let (a, b) = (map.lane(w[0]), w[1]);
            let linked = a.successors.contains(&b)
                || a.left.is_some_and(|x| x.lane == b)
                || a.right.is_some_and(|x| x.lane == b);
            if !linked {
                return Err(RouteError::Disconnected(a.id.clone(), map.lane(b).id.clone()));
            }
        }
        let mut on_route = vec![false; map.lanes.len()];
        for &l in &route.lanes {
            on_route[l] = true;
        }
        let changes = lane_change_distances(map, &on_route, goal_lane);
        let goal_s = map
            .lane(goal_lane)
            .centerline
            .project(route.goal.position())
            .s
            .clamp(0.0, map.lane(goal_lane).length());
        Ok(Self { route, on_route, changes, goal_s })
    }

    pub fn goal_lane(&self) -> LaneId {
        *self.route.lanes.last().expect("non-empty route")
    }

    /// Arclength of the goal pose on the goal lane.
    pub fn goal_s(&self) -> f64 {
        self.goal_s
    }

    pub fn on_route(&self, lane: LaneId) -> bool {
        self.on_route.get(lane).copied().unwrap_or(false)
    }

    /// Lane changes still needed from `lane`, `None` if the goal is
    /// unreachable from it.
    pub fn changes_needed(&self, lane: LaneId) -> Option<u32> {
        self.changes.get(lane).copied().flatten()
    }

    /// Route lanes reached by staying in lane from `lane` without raising
    /// the lane-change count. Ends at the goal lane or at the last lane
    /// from which the next required change is still possible.
    pub fn follow_chain(&self, map: &LaneGraphMap, lane: LaneId) -> Vec<LaneId> {
        let Some(d) = self.changes_needed(lane) else {
            return Vec::new();
        };
        let mut chain = vec![lane];
        let mut cur = lane;
        while !(d == 0 && cur == self.goal_lane()) {
            let next = map
                .lane(cur)
                .successors
                .iter()
                .copied()
                .find(|&s| self.changes_needed(s) == Some(d) && !chain.contains(&s));
            match next {
                Some(n) => {
                    chain.push(n);
                    cur = n;
                }
                None => break,
            }
        }
        chain
    }
}

/// Number of lane changes needed from `lane` to stay on the route.
pub fn lane_changes_needed(
    map: &LaneGraphMap,
    route: &RouteInfo,
    lane: LaneId,
) -> Result<u32, RouteError> {
    route
        .changes_needed(lane)
        .ok_or_else(|| RouteError::Unroutable(map.lane(lane).id.clone()))
}

/// 0-1 breadth-first search backwards from the goal lane over route lanes.
/// Successor links cost nothing, reachable neighbour links cost one change.
fn lane_change_distances(map: &LaneGraphMap, on_route: &[bool], goal: LaneId) -> Vec<Option<u32>> {
    let n = map.lanes.len();
    let mut incoming: Vec<Vec<(LaneId, u32)>> = vec![Vec::new(); n];
    for (i, lane) in map.lanes.iter().enumerate() {
        if !on_route[i] {
            continue;
        }
        for &s in &lane.successors {
            if on_route[s] {
                incoming[s].push((i, 0));
            }
        }
        for adj in [lane.left, lane.right].into_iter().flatten() {
            if adj.reachable && on_route[adj.lane] {
                incoming[adj.lane].push((i, 1));
            }
        }
    }
    let mut dist: Vec<Option<u32>> = vec![None; n];
    let mut queue = VecDeque::new();
    dist[goal] = Some(0);
    queue.push_back(goal);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v].expect("queued lanes have a distance");
        for &(u, w) in &incoming[v] {
            let cand = dv + w;
            if dist[u].is_none_or(|du| cand < du) {
                dist[u] = Some(cand);
                if w == 0 {
                    queue.push_front(u);
                } else {
                    queue.push_back(u);
                }
            }
        }
    }
    dist
}

/// Lane whose centerline is laterally closest to the pose, within half the
/// lane width plus [`MATCH_MARGIN`]. Route lanes win over off-route lanes.
pub fn match_ego_lane(map: &LaneGraphMap, route: Option<&RouteInfo>, pose: &Pose) -> Option<LaneId> {
    let mut best: Option<(bool, f64, LaneId)> = None;
    for (i, lane) in map.lanes.iter().enumerate() {
        let pr = lane.centerline.project(pose.position());
        let len = lane.length();
        if pr.s < -CONTINUITY_TOLERANCE || pr.s > len + CONTINUITY_TOLERANCE {
            continue;
        }
        let lateral = pr.lateral.abs();
        if lateral >= lane.width / 2.0 + MATCH_MARGIN {
            continue;
        }
        let routed = route.is_some_and(|r| r.on_route(i));
        let better = match best {
            None => true,
            Some((b_routed, b_lat, _)) => {
                (routed && !b_routed) || (routed == b_routed && lateral < b_lat - 1e-9)
            }
        };
        if better {
            best = Some((routed, lateral, i));
        }
    }
    best.map(|(_, _, i)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoState {
    pub pose: Pose,
    /// Magnitude of the velocity; the direction follows `reversing`.
    pub speed: f64,
    pub shape: Shape,
    pub reversing: bool,
}

impl EgoState {
    pub fn new(pose: Pose, speed: f64, shape: Shape) -> Self {
        Self { pose, speed, shape, reversing: false }
    }

    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.pose, self.shape)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    /// Seconds relative to the snapshot time.
    pub t: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedObject {
    pub id: String,
    pub pose: Pose,
    pub speed: f64,
    pub shape: Shape,
    pub prediction: Vec<TimedPose>,
    pub is_virtual_stop: bool,
}

impl TrackedObject {
    pub fn new(id: impl Into<String>, pose: Pose, speed: f64, shape: Shape) -> Self {
        Self { id: id.into(), pose, speed, shape, prediction: Vec::new(), is_virtual_stop: false }
    }

    pub fn virtual_stop(id: impl Into<String>, pose: Pose, width: f64) -> Self {
        Self {
            id: id.into(),
            pose,
            speed: 0.0,
            shape: Shape::new(0.5, width),
            prediction: vec![TimedPose { t: 0.0, pose }],
            is_virtual_stop: true,
        }
    }

    pub fn with_prediction(mut self, horizon: f64, dt: f64) -> Self {
        self.prediction = predict_constant_velocity(&self, horizon, dt);
        self
    }

    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.pose, self.shape)
    }

    /// Predicted pose at `t` seconds ahead, interpolated and held at the ends.
    pub fn pose_at(&self, t: f64) -> Pose {
        let p = &self.prediction;
        match p.len() {
            0 => self.pose.offset(self.speed * t, 0.0),
            1 => p[0].pose,
            _ => {
                if t <= p[0].t {
                    return p[0].pose;
                }
                let i = p.partition_point(|tp| tp.t <= t);
                if i >= p.len() {
                    return p[p.len() - 1].pose;
                }
                let (a, b) = (&p[i - 1], &p[i]);
                let f = (t - a.t) / (b.t - a.t);
                let pa = a.pose.position().lerp(b.pose.position(), f);
                Pose::new(pa.x, pa.y, a.pose.heading)
            }
        }
    }

    pub fn footprint_at(&self, t: f64) -> OrientedRect {
        OrientedRect::new(self.pose_at(t), self.shape)
    }
}

/// Poses advanced along the current heading at constant speed, one every
/// `dt` up to `horizon`.
pub fn predict_constant_velocity(object: &TrackedObject, horizon: f64, dt: f64) -> Vec<TimedPose> {
    let n = (horizon / dt + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            TimedPose { t, pose: object.pose.offset(object.speed * t, 0.0) }
        })
        .collect()
}

/// Everything a behavior may look at for one tick.
#[derive(Debug, Clone)]
pub struct EnvironmentSnapshot {
    pub time: f64,
    pub map: Arc<LaneGraphMap>,
    pub route: Arc<RouteInfo>,
    pub ego: EgoState,
    pub ego_lane: Option<LaneId>,
    pub objects: Vec<TrackedObject>,
}

impl EnvironmentSnapshot {
    pub fn new(
        time: f64,
        map: Arc<LaneGraphMap>,
        route: Arc<RouteInfo>,
        ego: EgoState,
        objects: Vec<TrackedObject>,
    ) -> Self {
        let ego_lane = match_ego_lane(&map, Some(&route), &ego.pose);
        Self { time, map, route, ego, ego_lane, objects }
    }

    /// The goal parking spot, if the route ends in one.
    pub fn goal_spot(&self) -> Option<&ParkingSpot> {
        self.route.route.parking_spot.map(|i| &self.map.parking_spots[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(id: &str, y: f64, x0: f64, x1: f64) -> LaneDef {
        LaneDef::new(id, vec![Point::new(x0, y), Point::new(x1, y)], 3.5, 13.89)
    }

    fn three_lane() -> LaneGraphMap {
        LaneGraphMap::from_defs(
            vec![
                straight("left", 7.0, 0.0, 400.0).right("mid", true),
                straight("mid", 3.5, 0.0, 400.0).left("left", true).right("right", true),
                straight("right", 0.0, 0.0, 400.0).left("mid", true).successor("exit"),
                straight("exit", 0.0, 400.0, 500.0),
            ],
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn route(map: &LaneGraphMap, ids: &[&str], goal: Pose) -> RouteInfo {
        let lanes = ids.iter().map(|i| map.lane_id(i).unwrap()).collect();
        RouteInfo::new(map, Route { lanes, goal, parking_spot: None }).unwrap()
    }

    #[test]
    fn leftmost_lane_needs_two_changes() {
        let map = three_lane();
        let r = route(&map, &["left", "mid", "right", "exit"], Pose::new(500.0, 0.0, 0.0));
        let n = |id| lane_changes_needed(&map, &r, map.lane_id(id).unwrap()).unwrap();
        assert_eq!((n("left"), n("mid"), n("right"), n("exit")), (2, 1, 0, 0));
    }

    #[test]
    fn off_route_lane_is_unroutable() {
        let map = three_lane();
        let r = route(&map, &["right", "exit"], Pose::new(500.0, 0.0, 0.0));
        assert!(matches!(
            lane_changes_needed(&map, &r, map.lane_id("left").unwrap()),
            Err(RouteError::Unroutable(_))
        ));
    }

    #[test]
    fn follow_chain_stops_before_forced_change() {
        let map = three_lane();
        let r = route(&map, &["mid", "right", "exit"], Pose::new(480.0, 0.0, 0.0));
        let mid = map.lane_id("mid").unwrap();
        let right = map.lane_id("right").unwrap();
        assert_eq!(r.follow_chain(&map, mid), vec![mid]);
        assert_eq!(r.follow_chain(&map, right), vec![right, map.lane_id("exit").unwrap()]);
        assert!((r.goal_s() - 80.0).abs() < 1e-9);
    }

    #[test]
    fn disconnected_route_rejected() {
        let map = three_lane();
        let lanes = vec![map.lane_id("left").unwrap(), map.lane_id("exit").unwrap()];
        let err = RouteInfo::new(&map, Route { lanes, goal: Pose::default(), parking_spot: None });
        assert!(matches!(err, Err(RouteError::Disconnected(..))));
    }

    #[test]
    fn matching_prefers_route_lane_when_straddling() {
        let map = three_lane();
        let r = route(&map, &["right", "exit"], Pose::new(500.0, 0.0, 0.0));
        // 0.4 m over the boundary into `mid`.
        let pose = Pose::new(50.0, 2.15, 0.0);
        assert_eq!(match_ego_lane(&map, None, &pose), map.lane_id("mid"));
        assert_eq!(match_ego_lane(&map, Some(&r), &pose), map.lane_id("right"));
        assert_eq!(match_ego_lane(&map, Some(&r), &Pose::new(50.0, 3.5, 0.0)), map.lane_id("mid"));
        assert_eq!(match_ego_lane(&map, Some(&r), &Pose::new(50.0, -20.0, 0.0)), None);
    }

    #[test]
    fn prediction_samples() {
        let o = TrackedObject::new("a", Pose::new(0.0, 0.0, 0.0), 10.0, Shape::new(4.0, 2.0));
        let p = predict_constant_velocity(&o, 3.0, 1.0);
        let xs: Vec<f64> = p.iter().map(|tp| tp.pose.x).collect();
        assert_eq!(xs, vec![0.0, 10.0, 20.0, 30.0]);
        let up = TrackedObject::new("b", Pose::new(0.0, 0.0, std::f64::consts::FRAC_PI_2), 5.0, o.shape);
        let last = predict_constant_velocity(&up, 2.0, 0.5).last().copied().unwrap();
        assert!(last.pose.x.abs() < 1e-12 && (last.pose.y - 10.0).abs() < 1e-12);
        assert_eq!(predict_constant_velocity(&o, 8.0, 0.25).len(), 33);
    }

    #[test]
    fn validation_reports_each_violation() {
        assert!(validate_map(&three_lane()).is_empty());
        let asym = LaneGraphMap::from_defs(
            vec![
                straight("A", 7.0, 0.0, 50.0).left("B", true),
                straight("B", 10.5, 0.0, 50.0).right("C", true),
                straight("C", 3.5, 0.0, 50.0).left("B", true),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let v = validate_map(&asym);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], MapViolation::AsymmetricAdjacency { ref lane, .. } if lane == "A"));

        let gap = LaneGraphMap::from_defs(
            vec![straight("A", 0.0, 0.0, 50.0).successor("B"), straight("B", 0.0, 51.0, 100.0)],
            vec![],
            vec![],
        )
        .unwrap();
        let v = validate_map(&gap);
        assert_eq!(v.len(), 1);
        match &v[0] {
            MapViolation::Discontinuous { gap, .. } => assert!((gap - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_reference() {
        let err = LaneGraphMap::from_defs(vec![straight("A", 0.0, 0.0, 1.0).successor("Z")], vec![], vec![]);
        assert_eq!(err.unwrap_err(), MapError::DanglingReference { from: "A".into(), to: "Z".into() });
    }
}
