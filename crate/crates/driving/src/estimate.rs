//! Gap assessment, time to collision, expected average velocity and the
//! urban cost function.

use serde::Serialize;

use crate::geometry::{Point, Polyline};
use crate::maneuver::{Corridor, VelocityObjective};
use crate::params::{BehaviorParams, CostParams};
use crate::world::{EgoState, LaneGraphMap, LaneId, TrackedObject};

/// Seconds until a gap closes at the given speed, infinite when opening.
pub fn time_to_collision(gap: f64, closing_speed: f64) -> f64 {
    if closing_speed > 0.0 {
        gap.max(0.0) / closing_speed
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapAssessment {
    pub d_ahead: f64,
    pub d_behind: f64,
    pub ttc_ahead: f64,
    pub ttc_behind: f64,
    pub feasible: bool,
}

impl GapAssessment {
    pub fn from_metrics(d_ahead: f64, d_behind: f64, ttc_ahead: f64, ttc_behind: f64, p: &BehaviorParams) -> Self {
        let feasible = d_ahead > p.d_min_ahead
            && d_behind > p.d_min_behind
            && ttc_ahead > p.ttc_min_ahead
            && ttc_behind > p.ttc_min_behind;
        Self { d_ahead, d_behind, ttc_ahead, ttc_behind, feasible }
    }
}

/// Longitudinal frame along a lane, extended backwards over predecessors and
/// forwards over successors so vehicles near lane joins are still found.
pub struct LaneFrame {
    pub line: Polyline,
    /// Frame arclength at which the lane itself starts.
    pub offset: f64,
    pub half_width: f64,
}

impl LaneFrame {
    pub fn new(map: &LaneGraphMap, lane: LaneId, back: f64, ahead: f64) -> Self {
        let mut behind: Vec<LaneId> = Vec::new();
        let mut len = 0.0;
        let mut cur = lane;
        while len < back {
            match map.predecessors(cur).find(|p| !behind.contains(p) && *p != lane) {
                Some(p) => {
                    behind.push(p);
                    len += map.lane(p).length();
                    cur = p;
                }
                None => break,
            }
        }
        let mut forward: Vec<LaneId> = Vec::new();
        let mut len = map.lane(lane).length();
        let mut cur = lane;
        while len < ahead {
            match map.lane(cur).successors.first().copied() {
                Some(s) if s != lane && !forward.contains(&s) => {
                    forward.push(s);
                    len += map.lane(s).length();
                    cur = s;
                }
                _ => break,
            }
        }
        let mut pts: Vec<Point> = Vec::new();
        let mut offset = 0.0;
        for &l in behind.iter().rev() {
            offset += map.lane(l).length();
            pts.extend_from_slice(map.lane(l).centerline.points());
        }
        for &l in std::iter::once(&lane).chain(forward.iter()) {
            pts.extend_from_slice(map.lane(l).centerline.points());
        }
        Self { line: Polyline::new(pts), offset, half_width: map.lane(lane).width / 2.0 }
    }

    /// Frame arclength and lateral offset of a point.
    pub fn locate(&self, p: Point) -> (f64, f64) {
        let pr = self.line.project(p);
        (pr.s, pr.lateral)
    }

    /// Velocity component along the frame direction at `s`.
    pub fn longitudinal_speed(&self, s: f64, heading: f64, speed: f64) -> f64 {
        speed * (heading - self.line.heading_at(s)).cos()
    }
}

/// Nearest leader and follower of the ego in `lane`, ignoring virtual stops.
pub fn assess_gap(map: &LaneGraphMap, lane: LaneId, ego: &EgoState, objects: &[TrackedObject], params: &BehaviorParams) -> GapAssessment {
    let frame = LaneFrame::new(map, lane, 150.0, 200.0);
    let (s_ego, _) = frame.locate(ego.pose.position());
    let v_ego = if ego.reversing { -ego.speed } else { ego.speed };
    let v_ego = frame.longitudinal_speed(s_ego, ego.pose.heading, v_ego);
    let mut lead: Option<(f64, f64)> = None;
    let mut follow: Option<(f64, f64)> = None;
    for o in objects.iter().filter(|o| !o.is_virtual_stop) {
        let (s, d) = frame.locate(o.pose.position());
        if d.abs() > frame.half_width || s < 0.0 || s > frame.line.length() {
            continue;
        }
        let v = frame.longitudinal_speed(s, o.pose.heading, o.speed);
        let gap = (s - s_ego).abs() - (o.shape.length + ego.shape.length) / 2.0;
        if s >= s_ego {
            if lead.is_none_or(|(g, _)| gap < g) {
                lead = Some((gap, v_ego - v));
            }
        } else if follow.is_none_or(|(g, _)| gap < g) {
            follow = Some((gap, v - v_ego));
        }
    }
    let (d_ahead, ttc_ahead) = lead.map_or((f64::INFINITY, f64::INFINITY), |(g, c)| (g, time_to_collision(g, c)));
    let (d_behind, ttc_behind) = follow.map_or((f64::INFINITY, f64::INFINITY), |(g, c)| (g, time_to_collision(g, c)));
    GapAssessment::from_metrics(d_ahead, d_behind, ttc_ahead, ttc_behind, params)
}

/// Space step of the longitudinal profile integration.
const PROFILE_STEP: f64 = 0.25;

/// Distance covered within `horizon` by a vehicle starting at `v0` that
/// accelerates or brakes at `a` toward piecewise-constant targets, arriving
/// at each objective point no faster than its target. With `stop_at` the
/// vehicle must stand still at that arclength; otherwise it keeps the last
/// target past the final objective.
pub fn profile_distance(objectives: &[VelocityObjective], stop_at: Option<f64>, v0: f64, a: f64, horizon: f64) -> f64 {
    if horizon <= 0.0 || objectives.is_empty() {
        return 0.0;
    }
    let mut points: Vec<(f64, f64)> = objectives.iter().map(|o| (o.s, o.speed.max(0.0))).collect();
    if let Some(end) = stop_at {
        points.push((end, 0.0));
    }
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    // env(s)^2 = min_{s_k >= s} (v_k^2 + 2 a s_k) - 2 a s
    let mut suffix = vec![f64::INFINITY; points.len() + 1];
    for k in (0..points.len()).rev() {
        let c = points[k].1 * points[k].1 + 2.0 * a * points[k].0;
        suffix[k] = suffix[k + 1].min(c);
    }
    let envelope_sq = |s: f64| {
        let k = points.partition_point(|p| p.0 < s - 1e-12);
        suffix[k] - 2.0 * a * s
    };
    let target = |s: f64| {
        let mut v = objectives[0].speed;
        for o in objectives {
            if o.s <= s + 1e-12 {
                v = o.speed;
            }
        }
        v.max(0.0)
    };
    let required = |s: f64, v: f64| {
        points
            .iter()
            .filter(|p| p.0 > s + 1e-12)
            .map(|p| (v * v - p.1 * p.1) / (2.0 * (p.0 - s)))
            .fold(0.0_f64, f64::max)
    };

    let (mut s, mut v, mut t) = (0.0_f64, v0.max(0.0), 0.0_f64);
    loop {
        if stop_at.is_some_and(|end| s >= end - 1e-9) {
            return s;
        }
        let mut s1 = s + PROFILE_STEP;
        for p in &points {
            if p.0 > s + 1e-9 && p.0 < s1 {
                s1 = p.0;
            }
        }
        let ds = s1 - s;
        let tgt = target(s);
        let cap0_sq = (tgt * tgt).min(envelope_sq(s));
        let cap1_sq = (tgt * tgt).min(envelope_sq(s1)).max(0.0);
        let v1_sq = if v * v > cap0_sq + 1e-9 {
            let d = a.max(required(s, v));
            (v * v - 2.0 * d * ds).max(cap1_sq)
        } else {
            (v * v + 2.0 * a * ds).min(cap1_sq)
        };
        let v1 = v1_sq.max(0.0).sqrt();
        if v + v1 < 1e-9 {
            return s;
        }
        let dt = 2.0 * ds / (v + v1);
        if t + dt >= horizon {
            let tau = horizon - t;
            let acc = (v1 * v1 - v * v) / (2.0 * ds);
            let d = (v * tau + 0.5 * acc * tau * tau).clamp(0.0, ds);
            return s + d;
        }
        s = s1;
        v = v1;
        t += dt;
    }
}

/// Average speed over the cost horizon when driving the corridor.
pub fn expected_average_velocity(corridor: &Corridor, ego_speed: f64, cost: &CostParams) -> f64 {
    let stop_at = corridor.terminal.stops().then(|| corridor.length());
    if corridor.length() <= 1e-9 && stop_at.is_some() {
        return 0.0;
    }
    profile_distance(&corridor.velocity_objectives, stop_at, ego_speed, cost.a_cmf, cost.horizon) / cost.horizon
}

/// `-v_hat + n * J_LCNeeded`, plus `J_LCManeuver` for lane-change maneuvers.
pub fn urban_cost(v_hat: f64, lane_changes_needed: u32, lane_change_maneuver: bool, cost: &CostParams) -> f64 {
    let mut j = -v_hat + lane_changes_needed as f64 * cost.j_lc_needed;
    if lane_change_maneuver {
        j += cost.j_lc_maneuver;
    }
    j
}
