use std::sync::Arc;

use arbitration_core::{Behavior, BehaviorFault, BehaviorSignals};

use super::{fault, LaneRules};
use crate::maneuver::{build_follow_corridor, flag_objects, Corridor, CorridorCommand, ManeuverCommand};
use crate::params::{BehaviorParams, DrivingParams};
use crate::world::{EnvironmentSnapshot, TrackedObject};

/// Speed assumed for a waiting ego when estimating its crossing window.
const MIN_CROSSING_SPEED: f64 = 2.0;

/// Entry and exit arclength of the first intersection stretch in the corridor.
fn intersection_span(env: &EnvironmentSnapshot, corridor: &Corridor) -> Option<(f64, f64)> {
    let first = corridor.spans.iter().position(|sp| env.map.lane(sp.lane).intersection_arm)?;
    let exit = corridor.spans[first..]
        .iter()
        .take_while(|sp| env.map.lane(sp.lane).intersection_arm)
        .last()
        .map_or(corridor.spans[first].end, |sp| sp.end);
    Some((corridor.spans[first].start, exit))
}

/// First object whose prediction enters the intersection stretch of the
/// corridor while the ego is expected to occupy it.
pub fn crossing_conflict<'a>(
    corridor: &Corridor,
    entry: f64,
    exit: f64,
    objects: &'a [TrackedObject],
    ego_speed: f64,
    ego_length: f64,
    params: &BehaviorParams,
) -> Option<&'a TrackedObject> {
    let v = ego_speed.max(MIN_CROSSING_SPEED);
    let t_in = (entry / v - params.t_crossing_buffer).max(0.0);
    let t_out = (exit + ego_length) / v + params.t_crossing_buffer;
    objects.iter().filter(|o| !o.is_virtual_stop).find(|o| {
        let hw = o.shape.width / 2.0;
        if corridor.contains(o.pose.position(), hw) {
            return false;
        }
        o.prediction.iter().filter(|tp| tp.t >= t_in && tp.t <= t_out).any(|tp| {
            let pr = corridor.base.project(tp.pose.position());
            let half_len = o.shape.length / 2.0;
            pr.s >= entry - half_len && pr.s <= exit + half_len && corridor.contains(tp.pose.position(), hw)
        })
    })
}

/// Drives through an intersection, yielding to crossing traffic with a
/// virtual stop line at the entry.
pub struct CrossIntersection {
    name: String,
    params: Arc<DrivingParams>,
}

impl CrossIntersection {
    pub fn new(name: impl Into<String>, params: Arc<DrivingParams>) -> Self {
        Self { name: name.into(), params }
    }

    fn corridor(&self, env: &EnvironmentSnapshot) -> Option<Corridor> {
        let lane = LaneRules::URBAN.ego_lane(env)?;
        build_follow_corridor(&env.map, &env.route, lane, &env.ego.pose, self.params.behavior.a_lat_max).ok()
    }

    fn inside(&self, env: &EnvironmentSnapshot) -> bool {
        env.ego_lane.is_some_and(|l| env.map.lane(l).intersection_arm)
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for CrossIntersection {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        let inside = self.inside(env);
        let ahead = self.corridor(env).is_some_and(|c| {
            intersection_span(env, &c).is_some_and(|(entry, _)| entry <= self.params.behavior.d_intersection_lookahead)
        });
        Ok(BehaviorSignals::new(ahead || (inside && env.route.on_route(env.ego_lane.unwrap_or(usize::MAX))), inside))
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        let corridor = self.corridor(env).ok_or_else(|| fault("ego is not on a route lane"))?;
        let mut virtual_objects = Vec::new();
        if let Some((entry, exit)) = intersection_span(env, &corridor) {
            let waiting = entry > 0.0 && !self.inside(env);
            if waiting {
                let p = &self.params.behavior;
                if crossing_conflict(&corridor, entry, exit, &env.objects, env.ego.speed, env.ego.shape.length, p).is_some() {
                    let line = corridor.base.pose_at(entry);
                    let width = corridor.left_at(entry) - corridor.right_at(entry);
                    virtual_objects.push(TrackedObject::virtual_stop("stop_line", line, width));
                }
            }
        }
        let all: Vec<TrackedObject> = env.objects.iter().cloned().chain(virtual_objects.iter().cloned()).collect();
        let variant = flag_objects(&corridor, &all, &env.ego, "cross_intersection");
        let mut cmd = CorridorCommand::new(corridor, variant);
        cmd.virtual_objects = virtual_objects;
        Ok(ManeuverCommand::Corridor(Box::new(cmd)))
    }
}
