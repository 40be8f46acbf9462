use std::sync::Arc;

use arbitration_core::{Behavior, BehaviorFault, BehaviorSignals};

use super::fault;
use crate::arcline::{self, ArcLinePath};
use crate::geometry::Pose;
use crate::maneuver::{ManeuverCommand, TrajectoryCommand};
use crate::params::DrivingParams;
use crate::world::{EnvironmentSnapshot, LaneId, ParkingSpot};

/// Deviation from the planned path that triggers a replan.
const REPLAN_DEVIATION: f64 = 0.5;
const PARKING_ACCEL: f64 = 0.5;
/// How far the ego may be from a spot to count as standing in it.
const IN_SPOT: f64 = 1.0;
/// Distance down the entry lane where leaving a garage ends.
const ENTRY_RUN: f64 = 10.0;

fn trajectory(path: &ArcLinePath, env: &EnvironmentSnapshot, params: &DrivingParams) -> TrajectoryCommand {
    arcline::to_trajectory(path, env.time, env.ego.speed, params.behavior.parking_speed, PARKING_ACCEL, 1.0)
}

fn plan_to(env: &EnvironmentSnapshot, goal: &Pose, params: &DrivingParams) -> Option<ArcLinePath> {
    arcline::plan(&env.ego.pose, goal, params.behavior.parking_turn_radius, env.ego.shape, &env.map.obstacles)
}

fn deviates(plan: &TrajectoryCommand, env: &EnvironmentSnapshot) -> bool {
    plan.sample(env.time).pose.distance(&env.ego.pose) > REPLAN_DEVIATION
}

/// Parks in the goal spot once the ego is slow and close enough.
pub struct ParkNearGoal {
    name: String,
    params: Arc<DrivingParams>,
    plan: Option<TrajectoryCommand>,
}

impl ParkNearGoal {
    pub fn new(name: impl Into<String>, params: Arc<DrivingParams>) -> Self {
        Self { name: name.into(), params, plan: None }
    }

    fn remaining(&self, env: &EnvironmentSnapshot) -> Option<(f64, Pose)> {
        env.goal_spot().map(|s| (env.ego.pose.distance(&s.pose), s.pose))
    }

    fn freespace(&self, env: &EnvironmentSnapshot) -> bool {
        let r = self.params.behavior.r_min_freespace;
        env.objects
            .iter()
            .filter(|o| !o.is_virtual_stop)
            .all(|o| o.pose.distance(&env.ego.pose) >= r)
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for ParkNearGoal {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        let Some((d, spot)) = self.remaining(env) else {
            return Ok(BehaviorSignals::NONE);
        };
        let p = &self.params.behavior;
        let not_there = d > p.r_min_parking;
        let invocation = env.ego.speed < p.v_max_parking
            && d < p.r_max_parking
            && not_there
            && self.freespace(env)
            && plan_to(env, &spot, &self.params).is_some();
        Ok(BehaviorSignals::new(invocation, not_there))
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        let stale = self.plan.as_ref().is_none_or(|p| deviates(p, env));
        if stale {
            let (_, spot) = self.remaining(env).ok_or_else(|| fault("route has no parking spot"))?;
            let path = plan_to(env, &spot, &self.params).ok_or_else(|| fault("no collision-free parking path"))?;
            self.plan = Some(trajectory(&path, env, &self.params));
        }
        Ok(ManeuverCommand::Trajectory(self.plan.clone().expect("plan set above")))
    }

    fn gain_control(&mut self, env: &EnvironmentSnapshot) {
        self.plan = self
            .remaining(env)
            .and_then(|(_, spot)| plan_to(env, &spot, &self.params))
            .map(|path| trajectory(&path, env, &self.params));
    }

    fn lose_control(&mut self, _env: &EnvironmentSnapshot) {
        self.plan = None;
    }
}

/// Drives out of a (non-goal) parking spot onto its entry lane.
pub struct LeaveGarage {
    name: String,
    params: Arc<DrivingParams>,
    entry: Option<(LaneId, Pose)>,
    plan: Option<TrajectoryCommand>,
}

impl LeaveGarage {
    pub fn new(name: impl Into<String>, params: Arc<DrivingParams>) -> Self {
        Self { name: name.into(), params, entry: None, plan: None }
    }

    fn start_spot<'a>(&self, env: &'a EnvironmentSnapshot) -> Option<&'a ParkingSpot> {
        if env.ego_lane.is_some() {
            return None;
        }
        let goal = env.route.route.parking_spot;
        env.map
            .parking_spots
            .iter()
            .enumerate()
            .filter(|(i, s)| Some(*i) != goal && s.entry_lane.is_some())
            .map(|(_, s)| s)
            .find(|s| s.pose.distance(&env.ego.pose) < IN_SPOT)
    }

    fn target(&self, env: &EnvironmentSnapshot, spot: &ParkingSpot) -> Option<(LaneId, Pose)> {
        let lane_id = spot.entry_lane?;
        let lane = env.map.lane(lane_id);
        let s0 = lane.centerline.project(spot.pose.position()).s;
        let s = (s0 + ENTRY_RUN).clamp(0.0, (lane.length() - 1.0).max(0.0));
        Some((lane_id, lane.centerline.pose_at(s)))
    }

    fn plan(&self, env: &EnvironmentSnapshot) -> Option<((LaneId, Pose), ArcLinePath)> {
        let spot = self.start_spot(env)?;
        let (lane, goal) = self.target(env, spot)?;
        plan_to(env, &goal, &self.params).map(|p| ((lane, goal), p))
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for LeaveGarage {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        let invocation = self.plan(env).is_some();
        let commitment = self.entry.is_some_and(|(e, _)| env.ego_lane != Some(e));
        Ok(BehaviorSignals::new(invocation, commitment))
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        if self.plan.as_ref().is_none_or(|p| deviates(p, env)) {
            let path = match self.entry {
                Some((_, goal)) => plan_to(env, &goal, &self.params),
                None => self.plan(env).map(|(entry, path)| {
                    self.entry = Some(entry);
                    path
                }),
            };
            let path = path.ok_or_else(|| fault("no path onto the entry lane"))?;
            self.plan = Some(trajectory(&path, env, &self.params));
        }
        Ok(ManeuverCommand::Trajectory(self.plan.clone().expect("plan set above")))
    }

    fn gain_control(&mut self, env: &EnvironmentSnapshot) {
        match self.plan(env) {
            Some((entry, path)) => {
                self.entry = Some(entry);
                self.plan = Some(trajectory(&path, env, &self.params));
            }
            None => {
                self.entry = None;
                self.plan = None;
            }
        }
    }

    fn lose_control(&mut self, _env: &EnvironmentSnapshot) {
        self.entry = None;
        self.plan = None;
    }
}
