use std::f64::consts::PI;
use std::sync::Arc;

use arbitration_core::{Behavior, BehaviorFault, BehaviorSignals};

use super::fault;
use crate::geometry::{OrientedRect, Point};
use crate::maneuver::{ManeuverCommand, TrajectoryCommand, TrajectoryPoint};
use crate::params::DrivingParams;
use crate::world::{EgoState, EnvironmentSnapshot};

/// Time resolution of collision checks along predicted motion.
const CHECK_DT: f64 = 0.05;
const EVADE_HORIZON: f64 = 3.0;
const EVADE_STEP: f64 = 0.25;
const DEFAULT_LANE_WIDTH: f64 = 3.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Anticipation {
    pub object: String,
    pub ttc: f64,
}

fn ego_velocity(ego: &EgoState) -> f64 {
    if ego.reversing {
        -ego.speed
    } else {
        ego.speed
    }
}

/// Earliest predicted overlap of the ego, moving straight ahead at constant
/// speed, with any object within `horizon` seconds.
pub fn anticipate_collision(env: &EnvironmentSnapshot, horizon: f64) -> Option<Anticipation> {
    let v = ego_velocity(&env.ego);
    let n = (horizon / CHECK_DT).ceil() as usize;
    for k in 0..=n {
        let t = (k as f64 * CHECK_DT).min(horizon);
        let ego = OrientedRect::new(env.ego.pose.offset(v * t, 0.0), env.ego.shape);
        if let Some(o) = env.objects.iter().filter(|o| !o.is_virtual_stop).find(|o| ego.overlaps(&o.footprint_at(t))) {
            return Some(Anticipation { object: o.id.clone(), ttc: t });
        }
    }
    None
}

fn velocity_vector(heading: f64, speed: f64) -> Point {
    Point::unit(heading).scale(speed)
}

/// Relative speed at the first overlap between the ego trajectory and any
/// object, or `None` if the trajectory stays clear.
fn impact_speed(traj: &TrajectoryCommand, t0: f64, env: &EnvironmentSnapshot, horizon: f64) -> Option<f64> {
    let n = (horizon / CHECK_DT).ceil() as usize;
    for k in 0..=n {
        let t = k as f64 * CHECK_DT;
        let p = traj.sample(t0 + t);
        let rect = OrientedRect::new(p.pose, env.ego.shape);
        let hit = env
            .objects
            .iter()
            .filter(|o| !o.is_virtual_stop)
            .find(|o| rect.overlaps(&o.footprint_at(t)));
        if let Some(o) = hit {
            let ve = velocity_vector(p.pose.heading, p.speed);
            let vo = velocity_vector(o.pose_at(t).heading, o.speed);
            return Some(ve.sub(vo).norm());
        }
        if env.map.obstacles.iter().any(|o| rect.overlaps(&o.footprint())) {
            return Some(p.speed.abs());
        }
    }
    None
}

/// Straight-line stop at constant deceleration, then a short hold.
pub fn braking_trajectory(ego: &EgoState, t0: f64, decel: f64) -> TrajectoryCommand {
    let v0 = ego_velocity(ego);
    let sign = v0.signum();
    let speed = v0.abs();
    let t_stop = speed / decel;
    let n = (t_stop / CHECK_DT).ceil() as usize;
    let mut points = Vec::with_capacity(n + 2);
    for k in 0..=n {
        let t = (k as f64 * CHECK_DT).min(t_stop);
        if k > 0 && t <= points.last().map_or(0.0, |p: &TrajectoryPoint| p.t - t0) {
            continue;
        }
        let dist = speed * t - 0.5 * decel * t * t;
        points.push(TrajectoryPoint {
            t: t0 + t,
            pose: ego.pose.offset(sign * dist, 0.0),
            speed: sign * (speed - decel * t).max(0.0),
        });
    }
    let last = *points.last().expect("non-empty");
    points.push(TrajectoryPoint { t: last.t + 1.0, pose: last.pose, speed: 0.0 });
    TrajectoryCommand::new(points).expect("increasing timestamps")
}

/// Full stop at maximum deceleration; its cost is the predicted impact speed.
pub struct EmergencyStop {
    name: String,
    params: Arc<DrivingParams>,
}

impl EmergencyStop {
    pub fn new(name: impl Into<String>, params: Arc<DrivingParams>) -> Self {
        Self { name: name.into(), params }
    }

    pub fn damage(&self, env: &EnvironmentSnapshot) -> f64 {
        let traj = braking_trajectory(&env.ego, env.time, self.params.behavior.a_emergency);
        impact_speed(&traj, env.time, env, EVADE_HORIZON).unwrap_or(0.0)
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for EmergencyStop {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        let anticipated = anticipate_collision(env, self.params.behavior.ttc_emergency).is_some();
        Ok(BehaviorSignals::new(anticipated, env.ego.speed > 0.05))
    }

    fn expected_cost(&self, env: &EnvironmentSnapshot) -> Result<f64, BehaviorFault> {
        Ok(self.damage(env))
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        Ok(ManeuverCommand::Trajectory(braking_trajectory(&env.ego, env.time, self.params.behavior.a_emergency)))
    }
}

/// Lateral shift of at most half a lane width at constant speed.
pub fn evade_trajectory(ego: &EgoState, t0: f64, shift: f64, t_shift: f64) -> TrajectoryCommand {
    let v = ego_velocity(ego);
    let n = (EVADE_HORIZON / CHECK_DT).round() as usize;
    let points = (0..=n)
        .map(|k| {
            let t = k as f64 * CHECK_DT;
            let (lat, lat_rate) = if t < t_shift {
                let w = PI / t_shift;
                (shift * (1.0 - (w * t).cos()) / 2.0, shift * w * (w * t).sin() / 2.0)
            } else {
                (shift, 0.0)
            };
            let mut pose = ego.pose.offset(v * t, lat);
            pose.heading += lat_rate.atan2(v.abs().max(0.1));
            TrajectoryPoint { t: t0 + t, pose, speed: v }
        })
        .collect();
    TrajectoryCommand::new(points).expect("increasing timestamps")
}

/// Swerve around an anticipated collision inside the lane.
pub struct EvadeObject {
    name: String,
    params: Arc<DrivingParams>,
    plan: Option<(TrajectoryCommand, f64)>,
}

impl EvadeObject {
    pub fn new(name: impl Into<String>, params: Arc<DrivingParams>) -> Self {
        Self { name: name.into(), params, plan: None }
    }

    /// Smallest collision-free shift, preferring left on ties, with the time
    /// at which the shift is complete.
    pub fn find_escape(&self, env: &EnvironmentSnapshot) -> Option<(TrajectoryCommand, f64)> {
        let a = anticipate_collision(env, self.params.behavior.ttc_emergency)?;
        let width = env.ego_lane.map_or(DEFAULT_LANE_WIDTH, |l| env.map.lane(l).width);
        let t_shift = a.ttc.max(0.6);
        let steps = ((width / 2.0) / EVADE_STEP + 1e-9).floor() as usize;
        (1..=steps)
            .flat_map(|k| [k as f64 * EVADE_STEP, -(k as f64) * EVADE_STEP])
            .map(|shift| evade_trajectory(&env.ego, env.time, shift, t_shift))
            .find(|traj| impact_speed(traj, env.time, env, EVADE_HORIZON).is_none())
            .map(|traj| (traj, env.time + t_shift))
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for EvadeObject {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        let invocation = self.find_escape(env).is_some();
        let commitment = self.plan.as_ref().is_some_and(|(_, done)| env.time < *done);
        Ok(BehaviorSignals::new(invocation, commitment))
    }

    fn expected_cost(&self, env: &EnvironmentSnapshot) -> Result<f64, BehaviorFault> {
        let traj = match &self.plan {
            Some((t, _)) => t.clone(),
            None => self.find_escape(env).map(|(t, _)| t).ok_or_else(|| fault("no escape path"))?,
        };
        Ok(impact_speed(&traj, env.time, env, EVADE_HORIZON).unwrap_or(0.0))
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        if self.plan.is_none() {
            self.plan = self.find_escape(env);
        }
        let (traj, _) = self.plan.as_ref().ok_or_else(|| fault("no escape path"))?;
        Ok(ManeuverCommand::Trajectory(traj.clone()))
    }

    fn gain_control(&mut self, env: &EnvironmentSnapshot) {
        self.plan = self.find_escape(env);
    }

    fn lose_control(&mut self, _env: &EnvironmentSnapshot) {
        self.plan = None;
    }
}

/// Comfortable stop that then holds standstill. Always applicable.
pub struct SafeStop {
    name: String,
    params: Arc<DrivingParams>,
}

impl SafeStop {
    pub fn new(name: impl Into<String>, params: Arc<DrivingParams>) -> Self {
        Self { name: name.into(), params }
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for SafeStop {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, _env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        Ok(BehaviorSignals::new(true, true))
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        Ok(ManeuverCommand::Trajectory(braking_trajectory(&env.ego, env.time, self.params.cost.a_cmf)))
    }
}
