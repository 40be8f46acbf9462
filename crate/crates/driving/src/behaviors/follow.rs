use std::sync::Arc;

use arbitration_core::{Behavior, BehaviorFault, BehaviorSignals};

use super::{fault, LaneRules};
use crate::estimate::{expected_average_velocity, urban_cost};
use crate::maneuver::{build_follow_corridor, flag_objects, Corridor, CorridorCommand, ManeuverCommand};
use crate::params::DrivingParams;
use crate::world::EnvironmentSnapshot;

/// Keeps the current route lane. Used as FollowEgoLane and FollowHighwayLane.
pub struct FollowLane {
    name: String,
    rules: LaneRules,
    params: Arc<DrivingParams>,
}

impl FollowLane {
    pub fn new(name: impl Into<String>, rules: LaneRules, params: Arc<DrivingParams>) -> Self {
        Self { name: name.into(), rules, params }
    }

    pub fn corridor(&self, env: &EnvironmentSnapshot) -> Result<Corridor, BehaviorFault> {
        let lane = self.rules.ego_lane(env).ok_or_else(|| fault("ego is not on a route lane"))?;
        build_follow_corridor(&env.map, &env.route, lane, &env.ego.pose, self.params.behavior.a_lat_max).map_err(fault)
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for FollowLane {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        let ok = self.rules.ego_lane(env).is_some();
        Ok(BehaviorSignals::new(ok, ok))
    }

    fn expected_cost(&self, env: &EnvironmentSnapshot) -> Result<f64, BehaviorFault> {
        let lane = self.rules.ego_lane(env).ok_or_else(|| fault("ego is not on a route lane"))?;
        let corridor = self.corridor(env)?;
        let v_hat = expected_average_velocity(&corridor, env.ego.speed, &self.params.cost);
        let n = env.route.changes_needed(lane).unwrap_or(0);
        Ok(urban_cost(v_hat, n, false, &self.params.cost))
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        let corridor = self.corridor(env)?;
        let variant = flag_objects(&corridor, &env.objects, &env.ego, "keep_lane");
        Ok(ManeuverCommand::Corridor(Box::new(CorridorCommand::new(corridor, variant))))
    }
}
