use std::sync::Arc;

use arbitration_core::{Behavior, BehaviorFault, BehaviorSignals};
use serde::Serialize;

use super::{fault, LaneRules};
use crate::estimate::{assess_gap, expected_average_velocity, urban_cost};
use crate::maneuver::{
    build_transition_corridor, flag_objects, Corridor, CorridorCommand, LaneChangeStatus, ManeuverCommand,
};
use crate::params::DrivingParams;
use crate::world::{EnvironmentSnapshot, LaneGraphMap, LaneId, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneChangePhase {
    Idle,
    Executing,
    Aborting,
}

/// Lane change into the neighbour lane on one side. The maneuver latches
/// start and target lane when it begins and stays committed until the ego
/// is fully inside the target lane, or fully back in the start lane after an
/// abort.
pub struct ChangeLane {
    name: String,
    side: Side,
    rules: LaneRules,
    params: Arc<DrivingParams>,
    phase: LaneChangePhase,
    start: LaneId,
    target: LaneId,
    maneuvers: u64,
}

fn fully_in(map: &LaneGraphMap, lane: LaneId, env: &EnvironmentSnapshot) -> bool {
    let rect = env.ego.footprint();
    let l = map.lane(lane);
    l.contains_rect(&rect) || l.successors.iter().any(|&s| map.lane(s).contains_rect(&rect))
}

fn area_in(map: &LaneGraphMap, lane: LaneId, env: &EnvironmentSnapshot) -> f64 {
    let rect = env.ego.footprint();
    let l = map.lane(lane);
    std::iter::once(l.area_fraction(&rect))
        .chain(l.successors.iter().map(|&s| map.lane(s).area_fraction(&rect)))
        .fold(0.0, f64::max)
}

impl ChangeLane {
    pub fn new(name: impl Into<String>, side: Side, rules: LaneRules, params: Arc<DrivingParams>) -> Self {
        Self {
            name: name.into(),
            side,
            rules,
            params,
            phase: LaneChangePhase::Idle,
            start: 0,
            target: 0,
            maneuvers: 0,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn phase(&self) -> LaneChangePhase {
        self.phase
    }

    /// Phase after accounting for a maneuver that has just finished.
    fn ongoing(&self, env: &EnvironmentSnapshot) -> Option<LaneChangePhase> {
        match self.phase {
            LaneChangePhase::Executing if !fully_in(&env.map, self.target, env) => Some(LaneChangePhase::Executing),
            LaneChangePhase::Aborting if !fully_in(&env.map, self.start, env) => Some(LaneChangePhase::Aborting),
            _ => None,
        }
    }

    /// Start and target lane for a new maneuver, if one may begin now.
    pub fn candidate(&self, env: &EnvironmentSnapshot) -> Option<(LaneId, LaneId)> {
        let (ego, target) = self.rules.target_lane(env, self.side)?;
        assess_gap(&env.map, target, &env.ego, &env.objects, &self.params.behavior)
            .feasible
            .then_some((ego, target))
    }

    fn corridor(&self, env: &EnvironmentSnapshot, from: LaneId, to: LaneId, side: Side) -> Result<Corridor, BehaviorFault> {
        let p = &self.params.behavior;
        build_transition_corridor(&env.map, &env.route, from, to, side, &env.ego, p.d_max_lane_change, p.a_lat_max)
            .map_err(fault)
    }

    /// Corridor and remaining lane changes for what the block would do now.
    fn plan(&self, env: &EnvironmentSnapshot) -> Result<(Corridor, u32), BehaviorFault> {
        let (from, to, side) = match self.ongoing(env) {
            Some(LaneChangePhase::Executing) => (self.start, self.target, self.side),
            Some(LaneChangePhase::Aborting) => (self.target, self.start, self.side.opposite()),
            _ => {
                let (ego, target) = self.candidate(env).ok_or_else(|| fault("no feasible gap"))?;
                (ego, target, self.side)
            }
        };
        let corridor = self.corridor(env, from, to, side)?;
        Ok((corridor, env.route.changes_needed(to).unwrap_or(0)))
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for ChangeLane {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        Ok(BehaviorSignals::new(self.candidate(env).is_some(), self.ongoing(env).is_some()))
    }

    fn expected_cost(&self, env: &EnvironmentSnapshot) -> Result<f64, BehaviorFault> {
        let (corridor, n) = self.plan(env)?;
        let v_hat = expected_average_velocity(&corridor, env.ego.speed, &self.params.cost);
        Ok(urban_cost(v_hat, n, true, &self.params.cost))
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        match self.ongoing(env) {
            None => {
                let (start, target) = self.candidate(env).ok_or_else(|| fault("no feasible gap"))?;
                self.start = start;
                self.target = target;
                self.phase = LaneChangePhase::Executing;
                self.maneuvers += 1;
            }
            Some(LaneChangePhase::Executing) => {
                let gap = assess_gap(&env.map, self.target, &env.ego, &env.objects, &self.params.behavior);
                if !gap.feasible && area_in(&env.map, self.target, env) < 0.5 {
                    self.phase = LaneChangePhase::Aborting;
                }
            }
            _ => {}
        }
        let aborting = self.phase == LaneChangePhase::Aborting;
        let (from, to, side) = if aborting {
            (self.target, self.start, self.side.opposite())
        } else {
            (self.start, self.target, self.side)
        };
        let corridor = self.corridor(env, from, to, side)?;
        let tag = if aborting { format!("abort_to_{side}") } else { format!("change_{side}") };
        let variant = flag_objects(&corridor, &env.objects, &env.ego, &tag);
        let mut cmd = CorridorCommand::new(corridor, variant);
        cmd.turn_signal = Some(side);
        cmd.lane_change = Some(LaneChangeStatus {
            id: self.maneuvers,
            start_lane: self.start,
            target_lane: self.target,
            aborting,
        });
        Ok(ManeuverCommand::Corridor(Box::new(cmd)))
    }

    fn gain_control(&mut self, _env: &EnvironmentSnapshot) {
        self.phase = LaneChangePhase::Idle;
    }

    fn lose_control(&mut self, _env: &EnvironmentSnapshot) {
        self.phase = LaneChangePhase::Idle;
    }
}
