//! Three-phase merge into dense traffic: approach a gap, indicate, merge.

use std::sync::Arc;

use arbitration_core::{Behavior, BehaviorFault, BehaviorSignals};

use super::{fault, ChangeLane, LaneRules};
use crate::estimate::{assess_gap, expected_average_velocity, urban_cost, LaneFrame};
use crate::maneuver::{build_follow_corridor, build_transition_corridor, flag_objects, CorridorCommand, ManeuverCommand};
use crate::params::{BehaviorParams, DrivingParams};
use crate::world::{EnvironmentSnapshot, LaneId, Side};

/// Alignment tolerance for the approach phase.
pub const ALIGNED: f64 = 2.0;
const WINDOW_BEHIND: f64 = 60.0;
const WINDOW_AHEAD: f64 = 80.0;

/// A space between consecutive vehicles in the target lane, seen from the ego.
#[derive(Debug, Clone, PartialEq)]
pub struct Gap {
    pub rear: Option<String>,
    pub front: Option<String>,
    /// Bumper-to-bumper length, clipped to the search window.
    pub length: f64,
    /// Signed distance from the ego to where it should be to merge.
    pub offset: f64,
    pub speed: f64,
}

/// Gaps in `lane` near the ego that leave room for the minimum distances.
pub fn find_gaps(env: &EnvironmentSnapshot, lane: LaneId, params: &BehaviorParams) -> Vec<Gap> {
    let frame = LaneFrame::new(&env.map, lane, 150.0, 200.0);
    let (s_ego, _) = frame.locate(env.ego.pose.position());
    let ego_half = env.ego.shape.length / 2.0;
    let lo_win = s_ego - WINDOW_BEHIND;
    let hi_win = s_ego + WINDOW_AHEAD;
    let mut cars: Vec<(f64, f64, f64, &str)> = env
        .objects
        .iter()
        .filter(|o| !o.is_virtual_stop)
        .filter_map(|o| {
            let (s, d) = frame.locate(o.pose.position());
            let inside = d.abs() <= frame.half_width && s + o.shape.length / 2.0 > lo_win && s - o.shape.length / 2.0 < hi_win;
            inside.then(|| (s, o.shape.length / 2.0, frame.longitudinal_speed(s, o.pose.heading, o.speed), o.id.as_str()))
        })
        .collect();
    cars.sort_by(|a, b| a.0.total_cmp(&b.0));
    let limit = env.map.lane(lane).speed_limit;
    let mut gaps = Vec::new();
    for k in 0..=cars.len() {
        let rear = k.checked_sub(1).map(|i| cars[i]);
        let front = cars.get(k).copied();
        let rear_edge = rear.map_or(lo_win, |c| c.0 + c.1);
        let front_edge = front.map_or(hi_win, |c| c.0 - c.1);
        let lo = rear_edge + params.d_min_behind + ego_half;
        let hi = front_edge - params.d_min_ahead - ego_half;
        if lo > hi {
            continue;
        }
        let target = match (rear, front) {
            (Some(_), Some(_)) => (lo + hi) / 2.0,
            _ => s_ego.clamp(lo, hi),
        };
        let speed = match (rear, front) {
            (Some(r), Some(f)) => (r.2 + f.2) / 2.0,
            (Some(c), None) | (None, Some(c)) => c.2,
            (None, None) => limit,
        };
        gaps.push(Gap {
            rear: rear.map(|c| c.3.to_string()),
            front: front.map(|c| c.3.to_string()),
            length: front_edge - rear_edge,
            offset: target - s_ego,
            speed,
        });
    }
    gaps
}

/// Largest gap, ties broken by proximity.
pub fn best_gap(gaps: &[Gap]) -> Option<&Gap> {
    gaps.iter().fold(None, |best: Option<&Gap>, g| match best {
        Some(b) if b.length > g.length + 1e-6 => best,
        Some(b) if (b.length - g.length).abs() <= 1e-6 && b.offset.abs() <= g.offset.abs() => best,
        _ => Some(g),
    })
}

/// Shared situation analysis of the merge phases.
#[derive(Clone)]
struct MergeContext {
    side: Side,
    rules: LaneRules,
    params: Arc<DrivingParams>,
}

impl MergeContext {
    fn lanes(&self, env: &EnvironmentSnapshot) -> Option<(LaneId, LaneId)> {
        self.rules.target_lane(env, self.side)
    }

    fn gap(&self, env: &EnvironmentSnapshot) -> Option<Gap> {
        let (_, target) = self.lanes(env)?;
        best_gap(&find_gaps(env, target, &self.params.behavior)).cloned()
    }

    fn cost(&self, env: &EnvironmentSnapshot) -> Result<f64, BehaviorFault> {
        let (ego, target) = self.lanes(env).ok_or_else(|| fault("no merge target lane"))?;
        let p = &self.params.behavior;
        let corridor = build_transition_corridor(&env.map, &env.route, ego, target, self.side, &env.ego, p.d_max_lane_change, p.a_lat_max)
            .map_err(fault)?;
        let v_hat = expected_average_velocity(&corridor, env.ego.speed, &self.params.cost);
        let n = env.route.changes_needed(target).unwrap_or(0);
        Ok(urban_cost(v_hat, n, true, &self.params.cost))
    }

    /// Stays in lane while adjusting speed to line up with the best gap.
    fn align_command(&self, env: &EnvironmentSnapshot, tag: &str) -> Result<CorridorCommand, BehaviorFault> {
        let (ego, _) = self.lanes(env).ok_or_else(|| fault("no merge target lane"))?;
        let gap = self.gap(env).ok_or_else(|| fault("no usable gap"))?;
        let mut corridor = build_follow_corridor(&env.map, &env.route, ego, &env.ego.pose, self.params.behavior.a_lat_max)
            .map_err(fault)?;
        corridor.limit_speed((gap.speed + 0.5 * gap.offset).max(0.0));
        let variant = flag_objects(&corridor, &env.objects, &env.ego, tag);
        Ok(CorridorCommand::new(corridor, variant))
    }
}

/// Adjusts speed until the ego is beside the best gap.
pub struct ApproachGap {
    name: String,
    ctx: MergeContext,
    require_infeasible: bool,
}

impl ApproachGap {
    /// With `require_infeasible` the block only applies while no gap is
    /// directly usable, leaving that case to a plain lane change.
    pub fn new(name: impl Into<String>, side: Side, rules: LaneRules, params: Arc<DrivingParams>, require_infeasible: bool) -> Self {
        Self { name: name.into(), ctx: MergeContext { side, rules, params }, require_infeasible }
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for ApproachGap {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        let Some((_, target)) = self.ctx.lanes(env) else {
            return Ok(BehaviorSignals::NONE);
        };
        let gap = self.ctx.gap(env);
        let blocked = !self.require_infeasible
            || !assess_gap(&env.map, target, &env.ego, &env.objects, &self.ctx.params.behavior).feasible;
        let aligned = gap.as_ref().is_some_and(|g| g.offset.abs() < ALIGNED);
        Ok(BehaviorSignals::new(gap.is_some() && blocked, gap.is_some() && !aligned))
    }

    fn expected_cost(&self, env: &EnvironmentSnapshot) -> Result<f64, BehaviorFault> {
        self.ctx.cost(env)
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        Ok(ManeuverCommand::Corridor(Box::new(self.ctx.align_command(env, "approach_gap")?)))
    }
}

/// Holds position next to the gap with the turn signal on for a fixed time.
pub struct IndicateIntention {
    name: String,
    ctx: MergeContext,
    started: Option<f64>,
}

impl IndicateIntention {
    pub fn new(name: impl Into<String>, side: Side, rules: LaneRules, params: Arc<DrivingParams>) -> Self {
        Self { name: name.into(), ctx: MergeContext { side, rules, params }, started: None }
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for IndicateIntention {
    fn name(&self) -> &str {
        &self.name
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        let invocation = self.ctx.gap(env).is_some();
        let t_indicate = self.ctx.params.behavior.t_indicate;
        let commitment = self.started.is_some_and(|t0| env.time - t0 < t_indicate - 1e-9);
        Ok(BehaviorSignals::new(invocation, commitment))
    }

    fn expected_cost(&self, env: &EnvironmentSnapshot) -> Result<f64, BehaviorFault> {
        self.ctx.cost(env)
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        let mut cmd = self.ctx.align_command(env, "indicate")?;
        cmd.turn_signal = Some(self.ctx.side);
        Ok(ManeuverCommand::Corridor(Box::new(cmd)))
    }

    fn gain_control(&mut self, env: &EnvironmentSnapshot) {
        self.started = Some(env.time);
    }

    fn lose_control(&mut self, _env: &EnvironmentSnapshot) {
        self.started = None;
    }
}

/// Final merge phase: an ordinary lane change, applicable once the gap is
/// usable.
pub struct MergeIntoGap {
    inner: ChangeLane,
}

impl MergeIntoGap {
    pub fn new(name: impl Into<String>, side: Side, rules: LaneRules, params: Arc<DrivingParams>) -> Self {
        Self { inner: ChangeLane::new(name, side, rules, params) }
    }
}

impl Behavior<EnvironmentSnapshot, ManeuverCommand> for MergeIntoGap {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn signals(&self, env: &EnvironmentSnapshot) -> Result<BehaviorSignals, BehaviorFault> {
        self.inner.signals(env)
    }

    fn expected_cost(&self, env: &EnvironmentSnapshot) -> Result<f64, BehaviorFault> {
        self.inner.expected_cost(env)
    }

    fn command(&mut self, env: &EnvironmentSnapshot) -> Result<ManeuverCommand, BehaviorFault> {
        self.inner.command(env)
    }

    fn gain_control(&mut self, env: &EnvironmentSnapshot) {
        self.inner.gain_control(env);
    }

    fn lose_control(&mut self, env: &EnvironmentSnapshot) {
        self.inner.lose_control(env);
    }
}
