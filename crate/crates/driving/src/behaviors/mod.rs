//! Behavior blocks of the driving graph.

mod change_lane;
mod emergency;
mod follow;
mod intersection;
mod merge;
mod parking;

pub use change_lane::{ChangeLane, LaneChangePhase};
pub use emergency::{anticipate_collision, Anticipation, EmergencyStop, EvadeObject, SafeStop};
pub use follow::FollowLane;
pub use intersection::{crossing_conflict, CrossIntersection};
pub use merge::{find_gaps, ApproachGap, Gap, IndicateIntention, MergeIntoGap};
pub use parking::{LeaveGarage, ParkNearGoal};

use arbitration_core::BehaviorFault;

use crate::world::{EnvironmentSnapshot, LaneId, LaneKind, Side};

/// Which lane kinds a block may start from and change into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneRules {
    pub ego: &'static [LaneKind],
    pub target: &'static [LaneKind],
}

impl LaneRules {
    pub const URBAN: LaneRules = LaneRules {
        ego: &[LaneKind::Urban, LaneKind::Offramp],
        target: &[LaneKind::Urban, LaneKind::Offramp],
    };
    pub const HIGHWAY: LaneRules = LaneRules {
        ego: &[LaneKind::Highway, LaneKind::Onramp],
        target: &[LaneKind::Highway],
    };
    pub const ONRAMP: LaneRules = LaneRules { ego: &[LaneKind::Onramp], target: &[LaneKind::Highway] };
    pub const EXIT: LaneRules = LaneRules { ego: &[LaneKind::Highway], target: &[LaneKind::Offramp] };

    /// Ego lane when it is routable and of an accepted kind.
    pub fn ego_lane(&self, env: &EnvironmentSnapshot) -> Option<LaneId> {
        env.ego_lane.filter(|&l| {
            self.ego.contains(&env.map.lane(l).kind) && env.route.changes_needed(l).is_some()
        })
    }

    /// Reachable, routable neighbour of the ego lane on `side`.
    pub fn target_lane(&self, env: &EnvironmentSnapshot, side: Side) -> Option<(LaneId, LaneId)> {
        let ego = self.ego_lane(env)?;
        let adj = env.map.lane(ego).adjacent(side)?;
        let ok = adj.reachable
            && self.target.contains(&env.map.lane(adj.lane).kind)
            && env.route.changes_needed(adj.lane).is_some();
        ok.then_some((ego, adj.lane))
    }
}

fn fault(e: impl std::fmt::Display) -> BehaviorFault {
    BehaviorFault::new(e.to_string())
}
