//! Builds the full driving graph from a configuration.

use std::sync::Arc;

use arbitration_core::{ArbitrationGraph, ArbitratorSpec, BehaviorOption, GraphError, Node};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behaviors::{
    ApproachGap, ChangeLane, CrossIntersection, EmergencyStop, EvadeObject, FollowLane, IndicateIntention, LaneRules,
    LeaveGarage, MergeIntoGap, ParkNearGoal, SafeStop,
};
use crate::maneuver::ManeuverCommand;
use crate::params::{kmh, BehaviorParams, DrivingParams};
use crate::world::{EnvironmentSnapshot, Side};

pub type DrivingGraph = ArbitrationGraph<EnvironmentSnapshot, ManeuverCommand>;
pub type DrivingNode = Node<EnvironmentSnapshot, ManeuverCommand>;

/// Which subtrees to build and how their arbitrators behave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub urban: bool,
    /// Adds the MergeIntoLane sequences to UrbanDriving.
    pub merge_sequences: bool,
    pub intersection: bool,
    pub highway: bool,
    pub parking: bool,
    pub emergency: bool,
    pub safe_stop: bool,
    pub root_interruptible: bool,
    pub parking_interruptible: bool,
    pub urban_margin_kmh: f64,
    pub highway_margin_kmh: f64,
    pub emergency_margin: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            urban: true,
            merge_sequences: true,
            intersection: true,
            highway: true,
            parking: true,
            emergency: true,
            safe_stop: true,
            root_interruptible: true,
            parking_interruptible: false,
            urban_margin_kmh: 1.0,
            highway_margin_kmh: 2.0,
            emergency_margin: 0.0,
        }
    }
}

impl GraphConfig {
    /// Urban driving, parking and SafeStop only.
    pub fn experiment() -> Self {
        Self {
            merge_sequences: false,
            intersection: false,
            highway: false,
            emergency: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("SafeStop cannot be disabled")]
    SafeStopDisabled,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parameter sets the blocks are built with.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphParams {
    pub urban: Arc<DrivingParams>,
    pub highway: Arc<DrivingParams>,
}

impl GraphParams {
    pub fn new(params: DrivingParams, highway: BehaviorParams) -> Self {
        let highway = DrivingParams { behavior: highway, cost: params.cost };
        Self { urban: Arc::new(params), highway: Arc::new(highway) }
    }
}

impl Default for GraphParams {
    fn default() -> Self {
        Self::new(DrivingParams::default(), BehaviorParams::highway())
    }
}

fn merge_sequence(id: &str, prefix: &str, side: Side, rules: LaneRules, params: &Arc<DrivingParams>, require_infeasible: bool) -> DrivingNode {
    Node::arbitrator(
        id,
        ArbitratorSpec::sequence(),
        [
            Node::block(ApproachGap::new(format!("{prefix}ApproachGap{}", side.label()), side, rules, params.clone(), require_infeasible)).into(),
            Node::block(IndicateIntention::new(format!("{prefix}IndicateIntention{}", side.label()), side, rules, params.clone())).into(),
            Node::block(MergeIntoGap::new(format!("{prefix}MergeIntoGap{}", side.label()), side, rules, params.clone())).into(),
        ],
    )
}

fn urban_driving(config: &GraphConfig, p: &Arc<DrivingParams>, extra: Vec<DrivingNode>) -> DrivingNode {
    let rules = LaneRules::URBAN;
    let mut options: Vec<BehaviorOption<_, _>> = vec![
        BehaviorOption::new(Node::block(FollowLane::new("FollowEgoLane", rules, p.clone()))).interruptible(true),
        Node::block(ChangeLane::new("ChangeLaneLeft", Side::Left, rules, p.clone())).into(),
        Node::block(ChangeLane::new("ChangeLaneRight", Side::Right, rules, p.clone())).into(),
    ];
    if config.merge_sequences {
        for side in [Side::Left, Side::Right] {
            options.push(merge_sequence(&format!("MergeIntoLane{}", side.label()), "", side, rules, p, true).into());
        }
    }
    options.extend(extra.into_iter().map(BehaviorOption::new));
    Node::arbitrator(
        "UrbanDriving",
        ArbitratorSpec::cost(kmh(config.urban_margin_kmh)).interruptible(false),
        options,
    )
}

fn highway_driving(config: &GraphConfig, p: &Arc<DrivingParams>) -> DrivingNode {
    let rules = LaneRules::HIGHWAY;
    Node::arbitrator(
        "HighwayDriving",
        ArbitratorSpec::cost(kmh(config.highway_margin_kmh)).interruptible(false),
        [
            merge_sequence("MergeOntoHighway", "Highway", Side::Left, LaneRules::ONRAMP, p, false).into(),
            BehaviorOption::new(Node::block(FollowLane::new("FollowHighwayLane", rules, p.clone()))).interruptible(true),
            Node::block(ChangeLane::new("ChangeHighwayLaneLeft", Side::Left, rules, p.clone())).into(),
            Node::block(ChangeLane::new("ChangeHighwayLaneRight", Side::Right, rules, p.clone())).into(),
            Node::block(ChangeLane::new("ExitFromHighway", Side::Right, LaneRules::EXIT, p.clone())).into(),
        ],
    )
}

/// Builds the driving graph. `extra_urban` nodes are appended to the
/// UrbanDriving options, which is how tests inject additional blocks.
pub fn build_automated_driving_graph_with(
    config: &GraphConfig,
    params: &GraphParams,
    extra_urban: Vec<DrivingNode>,
) -> Result<DrivingGraph, AssemblyError> {
    if !config.safe_stop {
        return Err(AssemblyError::SafeStopDisabled);
    }
    let p = &params.urban;
    let mut root: Vec<DrivingNode> = Vec::new();
    if config.emergency {
        root.push(Node::arbitrator(
            "AvoidCollisionInLastResort",
            ArbitratorSpec::cost(config.emergency_margin),
            [
                Node::block(EmergencyStop::new("EmergencyStop", p.clone())).into(),
                Node::block(EvadeObject::new("EvadeObject", p.clone())).into(),
            ],
        ));
    }
    if config.parking {
        root.push(Node::arbitrator(
            "Parking",
            ArbitratorSpec::priority().interruptible(config.parking_interruptible),
            [
                Node::block(LeaveGarage::new("LeaveGarage", p.clone())).into(),
                Node::block(ParkNearGoal::new("ParkNearGoal", p.clone())).into(),
            ],
        ));
    }
    if config.intersection {
        root.push(Node::block(CrossIntersection::new("CrossIntersection", p.clone())));
    }
    if config.urban {
        root.push(urban_driving(config, p, extra_urban));
    }
    if config.highway {
        root.push(highway_driving(config, &params.highway));
    }
    root.push(Node::block(SafeStop::new("SafeStop", p.clone())));
    let root = Node::arbitrator(
        "AutomatedDriving",
        ArbitratorSpec::priority().interruptible(config.root_interruptible),
        root.into_iter().map(BehaviorOption::new),
    );
    Ok(ArbitrationGraph::new(root)?)
}

pub fn build_automated_driving_graph(config: &GraphConfig, params: &GraphParams) -> Result<DrivingGraph, AssemblyError> {
    build_automated_driving_graph_with(config, params, Vec::new())
}
