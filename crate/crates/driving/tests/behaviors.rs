use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use arbitration_core::{Behavior, BehaviorSignals};
use arbitration_driving::behaviors::{crossing_conflict, find_gaps, ChangeLane, CrossIntersection, FollowLane, LaneChangePhase, LaneRules};
use arbitration_driving::estimate::{expected_average_velocity, urban_cost};
use arbitration_driving::geometry::{Point, Pose, Shape};
use arbitration_driving::maneuver::{build_follow_corridor, ManeuverCommand};
use arbitration_driving::params::DrivingParams;
use arbitration_driving::world::{EgoState, EnvironmentSnapshot, LaneDef, LaneGraphMap, Route, RouteInfo, Side, TrackedObject};

const CAR: Shape = Shape::new(4.5, 1.8);

fn params() -> Arc<DrivingParams> {
    Arc::new(DrivingParams::default())
}

/// Two parallel lanes, L at y = 3.5 and R at y = 0; the route ends on R.
fn two_lanes() -> (Arc<LaneGraphMap>, Arc<RouteInfo>) {
    let map = LaneGraphMap::from_defs(
        vec![
            LaneDef::new("L", vec![Point::new(0.0, 3.5), Point::new(400.0, 3.5)], 3.5, 13.89).right("R", true),
            LaneDef::new("R", vec![Point::new(0.0, 0.0), Point::new(400.0, 0.0)], 3.5, 13.89).left("L", true),
        ],
        vec![],
        vec![],
    )
    .unwrap();
    let route = RouteInfo::new(&map, Route { lanes: vec![0, 1], goal: Pose::new(380.0, 0.0, 0.0), parking_spot: None }).unwrap();
    (Arc::new(map), Arc::new(route))
}

fn snapshot(map: &Arc<LaneGraphMap>, route: &Arc<RouteInfo>, t: f64, ego: Pose, speed: f64, objects: Vec<TrackedObject>) -> EnvironmentSnapshot {
    EnvironmentSnapshot::new(t, map.clone(), route.clone(), EgoState::new(ego, speed, CAR), objects)
}

fn car(id: &str, x: f64, y: f64, speed: f64) -> TrackedObject {
    TrackedObject::new(id, Pose::new(x, y, 0.0), speed, CAR).with_prediction(4.0, 0.25)
}

#[test]
fn follow_lane_cost_matches_formula() {
    let (map, route) = two_lanes();
    let follow = FollowLane::new("FollowEgoLane", LaneRules::URBAN, params());
    let env = snapshot(&map, &route, 0.0, Pose::new(20.0, 3.5, 0.0), 10.0, vec![]);
    assert_eq!(follow.signals(&env).unwrap(), BehaviorSignals::new(true, true));
    let corridor = follow.corridor(&env).unwrap();
    let v_hat = expected_average_velocity(&corridor, 10.0, &params().cost);
    let expected = urban_cost(v_hat, 1, false, &params().cost);
    assert!((follow.expected_cost(&env).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn follow_lane_off_route_is_not_applicable() {
    let (map, route) = two_lanes();
    let follow = FollowLane::new("FollowEgoLane", LaneRules::URBAN, params());
    let env = snapshot(&map, &route, 0.0, Pose::new(20.0, 40.0, 0.0), 10.0, vec![]);
    assert!(!follow.signals(&env).unwrap().invocation);
    assert!(follow.expected_cost(&env).is_err());
}

#[test]
fn change_lane_needs_a_gap() {
    let (map, route) = two_lanes();
    let change = ChangeLane::new("ChangeLaneRight", Side::Right, LaneRules::URBAN, params());
    let ego = Pose::new(50.0, 3.5, 0.0);
    let free = snapshot(&map, &route, 0.0, ego, 10.0, vec![]);
    assert!(change.signals(&free).unwrap().invocation);
    let alongside = snapshot(&map, &route, 0.0, ego, 10.0, vec![car("beside", 52.0, 0.0, 10.0)]);
    assert!(!change.signals(&alongside).unwrap().invocation);
    assert!(change.expected_cost(&alongside).is_err());
    // There is no lane to the left of L.
    let left = ChangeLane::new("ChangeLaneLeft", Side::Left, LaneRules::URBAN, params());
    assert!(!left.signals(&free).unwrap().invocation);
}

#[test]
fn change_lane_latches_until_inside_target() {
    let (map, route) = two_lanes();
    let mut change = ChangeLane::new("ChangeLaneRight", Side::Right, LaneRules::URBAN, params());
    let env = snapshot(&map, &route, 0.0, Pose::new(50.0, 3.5, 0.0), 10.0, vec![]);
    change.gain_control(&env);
    let ManeuverCommand::Corridor(cmd) = change.command(&env).unwrap() else { panic!("corridor expected") };
    assert_eq!(change.phase(), LaneChangePhase::Executing);
    assert_eq!(cmd.turn_signal, Some(Side::Right));
    let status = cmd.lane_change.unwrap();
    assert_eq!((status.start_lane, status.target_lane, status.aborting), (0, 1, false));

    // Halfway across, with a car now alongside in the target lane: committed
    // although no longer invocable.
    let mid = snapshot(&map, &route, 1.0, Pose::new(60.0, 1.9, 0.0), 10.0, vec![car("beside", 60.0, 0.0, 10.0)]);
    assert_eq!(change.signals(&mid).unwrap(), BehaviorSignals::new(false, true));

    let done = snapshot(&map, &route, 3.0, Pose::new(80.0, 0.0, 0.0), 10.0, vec![]);
    assert!(!change.signals(&done).unwrap().commitment);
}

#[test]
fn change_lane_aborts_when_gap_collapses() {
    let (map, route) = two_lanes();
    let mut change = ChangeLane::new("ChangeLaneRight", Side::Right, LaneRules::URBAN, params());
    let env = snapshot(&map, &route, 0.0, Pose::new(50.0, 3.5, 0.0), 10.0, vec![]);
    change.gain_control(&env);
    change.command(&env).unwrap();

    // Mostly still in the start lane when a fast car closes in from behind.
    let closing = snapshot(&map, &route, 0.5, Pose::new(55.0, 2.3, 0.0), 10.0, vec![car("fast", 45.0, 0.0, 20.0)]);
    let ManeuverCommand::Corridor(cmd) = change.command(&closing).unwrap() else { panic!("corridor expected") };
    assert_eq!(change.phase(), LaneChangePhase::Aborting);
    assert!(cmd.lane_change.unwrap().aborting);
    assert_eq!(cmd.turn_signal, Some(Side::Left));
    assert!(change.signals(&closing).unwrap().commitment);

    let back = snapshot(&map, &route, 2.0, Pose::new(70.0, 3.5, 0.0), 10.0, vec![car("fast", 75.0, 0.0, 20.0)]);
    assert!(!change.signals(&back).unwrap().commitment);
}

#[test]
fn change_lane_does_not_abort_once_mostly_across() {
    let (map, route) = two_lanes();
    let mut change = ChangeLane::new("ChangeLaneRight", Side::Right, LaneRules::URBAN, params());
    let env = snapshot(&map, &route, 0.0, Pose::new(50.0, 3.5, 0.0), 10.0, vec![]);
    change.gain_control(&env);
    change.command(&env).unwrap();
    let late = snapshot(&map, &route, 2.0, Pose::new(70.0, 1.5, 0.0), 10.0, vec![car("fast", 60.0, 0.0, 20.0)]);
    change.command(&late).unwrap();
    assert_eq!(change.phase(), LaneChangePhase::Executing);
}

/// Approach lane, a 20 m intersection arm and an exit lane along the x axis.
fn crossing_map() -> (Arc<LaneGraphMap>, Arc<RouteInfo>) {
    let map = LaneGraphMap::from_defs(
        vec![
            LaneDef::new("in", vec![Point::new(0.0, 0.0), Point::new(50.0, 0.0)], 3.5, 13.89).successor("arm"),
            LaneDef::new("arm", vec![Point::new(50.0, 0.0), Point::new(70.0, 0.0)], 3.5, 8.0)
                .successor("out")
                .intersection_arm(),
            LaneDef::new("out", vec![Point::new(70.0, 0.0), Point::new(200.0, 0.0)], 3.5, 13.89),
        ],
        vec![],
        vec![],
    )
    .unwrap();
    let route = RouteInfo::new(&map, Route { lanes: vec![0, 1, 2], goal: Pose::new(190.0, 0.0, 0.0), parking_spot: None }).unwrap();
    (Arc::new(map), Arc::new(route))
}

fn cross_traffic(y: f64) -> TrackedObject {
    TrackedObject::new("cross", Pose::new(60.0, y, FRAC_PI_2), 10.0, CAR).with_prediction(8.0, 0.25)
}

#[test]
fn intersection_places_stop_line_for_crossing_traffic() {
    let (map, route) = crossing_map();
    let mut block = CrossIntersection::new("CrossIntersection", params());
    let env = snapshot(&map, &route, 0.0, Pose::new(30.0, 0.0, 0.0), 8.0, vec![cross_traffic(-30.0)]);
    assert!(block.signals(&env).unwrap().invocation);
    let ManeuverCommand::Corridor(cmd) = block.command(&env).unwrap() else { panic!("corridor expected") };
    assert_eq!(cmd.virtual_objects.len(), 1);
    assert!((cmd.virtual_objects[0].pose.x - 50.0).abs() < 0.5);

    let clear = snapshot(&map, &route, 0.0, Pose::new(30.0, 0.0, 0.0), 8.0, vec![cross_traffic(40.0)]);
    let ManeuverCommand::Corridor(cmd) = block.command(&clear).unwrap() else { panic!("corridor expected") };
    assert!(cmd.virtual_objects.is_empty());
}

#[test]
fn intersection_far_away_is_not_invoked() {
    let (map, route) = crossing_map();
    let block = CrossIntersection::new("CrossIntersection", params());
    let env = snapshot(&map, &route, 0.0, Pose::new(2.0, 0.0, 0.0), 8.0, vec![]);
    assert!(!block.signals(&env).unwrap().invocation);
    let inside = snapshot(&map, &route, 0.0, Pose::new(60.0, 0.0, 0.0), 8.0, vec![]);
    assert_eq!(block.signals(&inside).unwrap(), BehaviorSignals::new(true, true));
}

#[test]
fn crossing_conflict_respects_time_window() {
    let (map, route) = crossing_map();
    let corridor = build_follow_corridor(&map, &route, 0, &Pose::new(30.0, 0.0, 0.0), 2.0).unwrap();
    let p = &params().behavior;
    let near = [cross_traffic(-30.0)];
    assert!(crossing_conflict(&corridor, 20.0, 40.0, &near, 8.0, 4.5, p).is_some());
    // Reaches the crossing long after the ego has left it.
    let late = [TrackedObject::new("late", Pose::new(60.0, -75.0, FRAC_PI_2), 10.0, CAR).with_prediction(8.0, 0.25)];
    assert!(crossing_conflict(&corridor, 20.0, 40.0, &late, 8.0, 4.5, p).is_none());
}

#[test]
fn gaps_between_target_lane_cars() {
    let (map, route) = two_lanes();
    let env = snapshot(
        &map,
        &route,
        0.0,
        Pose::new(100.0, 3.5, 0.0),
        10.0,
        vec![car("rear", 80.0, 0.0, 10.0), car("front", 130.0, 0.0, 12.0)],
    );
    let gaps = find_gaps(&env, 1, &params().behavior);
    let between = gaps
        .iter()
        .find(|g| g.rear.as_deref() == Some("rear") && g.front.as_deref() == Some("front"))
        .expect("gap between the cars");
    assert!((between.length - 45.5).abs() < 1e-6, "{}", between.length);
    assert!((between.speed - 11.0).abs() < 1e-9);
    // Centre of the admissible stretch: (87.25 + 117.75) / 2 - 100.
    assert!((between.offset - 2.5).abs() < 1e-6, "{}", between.offset);
}
