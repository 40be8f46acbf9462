use arbitration_core::EvalMode;
use arbitration_driving::export::timeline_intervals;
use arbitration_driving::scenario::{parse_scenario_str, LoadedScenario};
use arbitration_driving::sim::{EventKind, Outcome, RunTrace};

fn load(text: &str) -> LoadedScenario {
    parse_scenario_str(text).expect("scenario parses")
}

fn run(text: &str) -> RunTrace {
    load(text).run(0, EvalMode::Sequential).expect("graph builds")
}

#[test]
fn bundled_scenarios_reach_their_outcomes() {
    let cases = [
        (include_str!("../../../scenarios/point_e.scn"), Outcome::GoalReached),
        (include_str!("../../../scenarios/double_lane_change.scn"), Outcome::GoalReached),
        (include_str!("../../../scenarios/end_of_route.scn"), Outcome::Parked),
        (include_str!("../../../scenarios/gap_collapse.scn"), Outcome::GoalReached),
        (include_str!("../../../scenarios/highway_merge.scn"), Outcome::GoalReached),
        (include_str!("../../../scenarios/intersection.scn"), Outcome::GoalReached),
    ];
    for (text, expected) in cases {
        let trace = run(text);
        assert_eq!(trace.outcome, expected, "{}", trace.scenario);
        assert_eq!(trace.events_of(EventKind::Collision).count(), 0);
    }
}

#[test]
fn point_e_timeline_has_three_bars() {
    let trace = run(include_str!("../../../scenarios/point_e.scn"));
    let names: Vec<_> = timeline_intervals(&trace).into_iter().map(|(n, _, _)| n).collect();
    assert_eq!(names, ["FollowEgoLane", "ChangeLaneRight", "FollowEgoLane"]);
}

#[test]
fn intersection_waits_for_crossing_car() {
    let trace = run(include_str!("../../../scenarios/intersection.scn"));
    // The crossing car drives along y = 0 from x = -60 at 10 m/s.
    let crossing_x = |t: f64| -60.0 + 10.0 * t;
    let entry = trace.ticks.iter().find(|t| t.ego.y > -12.25).expect("ego enters the junction");
    assert!(crossing_x(entry.time) > 5.0, "entered at t = {} with crossing car at x = {}", entry.time, crossing_x(entry.time));
    let slowest = trace.ticks.iter().map(|t| t.ego.speed).fold(f64::INFINITY, f64::min);
    assert!(slowest < 4.0, "{slowest}");
}

#[test]
fn highway_merge_runs_its_phases_in_order() {
    let trace = run(include_str!("../../../scenarios/highway_merge.scn"));
    let leaves = trace.leaf_sequence();
    let pos = |name: &str| leaves.iter().position(|l| l == name).unwrap_or_else(|| panic!("{name} missing from {leaves:?}"));
    let approach = pos("HighwayApproachGapLeft");
    let indicate = pos("HighwayIndicateIntentionLeft");
    let merge = pos("HighwayMergeIntoGapLeft");
    let follow = pos("FollowHighwayLane");
    assert!(approach < indicate && indicate < merge && merge < follow, "{leaves:?}");
}

#[test]
fn garage_exit_leaves_then_follows() {
    let trace = run(include_str!("../../../scenarios/garage_exit.scn"));
    let leaves = trace.leaf_sequence();
    assert_eq!(leaves.first().map(String::as_str), Some("LeaveGarage"));
    assert!(leaves.iter().any(|l| l == "FollowEgoLane"), "{leaves:?}");
}

#[test]
fn parallel_evaluation_matches_sequential() {
    for text in [
        include_str!("../../../scenarios/double_lane_change.scn"),
        include_str!("../../../scenarios/highway_merge.scn"),
    ] {
        let s = load(text);
        let seq = s.run(3, EvalMode::Sequential).unwrap();
        let par = s.run(3, EvalMode::Parallel).unwrap();
        assert_eq!(seq, par);
    }
}
