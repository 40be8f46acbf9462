//! Scenario files: JSON documents describing map, route, ego, agents and
//! all parameters of a run.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use arbitration_core::EvalMode;

use crate::assembly::{build_automated_driving_graph, AssemblyError, DrivingGraph, GraphConfig, GraphParams};
use crate::geometry::{Point, Pose, Shape};
use crate::params::{kmh, BehaviorParams, CostParams, CostParamsSpec, DrivingParams};
use crate::sim::{run_scenario, Agent, RunTrace, Scenario, SimConfig};
use crate::world::{validate_map, EgoState, LaneDef, LaneGraphMap, LaneKind, Route, RouteInfo, SpotDef, StaticObstacle};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Io,
    Syntax,
    MissingField,
    UnknownKey,
    DanglingRef,
    Version,
    Invalid,
    Map,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Io => "E_IO",
            ErrorCode::Syntax => "E_SYNTAX",
            ErrorCode::MissingField => "E_MISSING_FIELD",
            ErrorCode::UnknownKey => "E_UNKNOWN_KEY",
            ErrorCode::DanglingRef => "E_DANGLING_REF",
            ErrorCode::Version => "E_VERSION",
            ErrorCode::Invalid => "E_INVALID",
            ErrorCode::Map => "E_MAP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub code: ErrorCode,
    pub message: String,
    pub line: Option<usize>,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {l}): {}", self.code.as_str(), self.message),
            None => write!(f, "{}: {}", self.code.as_str(), self.message),
        }
    }
}

/// All problems found in one file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioErrors(pub Vec<ScenarioError>);

impl ScenarioErrors {
    fn one(code: ErrorCode, message: impl Into<String>, line: Option<usize>) -> Self {
        Self(vec![ScenarioError { code, message: message.into(), line }])
    }

    pub fn codes(&self) -> Vec<ErrorCode> {
        self.0.iter().map(|e| e.code).collect()
    }
}

impl fmt::Display for ScenarioErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioErrors {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighbourSpec {
    pub lane: String,
    #[serde(default = "yes")]
    pub reachable: bool,
}

fn yes() -> bool {
    true
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn default_width() -> f64 {
    3.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSpec {
    pub id: String,
    pub centerline: Vec<[f64; 2]>,
    #[serde(default = "default_width")]
    pub width: f64,
    pub speed_limit_kmh: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub successors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<NeighbourSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<NeighbourSpec>,
    #[serde(default)]
    pub kind: LaneKind,
    #[serde(default, skip_serializing_if = "is_false")]
    pub intersection_arm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotSpec {
    pub id: String,
    /// `[x, y, heading]`
    pub pose: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_lane: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub id: String,
    pub pose: [f64; 3],
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub lanes: Vec<LaneSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parking_spots: Vec<SpotSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub lanes: Vec<String>,
    pub goal: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parking_spot: Option<String>,
}

fn default_length() -> f64 {
    4.5
}

fn default_vehicle_width() -> f64 {
    1.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    pub pose: [f64; 3],
    /// m/s
    pub speed: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_vehicle_width")]
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSpec {
    ConstantVelocity { pose: [f64; 3], speed: f64 },
    LaneFollowing { lane: String, s: f64, speed_profile: Vec<[f64; 2]> },
    /// `[t, x, y]` waypoints.
    Scripted { waypoints: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_vehicle_width")]
    pub width: f64,
    pub motion: MotionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub name: String,
    pub map: MapSpec,
    pub route: RouteSpec,
    pub ego: EgoSpec,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub behavior_params: BehaviorParams,
    #[serde(default = "BehaviorParams::highway")]
    pub highway_params: BehaviorParams,
    #[serde(default)]
    pub cost_params: CostParamsSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub graph: GraphConfig,
}

/// A scenario file resolved into simulation inputs.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub params: GraphParams,
    pub graph: GraphConfig,
    pub sim: SimConfig,
}

impl LoadedScenario {
    pub fn behavior(&self) -> &BehaviorParams {
        &self.params.urban.behavior
    }

    pub fn cost(&self) -> &CostParams {
        &self.params.urban.cost
    }

    pub fn build_graph(&self, mode: EvalMode) -> Result<DrivingGraph, AssemblyError> {
        Ok(build_automated_driving_graph(&self.graph, &self.params)?.with_mode(mode))
    }

    /// Builds a fresh graph and runs the scenario with the given seed.
    pub fn run(&self, seed: u64, mode: EvalMode) -> Result<RunTrace, AssemblyError> {
        let mut graph = self.build_graph(mode)?;
        let sim = SimConfig { seed, ..self.sim };
        Ok(run_scenario(&self.scenario, &mut graph, self.behavior(), self.cost(), &sim))
    }
}

/// 1-based line of the first occurrence of `"needle"` in `text`.
fn line_of(text: &str, needle: &str) -> Option<usize> {
    let quoted = format!("\"{needle}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

fn classify(err: &serde_json::Error) -> ErrorCode {
    use serde_json::error::Category;
    match err.classify() {
        Category::Io => ErrorCode::Io,
        Category::Syntax | Category::Eof => ErrorCode::Syntax,
        Category::Data => {
            let msg = err.to_string();
            if msg.starts_with("missing field") {
                ErrorCode::MissingField
            } else if msg.starts_with("unknown field") || msg.starts_with("unknown variant") {
                ErrorCode::UnknownKey
            } else {
                ErrorCode::Invalid
            }
        }
    }
}

fn json_error(err: serde_json::Error) -> ScenarioErrors {
    let line = (err.line() > 0).then_some(err.line());
    let code = classify(&err);
    // serde_json appends " at line L column C"; the line is reported separately.
    let msg = err.to_string();
    let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
    ScenarioErrors::one(code, msg, line)
}

/// Reads, checks and resolves a scenario file.
pub fn parse_scenario(path: &Path) -> Result<LoadedScenario, ScenarioErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioErrors::one(ErrorCode::Io, format!("{}: {e}", path.display()), None))?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<LoadedScenario, ScenarioErrors> {
    let file = parse_file(text)?;
    resolve(file, text)
}

/// Schema-level parse: syntax, version, fields and keys.
pub fn parse_file(text: &str) -> Result<ScenarioFile, ScenarioErrors> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_error)?;
    match value.get("format_version") {
        None => {
            return Err(ScenarioErrors::one(ErrorCode::MissingField, "missing field `format_version`", None));
        }
        Some(v) if v.as_u64() != Some(FORMAT_VERSION as u64) => {
            return Err(ScenarioErrors::one(
                ErrorCode::Version,
                format!("unsupported format_version {v}, expected {FORMAT_VERSION}"),
                line_of(text, "format_version"),
            ));
        }
        Some(_) => {}
    }
    serde_json::from_str(text).map_err(json_error)
}

/// Serializes a scenario file; parsing the output yields an equal value.
pub fn emit(file: &ScenarioFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scenario files always serialize");
    s.push('\n');
    s
}

fn pose(p: [f64; 3]) -> Pose {
    Pose::new(p[0], p[1], p[2])
}

fn resolve(file: ScenarioFile, text: &str) -> Result<LoadedScenario, ScenarioErrors> {
    let mut errors = Vec::new();
    let mut push = |code, message: String, needle: Option<&str>| {
        errors.push(ScenarioError { code, message, line: needle.and_then(|n| line_of(text, n)) });
    };

    let lane_ids: HashSet<&str> = file.map.lanes.iter().map(|l| l.id.as_str()).collect();
    let spot_ids: HashSet<&str> = file.map.parking_spots.iter().map(|s| s.id.as_str()).collect();
    let mut seen = HashSet::new();
    for l in &file.map.lanes {
        if !seen.insert(l.id.as_str()) {
            push(ErrorCode::Invalid, format!("duplicate lane id `{}`", l.id), Some(&l.id));
        }
        let refs = l.successors.iter().chain(l.left.iter().map(|n| &n.lane)).chain(l.right.iter().map(|n| &n.lane));
        for r in refs {
            if !lane_ids.contains(r.as_str()) {
                push(ErrorCode::DanglingRef, format!("lane `{}` references unknown lane `{r}`", l.id), Some(r));
            }
        }
        if !(l.speed_limit_kmh > 0.0) {
            push(ErrorCode::Invalid, format!("lane `{}` needs a positive speed limit", l.id), Some(&l.id));
        }
    }
    for s in &file.map.parking_spots {
        if let Some(e) = s.entry_lane.as_deref().filter(|e| !lane_ids.contains(e)) {
            push(ErrorCode::DanglingRef, format!("parking spot `{}` references unknown lane `{e}`", s.id), Some(e));
        }
    }
    for r in &file.route.lanes {
        if !lane_ids.contains(r.as_str()) {
            push(ErrorCode::DanglingRef, format!("route references unknown lane `{r}`"), Some(r));
        }
    }
    if let Some(p) = file.route.parking_spot.as_deref().filter(|p| !spot_ids.contains(p)) {
        push(ErrorCode::DanglingRef, format!("route references unknown parking spot `{p}`"), Some(p));
    }
    for a in &file.agents {
        if let MotionSpec::LaneFollowing { lane, .. } = &a.motion {
            if !lane_ids.contains(lane.as_str()) {
                push(ErrorCode::DanglingRef, format!("agent `{}` references unknown lane `{lane}`", a.id), Some(lane));
            }
        }
    }
    for name in file.behavior_params.nonpositive_fields() {
        push(ErrorCode::Invalid, format!("behavior_params.{name} must be positive"), Some(name));
    }
    for name in file.highway_params.nonpositive_fields() {
        push(ErrorCode::Invalid, format!("highway_params.{name} must be positive"), None);
    }
    let cost = CostParams::from(file.cost_params);
    if !(cost.a_cmf > 0.0 && cost.horizon > 0.0) {
        push(ErrorCode::Invalid, "cost_params.aCmf and horizon must be positive".into(), Some("cost_params"));
    }
    if let Err(e) = file.sim.validate() {
        push(ErrorCode::Invalid, format!("sim: {e}"), Some("sim"));
    }
    if !file.graph.safe_stop {
        push(ErrorCode::Invalid, "graph.safe_stop cannot be disabled".into(), Some("safe_stop"));
    }
    if !errors.is_empty() {
        return Err(ScenarioErrors(errors));
    }

    let lanes: Vec<LaneDef> = file
        .map
        .lanes
        .iter()
        .map(|l| LaneDef {
            id: l.id.clone(),
            centerline: l.centerline.iter().map(|p| Point::new(p[0], p[1])).collect(),
            width: l.width,
            speed_limit: kmh(l.speed_limit_kmh),
            successors: l.successors.clone(),
            left: l.left.as_ref().map(|n| (n.lane.clone(), n.reachable)),
            right: l.right.as_ref().map(|n| (n.lane.clone(), n.reachable)),
            kind: l.kind,
            intersection_arm: l.intersection_arm,
        })
        .collect();
    let spots = file
        .map
        .parking_spots
        .iter()
        .map(|s| SpotDef { id: s.id.clone(), pose: pose(s.pose), entry_lane: s.entry_lane.clone() })
        .collect();
    let obstacles = file
        .map
        .obstacles
        .iter()
        .map(|o| StaticObstacle { id: o.id.clone(), pose: pose(o.pose), shape: Shape::new(o.length, o.width) })
        .collect();
    let map = LaneGraphMap::from_defs(lanes, spots, obstacles)
        .map_err(|e| ScenarioErrors::one(ErrorCode::Map, e.to_string(), None))?;
    let violations = validate_map(&map);
    if !violations.is_empty() {
        return Err(ScenarioErrors(
            violations
                .iter()
                .map(|v| ScenarioError { code: ErrorCode::Map, message: v.to_string(), line: None })
                .collect(),
        ));
    }
    let route = Route {
        lanes: file.route.lanes.iter().map(|l| map.lane_id(l).expect("checked above")).collect(),
        goal: pose(file.route.goal),
        parking_spot: file.route.parking_spot.as_deref().and_then(|p| map.spot_id(p)),
    };
    let route = RouteInfo::new(&map, route)
        .map_err(|e| ScenarioErrors::one(ErrorCode::Invalid, format!("route: {e}"), Some("route").and_then(|n| line_of(text, n))))?;

    let agents = file
        .agents
        .iter()
        .map(|a| {
            let shape = Shape::new(a.length, a.width);
            match &a.motion {
                MotionSpec::ConstantVelocity { pose: p, speed } => Agent::constant_velocity(a.id.clone(), pose(*p), *speed, shape),
                MotionSpec::LaneFollowing { lane, s, speed_profile } => Agent::lane_following(
                    a.id.clone(),
                    &map,
                    map.lane_id(lane).expect("checked above"),
                    *s,
                    speed_profile.iter().map(|p| (p[0], p[1])).collect(),
                    shape,
                ),
                MotionSpec::Scripted { waypoints } => {
                    Agent::scripted(a.id.clone(), waypoints.iter().map(|w| (w[0], Point::new(w[1], w[2]))).collect(), shape)
                }
            }
        })
        .collect();

    let ego = EgoState::new(pose(file.ego.pose), file.ego.speed, Shape::new(file.ego.length, file.ego.width));
    let params = GraphParams::new(DrivingParams { behavior: file.behavior_params.clone(), cost }, file.highway_params.clone());
    let scenario = Scenario { name: file.name.clone(), map: Arc::new(map), route: Arc::new(route), ego, agents };
    Ok(LoadedScenario { graph: file.graph.clone(), sim: file.sim, params, scenario, file })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "format_version": 1,
  "name": "minimal",
  "map": {
    "lanes": [
      { "id": "a", "centerline": [[0, 0], [100, 0]], "speed_limit_kmh": 50 }
    ]
  },
  "route": { "lanes": ["a"], "goal": [90, 0, 0] },
  "ego": { "pose": [0, 0, 0], "speed": 5 }
}"#;

    fn with(replace: &str, by: &str) -> String {
        assert!(MINIMAL.contains(replace));
        MINIMAL.replacen(replace, by, 1)
    }

    #[test]
    fn minimal_file_resolves() {
        let s = parse_scenario_str(MINIMAL).unwrap();
        assert_eq!(s.scenario.map.lanes.len(), 1);
        assert!((s.scenario.map.lanes[0].speed_limit - 50.0 / 3.6).abs() < 1e-12);
        assert_eq!(s.sim, SimConfig::default());
        assert_eq!(s.graph, GraphConfig::default());
    }

    #[test]
    fn typo_in_parameter_is_unknown_key() {
        let text = with(r#""speed": 5 }"#, r#""speed": 5 },
  "behavior_params": { "ttcMinAhed": 3 }"#);
        let err = parse_scenario_str(&text).unwrap_err();
        assert_eq!(err.codes(), [ErrorCode::UnknownKey]);
        assert!(err.0[0].message.contains("ttcMinAhed"));
        assert_eq!(err.0[0].line, Some(11));
    }

    #[test]
    fn dangling_route_lane() {
        let err = parse_scenario_str(&with(r#""lanes": ["a"]"#, r#""lanes": ["a", "zz"]"#)).unwrap_err();
        assert_eq!(err.codes(), [ErrorCode::DanglingRef]);
        assert!(err.0[0].message.contains("zz"));
        assert_eq!(err.0[0].line, Some(9));
    }

    #[test]
    fn missing_field() {
        let err = parse_scenario_str(&with(r#""speed": 5"#, r#""spd": 5"#)).unwrap_err();
        assert_eq!(err.codes(), [ErrorCode::UnknownKey]);
        let err = parse_scenario_str(&with(r#"  "name": "minimal",
"#, "")).unwrap_err();
        assert_eq!(err.codes(), [ErrorCode::MissingField]);
    }

    #[test]
    fn version_mismatch() {
        let err = parse_scenario_str(&with(r#""format_version": 1"#, r#""format_version": 7"#)).unwrap_err();
        assert_eq!(err.codes(), [ErrorCode::Version]);
        assert_eq!(err.0[0].line, Some(2));
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_scenario_str(&with(r#""name": "minimal","#, r#""name": "minimal""#)).unwrap_err();
        assert_eq!(err.codes(), [ErrorCode::Syntax]);
        assert_eq!(err.0[0].line, Some(4));
    }

    #[test]
    fn emit_round_trip() {
        let a = parse_file(MINIMAL).unwrap();
        let b = parse_file(&emit(&a)).unwrap();
        assert_eq!(a, b);
        assert_eq!(emit(&a), emit(&b));
    }

    #[test]
    fn safe_stop_cannot_be_disabled() {
        let text = with(r#""speed": 5 }"#, r#""speed": 5 },
  "graph": { "safe_stop": false }"#);
        assert_eq!(parse_scenario_str(&text).unwrap_err().codes(), [ErrorCode::Invalid]);
    }
}
