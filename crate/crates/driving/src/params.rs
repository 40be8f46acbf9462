use serde::{Deserialize, Serialize};

/// km/h to m/s.
pub fn kmh(v: f64) -> f64 {
    v / 3.6
}

/// Behavior thresholds, SI units. Field names in files are camelCase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct BehaviorParams {
    pub d_min_ahead: f64,
    pub d_min_behind: f64,
    pub ttc_min_ahead: f64,
    pub ttc_min_behind: f64,
    pub d_max_lane_change: f64,
    pub v_max_parking: f64,
    pub r_max_parking: f64,
    pub r_min_freespace: f64,
    pub r_min_parking: f64,
    pub ttc_emergency: f64,
    pub a_emergency: f64,
    pub t_indicate: f64,
    pub a_lat_max: f64,
    pub d_intersection_lookahead: f64,
    pub t_crossing_buffer: f64,
    pub parking_turn_radius: f64,
    pub parking_speed: f64,
    pub prediction_horizon: f64,
    pub prediction_dt: f64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self {
            d_min_ahead: 10.0,
            d_min_behind: 5.0,
            ttc_min_ahead: 4.0,
            ttc_min_behind: 3.0,
            d_max_lane_change: 100.0,
            v_max_parking: 2.0,
            r_max_parking: 20.0,
            r_min_freespace: 5.0,
            r_min_parking: 0.2,
            ttc_emergency: 1.0,
            a_emergency: 8.0,
            t_indicate: 2.0,
            a_lat_max: 2.0,
            d_intersection_lookahead: 40.0,
            t_crossing_buffer: 1.5,
            parking_turn_radius: 5.0,
            parking_speed: 1.0,
            prediction_horizon: 8.0,
            prediction_dt: 0.25,
        }
    }
}

impl BehaviorParams {
    /// Defaults for highway blocks: longer gaps and TTC margins.
    pub fn highway() -> Self {
        Self {
            d_min_ahead: 25.0,
            d_min_behind: 15.0,
            ttc_min_ahead: 6.0,
            ttc_min_behind: 5.0,
            d_max_lane_change: 200.0,
            ..Self::default()
        }
    }

    /// Names of fields that are not strictly positive.
    pub fn nonpositive_fields(&self) -> Vec<&'static str> {
        let fields = [
            ("dMinAhead", self.d_min_ahead),
            ("dMinBehind", self.d_min_behind),
            ("ttcMinAhead", self.ttc_min_ahead),
            ("ttcMinBehind", self.ttc_min_behind),
            ("dMaxLaneChange", self.d_max_lane_change),
            ("vMaxParking", self.v_max_parking),
            ("rMaxParking", self.r_max_parking),
            ("rMinFreespace", self.r_min_freespace),
            ("rMinParking", self.r_min_parking),
            ("ttcEmergency", self.ttc_emergency),
            ("aEmergency", self.a_emergency),
            ("tIndicate", self.t_indicate),
            ("aLatMax", self.a_lat_max),
            ("dIntersectionLookahead", self.d_intersection_lookahead),
            ("tCrossingBuffer", self.t_crossing_buffer),
            ("parkingTurnRadius", self.parking_turn_radius),
            ("parkingSpeed", self.parking_speed),
            ("predictionHorizon", self.prediction_horizon),
            ("predictionDt", self.prediction_dt),
        ];
        fields.iter().filter(|(_, v)| !(*v > 0.0)).map(|(n, _)| *n).collect()
    }
}

/// Cost model parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub j_lc_needed: f64,
    pub j_lc_maneuver: f64,
    pub a_cmf: f64,
    pub horizon: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            j_lc_needed: kmh(10.0),
            j_lc_maneuver: kmh(5.0),
            a_cmf: 2.0,
            horizon: 20.0,
        }
    }
}

/// Cost parameters as written in scenario files, penalties in km/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct CostParamsSpec {
    pub j_lc_needed_kmh: f64,
    pub j_lc_maneuver_kmh: f64,
    pub a_cmf: f64,
    pub horizon: f64,
}

impl Default for CostParamsSpec {
    fn default() -> Self {
        Self { j_lc_needed_kmh: 10.0, j_lc_maneuver_kmh: 5.0, a_cmf: 2.0, horizon: 20.0 }
    }
}

impl From<CostParamsSpec> for CostParams {
    fn from(s: CostParamsSpec) -> Self {
        Self {
            j_lc_needed: kmh(s.j_lc_needed_kmh),
            j_lc_maneuver: kmh(s.j_lc_maneuver_kmh),
            a_cmf: s.a_cmf,
            horizon: s.horizon,
        }
    }
}

/// Everything a behavior block needs besides the snapshot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DrivingParams {
    pub behavior: BehaviorParams,
    pub cost: CostParams,
}
