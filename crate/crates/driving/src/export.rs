//! Trace export: tick table, per-tick snapshots and SVG figures.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::Point;
use crate::maneuver::{build_change_corridor, build_follow_corridor, Corridor};
use crate::sim::{RunTrace, Scenario};
use crate::world::{match_ego_lane, LaneGraphMap, Side};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlotError {
    #[error("trace has no ticks")]
    EmptyTrace,
    #[error("nothing to draw")]
    NothingToDraw,
}

/// Ids of all nodes that carry a cost in at least one tick, in tree order.
pub fn cost_columns(trace: &RunTrace) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for tick in &trace.ticks {
        for node in tick.selection.nodes() {
            if node.cost.is_some() && !cols.contains(&node.id) {
                cols.push(node.id.clone());
            }
        }
    }
    cols
}

/// Tick table: one row per tick, costs in m/s, empty when not evaluated.
pub fn trace_csv(trace: &RunTrace) -> String {
    let cols = cost_columns(trace);
    let mut out = String::from("time_s,active_leaf,x,y,heading,speed");
    for c in &cols {
        let _ = write!(out, ",cost_{c}");
    }
    out.push('\n');
    for tick in &trace.ticks {
        let e = &tick.ego;
        let _ = write!(
            out,
            "{:.3},{},{:.4},{:.4},{:.5},{:.4}",
            tick.time,
            tick.active_leaf().unwrap_or(""),
            e.x,
            e.y,
            e.heading,
            e.speed
        );
        for c in &cols {
            out.push(',');
            if let Some(v) = tick.selection.node(c).and_then(|n| n.cost) {
                let _ = write!(out, "{v:.4}");
            }
        }
        out.push('\n');
    }
    out
}

/// One JSON document per tick.
pub fn trace_ndjson(trace: &RunTrace) -> String {
    let mut out = String::new();
    for tick in &trace.ticks {
        out.push_str(&serde_json::to_string(tick).expect("tick records serialize"));
        out.push('\n');
    }
    out
}

/// Events as one JSON document per line.
pub fn events_ndjson(trace: &RunTrace) -> String {
    let mut out = String::new();
    for e in &trace.events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Maximal runs of the same active leaf as `(leaf, start, end)`.
pub fn timeline_intervals(trace: &RunTrace) -> Vec<(String, f64, f64)> {
    let mut out: Vec<(String, f64, f64)> = Vec::new();
    for tick in &trace.ticks {
        let Some(leaf) = tick.active_leaf() else { continue };
        let end = tick.time + trace.dt;
        match out.last_mut() {
            Some((l, _, e)) if l == leaf => *e = end,
            _ => out.push((leaf.to_string(), tick.time, end)),
        }
    }
    out
}

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Behavior timeline: one row per leaf, bars where it was active.
pub fn timeline_svg(trace: &RunTrace) -> Result<String, PlotError> {
    let (Some(first), Some(last)) = (trace.ticks.first(), trace.ticks.last()) else {
        return Err(PlotError::EmptyTrace);
    };
    let intervals = timeline_intervals(trace);
    let mut rows: Vec<&str> = Vec::new();
    for (leaf, _, _) in &intervals {
        if !rows.contains(&leaf.as_str()) {
            rows.push(leaf);
        }
    }
    let (label_w, plot_w, row_h, top) = (180.0, 720.0, 22.0, 20.0);
    let t0 = first.time;
    let span = (last.time + trace.dt - t0).max(trace.dt);
    let height = top + row_h * rows.len() as f64 + 40.0;
    let x = |t: f64| label_w + (t - t0) / span * plot_w;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#,
        label_w + plot_w + 20.0
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(&trace.scenario));
    for (i, leaf) in rows.iter().enumerate() {
        let y = top + row_h * i as f64;
        let _ = writeln!(s, r#"<text x="4" y="{:.1}">{}</text>"#, y + row_h * 0.7, escape(leaf));
        let _ = writeln!(
            s,
            r##"<line x1="{label_w:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
            y + row_h,
            label_w + plot_w,
            y + row_h
        );
    }
    for (leaf, a, b) in &intervals {
        let i = rows.iter().position(|r| r == leaf).expect("row exists");
        let y = top + row_h * i as f64 + 3.0;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{y:.1}" width="{:.2}" height="{:.1}" fill="{}"/>"#,
            x(*a),
            x(*b) - x(*a),
            row_h - 6.0,
            PALETTE[i % PALETTE.len()]
        );
    }
    let axis_y = top + row_h * rows.len() as f64 + 14.0;
    let _ = writeln!(s, r#"<text x="{label_w:.1}" y="{axis_y:.1}">{t0:.1} s</text>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{axis_y:.1}" text-anchor="end">{:.1} s</text>"#,
        label_w + plot_w,
        t0 + span
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// Corridors a scenario offers at its start state: follow and, where a
/// neighbour lane is reachable, a change to either side.
pub fn initial_corridors(scenario: &Scenario, d_max: f64, a_lat: f64) -> Vec<(String, Corridor)> {
    let map = &scenario.map;
    let route = &scenario.route;
    let Some(lane) = match_ego_lane(map, Some(route), &scenario.ego.pose) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if let Ok(c) = build_follow_corridor(map, route, lane, &scenario.ego.pose, a_lat) {
        out.push(("follow".to_string(), c));
    }
    for side in [Side::Left, Side::Right] {
        if let Ok(c) = build_change_corridor(map, route, lane, side, &scenario.ego, d_max, a_lat) {
            out.push((format!("change_{side}"), c));
        }
    }
    out
}

struct Frame {
    min: Point,
    scale: f64,
    height: f64,
}

impl Frame {
    fn map(&self, p: Point) -> (f64, f64) {
        ((p.x - self.min.x) * self.scale + 20.0, self.height - 20.0 - (p.y - self.min.y) * self.scale)
    }

    fn path(&self, pts: &[Point]) -> String {
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let (x, y) = self.map(*p);
            let _ = write!(d, "{}{x:.2},{y:.2}", if i == 0 { "M" } else { " L" });
        }
        d
    }
}

/// Top view of the lane map with corridors and the driven ego path.
pub fn corridor_svg(map: &LaneGraphMap, corridors: &[(String, Corridor)], ego_path: &[Point]) -> Result<String, PlotError> {
    let mut all: Vec<Point> = map.lanes.iter().flat_map(|l| l.centerline.points().iter().copied()).collect();
    for (_, c) in corridors {
        all.extend_from_slice(c.left_bound().points());
        all.extend_from_slice(c.right_bound().points());
    }
    all.extend_from_slice(ego_path);
    if all.is_empty() {
        return Err(PlotError::NothingToDraw);
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, g: fn(&Point) -> f64| all.iter().map(g).fold(init, f);
    let min = Point::new(fold(f64::min, f64::INFINITY, |p| p.x), fold(f64::min, f64::INFINITY, |p| p.y));
    let max = Point::new(fold(f64::max, f64::NEG_INFINITY, |p| p.x), fold(f64::max, f64::NEG_INFINITY, |p| p.y));
    let extent = (max.x - min.x).max(max.y - min.y).max(1.0);
    let scale = 760.0 / extent;
    let width = (max.x - min.x) * scale + 40.0;
    let height = (max.y - min.y) * scale + 40.0;
    let frame = Frame { min, scale, height };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    for lane in &map.lanes {
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="#bbb" stroke-width="{:.2}" stroke-linejoin="round"/>"##,
            frame.path(lane.centerline.points()),
            lane.width * scale
        );
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="#fff" stroke-dasharray="4 4"/>"##,
            frame.path(lane.centerline.points())
        );
    }
    for (i, (name, c)) in corridors.iter().enumerate() {
        let mut outline: Vec<Point> = c.left_bound().points().to_vec();
        outline.extend(c.right_bound().points().iter().rev());
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<path d="{} Z" fill="{color}" fill-opacity="0.25" stroke="{color}"><title>{} ({:.0} m)</title></path>"#,
            frame.path(&outline),
            escape(name),
            c.length()
        );
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-dasharray="2 3"/>"#,
            frame.path(c.reference_line().points())
        );
    }
    if ego_path.len() > 1 {
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="black" stroke-width="1.5"/>"#, frame.path(ego_path));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Ego positions of a trace.
pub fn ego_path(trace: &RunTrace) -> Vec<Point> {
    trace.ticks.iter().map(|t| Point::new(t.ego.x, t.ego.y)).collect()
}
