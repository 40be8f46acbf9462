use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn unit(heading: f64) -> Point {
        Point::new(heading.cos(), heading.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        self.position().distance(other.position())
    }

    /// Moves `forward` along the heading and `left` perpendicular to it.
    pub fn offset(&self, forward: f64, left: f64) -> Pose {
        let (s, c) = self.heading.sin_cos();
        Pose::new(
            self.x + forward * c - left * s,
            self.y + forward * s + left * c,
            self.heading,
        )
    }
}

/// Wraps an angle to (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub length: f64,
    pub width: f64,
}

impl Shape {
    pub const fn new(length: f64, width: f64) -> Self {
        Self { length, width }
    }
}

/// Rectangle centered on a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub pose: Pose,
    pub shape: Shape,
}

impl OrientedRect {
    pub fn new(pose: Pose, shape: Shape) -> Self {
        Self { pose, shape }
    }

    pub fn corners(&self) -> [Point; 4] {
        let hl = self.shape.length / 2.0;
        let hw = self.shape.width / 2.0;
        [
            self.pose.offset(hl, hw).position(),
            self.pose.offset(-hl, hw).position(),
            self.pose.offset(-hl, -hw).position(),
            self.pose.offset(hl, -hw).position(),
        ]
    }

    /// Strict overlap via separating axes. Rectangles that only touch do not
    /// overlap.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        const EPS: f64 = 1e-9;
        let a = self.corners();
        let b = other.corners();
        for heading in [self.pose.heading, other.pose.heading] {
            for axis in [Point::unit(heading), Point::unit(heading + PI / 2.0)] {
                let (amin, amax) = project_onto(&a, axis);
                let (bmin, bmax) = project_onto(&b, axis);
                if amax <= bmin + EPS || bmax <= amin + EPS {
                    return false;
                }
            }
        }
        true
    }

    /// Evenly spaced sample points covering the rectangle area.
    pub fn area_samples(&self, along: usize, across: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(along * across);
        for i in 0..along {
            let f = (i as f64 + 0.5) / along as f64 - 0.5;
            for j in 0..across {
                let l = (j as f64 + 0.5) / across as f64 - 0.5;
                out.push(
                    self.pose
                        .offset(f * self.shape.length, l * self.shape.width)
                        .position(),
                );
            }
        }
        out
    }
}

fn project_onto(pts: &[Point; 4], axis: Point) -> (f64, f64) {
    pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arclength of the foot point. Falls outside `[0, length]` when the point
    /// lies beyond an end, measured along the extended end segment.
    pub s: f64,
    /// Signed perpendicular offset, positive to the left.
    pub lateral: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
    cumulative: Vec<f64>,
}

impl Polyline {
    /// Builds a polyline, dropping consecutive duplicate points.
    pub fn new(points: Vec<Point>) -> Self {
        let mut pts: Vec<Point> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().is_none_or(|q| q.distance(p) > 1e-9) {
                pts.push(p);
            }
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        for (i, p) in pts.iter().enumerate() {
            if i > 0 {
                acc += pts[i - 1].distance(*p);
            }
            cumulative.push(acc);
        }
        Self { points: pts, cumulative }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn first(&self) -> Option<Point> {
        self.points.first().copied()
    }

    pub fn last(&self) -> Option<Point> {
        self.points.last().copied()
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len();
        if n < 2 {
            return 0;
        }
        match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Point at arclength `s`; extrapolates linearly past either end.
    pub fn point_at(&self, s: f64) -> Point {
        match self.points.len() {
            0 => Point::default(),
            1 => self.points[0],
            _ => {
                let i = self.segment_at(s);
                let (a, b) = (self.points[i], self.points[i + 1]);
                let len = self.cumulative[i + 1] - self.cumulative[i];
                a.lerp(b, (s - self.cumulative[i]) / len)
            }
        }
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let i = self.segment_at(s);
        let d = self.points[i + 1].sub(self.points[i]);
        d.y.atan2(d.x)
    }

    pub fn pose_at(&self, s: f64) -> Pose {
        let p = self.point_at(s);
        Pose::new(p.x, p.y, self.heading_at(s))
    }

    /// Point at `s` shifted `lateral` to the left of the local direction.
    pub fn offset_point(&self, s: f64, lateral: f64) -> Point {
        self.pose_at(s).offset(0.0, lateral).position()
    }

    pub fn project(&self, p: Point) -> Projection {
        let n = self.points.len();
        if n == 0 {
            return Projection { s: 0.0, lateral: 0.0, distance: f64::INFINITY };
        }
        if n == 1 {
            let d = self.points[0].distance(p);
            return Projection { s: 0.0, lateral: 0.0, distance: d };
        }
        let mut best = Projection { s: 0.0, lateral: 0.0, distance: f64::INFINITY };
        for i in 0..n - 1 {
            let a = self.points[i];
            let ab = self.points[i + 1].sub(a);
            let len = ab.norm();
            let ap = p.sub(a);
            let mut t = ap.dot(ab) / len;
            if i > 0 {
                t = t.max(0.0);
            }
            if i < n - 2 {
                t = t.min(len);
            }
            let foot = a.add(ab.scale(t / len));
            let distance = foot.distance(p);
            if distance < best.distance - 1e-12 {
                let side = if distance > 0.0 { ab.cross(ap).signum() } else { 0.0 };
                best = Projection {
                    s: self.cumulative[i] + t,
                    lateral: side * distance,
                    distance,
                };
            }
        }
        best
    }

    /// Resamples at a fixed arclength step, always keeping the end point.
    pub fn resample(&self, step: f64) -> Polyline {
        self.slice(0.0, self.length(), step)
    }

    /// Sub-polyline between two arclengths, sampled at `step`.
    pub fn slice(&self, from: f64, to: f64, step: f64) -> Polyline {
        let from = from.clamp(0.0, self.length());
        let to = to.clamp(from, self.length());
        let mut pts = Vec::new();
        let mut s = from;
        while s < to - 1e-9 {
            pts.push(self.point_at(s));
            s += step;
        }
        pts.push(self.point_at(to));
        Polyline::new(pts)
    }

    /// Unsigned curvature at arclength `s`, from the circle through the
    /// points `k` metres before and after it.
    pub fn curvature_at(&self, s: f64, k: f64) -> f64 {
        let len = self.length();
        if len < 1e-9 {
            return 0.0;
        }
        let s0 = (s - k).max(0.0);
        let s2 = (s + k).min(len);
        if s2 - s0 < 1e-6 {
            return 0.0;
        }
        let s1 = ((s0 + s2) / 2.0).clamp(s0, s2);
        circumcircle_curvature(self.point_at(s0), self.point_at(s1), self.point_at(s2))
    }
}

/// Curvature of the circle through three points, 0 when collinear.
pub fn circumcircle_curvature(a: Point, b: Point, c: Point) -> f64 {
    let ab = a.distance(b);
    let bc = b.distance(c);
    let ca = c.distance(a);
    let denom = ab * bc * ca;
    if denom < 1e-12 {
        return 0.0;
    }
    let area2 = b.sub(a).cross(c.sub(a)).abs();
    2.0 * area2 / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(len: f64) -> Polyline {
        Polyline::new(vec![Point::new(0.0, 0.0), Point::new(len, 0.0)])
    }

    #[test]
    fn projection_sign_and_extension() {
        let l = straight(10.0);
        let p = l.project(Point::new(4.0, 1.5));
        assert!((p.s - 4.0).abs() < 1e-12 && (p.lateral - 1.5).abs() < 1e-12);
        let p = l.project(Point::new(12.0, -1.0));
        assert!((p.s - 12.0).abs() < 1e-12 && (p.lateral + 1.0).abs() < 1e-12);
        let p = l.project(Point::new(-3.0, 0.5));
        assert!((p.s + 3.0).abs() < 1e-12);
    }

    #[test]
    fn point_and_heading_on_corner() {
        let l = Polyline::new(vec![
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(10.0, 10.0),
        ]);
        assert_eq!(l.length(), 20.0);
        let p = l.point_at(15.0);
        assert!((p.x - 10.0).abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12);
        assert!((l.heading_at(15.0) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn resample_keeps_end() {
        let l = straight(10.5).resample(1.0);
        assert_eq!(l.points().len(), 12);
        assert!((l.length() - 10.5).abs() < 1e-12);
    }

    #[test]
    fn circle_curvature() {
        let r = 20.0;
        let arc: Vec<Point> = (0..=100)
            .map(|i| {
                let a = i as f64 * 0.01;
                Point::new(r * a.sin(), r - r * a.cos())
            })
            .collect();
        let l = Polyline::new(arc);
        assert!((l.curvature_at(10.0, 2.0) - 0.05).abs() < 1e-3);
        assert_eq!(straight(10.0).curvature_at(5.0, 2.0), 0.0);
    }

    #[test]
    fn rect_overlap_is_strict() {
        let a = OrientedRect::new(Pose::new(0.0, 0.0, 0.0), Shape::new(2.0, 2.0));
        let touching = OrientedRect::new(Pose::new(2.0, 0.0, 0.0), Shape::new(2.0, 2.0));
        let overlapping = OrientedRect::new(Pose::new(1.9, 0.0, 0.3), Shape::new(2.0, 2.0));
        let far = OrientedRect::new(Pose::new(5.0, 5.0, 1.0), Shape::new(2.0, 2.0));
        assert!(!a.overlaps(&touching));
        assert!(a.overlaps(&overlapping));
        assert!(!a.overlaps(&far));
    }

    #[test]
    fn angle_wrap() {
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI / 2.0 - TAU) + PI / 2.0).abs() < 1e-12);
    }
}
