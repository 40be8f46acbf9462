//! Arc-line paths: turn circle, straight, turn circle, driven forwards or in
//! reverse.

use std::f64::consts::{PI, TAU};

use crate::geometry::{OrientedRect, Point, Pose, Shape};
use crate::maneuver::{TrajectoryCommand, TrajectoryPoint};
use crate::world::StaticObstacle;

/// Sampling step along planned paths.
pub const PATH_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Word {
    Lsl,
    Rsr,
    Lsr,
    Rsl,
}

impl Word {
    pub const ALL: [Word; 4] = [Word::Lsl, Word::Rsr, Word::Lsr, Word::Rsl];
}

/// One arc-line-arc path; segment lengths are arclengths in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcLinePath {
    pub start: Pose,
    pub word: Word,
    pub radius: f64,
    pub segments: [f64; 3],
    pub reverse: bool,
}

fn mod2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if TAU - r < 1e-9 {
        0.0
    } else {
        r
    }
}

fn left_center(p: &Pose, r: f64) -> Point {
    Point::new(p.x - r * p.heading.sin(), p.y + r * p.heading.cos())
}

fn right_center(p: &Pose, r: f64) -> Point {
    Point::new(p.x + r * p.heading.sin(), p.y - r * p.heading.cos())
}

/// Forward arc-line-arc path of the given word, if it exists.
fn solve(start: &Pose, goal: &Pose, r: f64, word: Word) -> Option<[f64; 3]> {
    let (t0, t1) = (start.heading, goal.heading);
    let (c1, c2) = match word {
        Word::Lsl => (left_center(start, r), left_center(goal, r)),
        Word::Rsr => (right_center(start, r), right_center(goal, r)),
        Word::Lsr => (left_center(start, r), right_center(goal, r)),
        Word::Rsl => (right_center(start, r), left_center(goal, r)),
    };
    let dv = c2.sub(c1);
    let d = dv.norm();
    let alpha = dv.y.atan2(dv.x);
    let (psi, l) = match word {
        Word::Lsl | Word::Rsr => (alpha, d),
        Word::Lsr | Word::Rsl => {
            if d < 2.0 * r {
                return None;
            }
            let l = (d * d - 4.0 * r * r).sqrt();
            let phi = (2.0 * r).atan2(l);
            (if word == Word::Lsr { alpha + phi } else { alpha - phi }, l)
        }
    };
    if d < 1e-9 && matches!(word, Word::Lsl | Word::Rsr) {
        // Same circle: pure turn.
        let a = match word {
            Word::Lsl => mod2pi(t1 - t0),
            _ => mod2pi(t0 - t1),
        };
        return Some([a, 0.0, 0.0]);
    }
    let (a1, a2) = match word {
        Word::Lsl => (mod2pi(psi - t0), mod2pi(t1 - psi)),
        Word::Rsr => (mod2pi(t0 - psi), mod2pi(psi - t1)),
        Word::Lsr => (mod2pi(psi - t0), mod2pi(psi - t1)),
        Word::Rsl => (mod2pi(t0 - psi), mod2pi(t1 - psi)),
    };
    Some([a1 * r, l, a2 * r])
}

fn curvatures(word: Word, r: f64) -> [f64; 3] {
    let k = 1.0 / r;
    match word {
        Word::Lsl => [k, 0.0, k],
        Word::Rsr => [-k, 0.0, -k],
        Word::Lsr => [k, 0.0, -k],
        Word::Rsl => [-k, 0.0, k],
    }
}

fn advance(p: &Pose, k: f64, s: f64) -> Pose {
    if k.abs() < 1e-12 {
        return Pose::new(p.x + s * p.heading.cos(), p.y + s * p.heading.sin(), p.heading);
    }
    let h = p.heading + k * s;
    Pose::new(
        p.x + (h.sin() - p.heading.sin()) / k,
        p.y - (h.cos() - p.heading.cos()) / k,
        h,
    )
}

fn flip(p: &Pose) -> Pose {
    Pose::new(p.x, p.y, p.heading + PI)
}

impl ArcLinePath {
    pub fn length(&self) -> f64 {
        self.segments.iter().sum()
    }

    /// Vehicle poses along the path every `step` metres, including both ends.
    pub fn sample(&self, step: f64) -> Vec<Pose> {
        let ks = curvatures(self.word, self.radius);
        let start = if self.reverse { flip(&self.start) } else { self.start };
        let mut out = vec![start];
        let mut seg_start = start;
        for (len, k) in self.segments.iter().zip(ks) {
            let n = (len / step).ceil() as usize;
            for i in 1..=n {
                out.push(advance(&seg_start, k, (i as f64 * step).min(*len)));
            }
            seg_start = advance(&seg_start, k, *len);
        }
        if self.reverse {
            out.iter().map(flip).collect()
        } else {
            out
        }
    }
}

/// All arc-line-arc paths from `start` to `goal`, forwards and in reverse,
/// shortest first.
pub fn candidates(start: &Pose, goal: &Pose, radius: f64) -> Vec<ArcLinePath> {
    let mut out = Vec::new();
    for reverse in [false, true] {
        let (s, g) = if reverse { (flip(start), flip(goal)) } else { (*start, *goal) };
        for word in Word::ALL {
            if let Some(segments) = solve(&s, &g, radius, word) {
                out.push(ArcLinePath { start: *start, word, radius, segments, reverse });
            }
        }
    }
    out.sort_by(|a, b| a.length().total_cmp(&b.length()));
    out
}

/// True if the vehicle footprint at any pose overlaps an obstacle.
pub fn collides(poses: &[Pose], shape: Shape, obstacles: &[StaticObstacle]) -> bool {
    poses.iter().any(|p| {
        let rect = OrientedRect::new(*p, shape);
        obstacles.iter().any(|o| rect.overlaps(&o.footprint()))
    })
}

/// Shortest collision-free arc-line path.
pub fn plan(start: &Pose, goal: &Pose, radius: f64, shape: Shape, obstacles: &[StaticObstacle]) -> Option<ArcLinePath> {
    candidates(start, goal, radius)
        .into_iter()
        .find(|c| !collides(&c.sample(PATH_STEP), shape, obstacles))
}

/// Time-parameterizes a path: accelerate from `v0` to `cruise`, brake to a
/// stop at the end, then hold for `hold` seconds.
pub fn to_trajectory(path: &ArcLinePath, t0: f64, v0: f64, cruise: f64, accel: f64, hold: f64) -> TrajectoryCommand {
    let poses = path.sample(PATH_STEP);
    let total = path.length();
    let sign = if path.reverse { -1.0 } else { 1.0 };
    let speed_at = |s: f64| {
        let up = (v0 * v0 + 2.0 * accel * s).sqrt();
        let down = (2.0 * accel * (total - s).max(0.0)).sqrt();
        up.min(down).min(cruise.max(v0))
    };
    let mut points = Vec::with_capacity(poses.len() + 1);
    let mut t = t0;
    let mut s = 0.0;
    points.push(TrajectoryPoint { t, pose: poses[0], speed: sign * speed_at(0.0) });
    for w in poses.windows(2) {
        let ds = w[0].distance(&w[1]);
        if ds < 1e-9 {
            continue;
        }
        let v_a = speed_at(s);
        s += ds;
        let v_b = speed_at(s);
        // Creep speed keeps the final approach finite.
        let dt = 2.0 * ds / (v_a + v_b).max(0.1);
        t += dt;
        points.push(TrajectoryPoint { t, pose: w[1], speed: sign * v_b });
    }
    let last = *points.last().expect("at least one point");
    points.push(TrajectoryPoint { t: last.t + hold.max(0.1), pose: last.pose, speed: 0.0 });
    TrajectoryCommand::new(points).expect("increasing timestamps")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn end_matches(path: &ArcLinePath, goal: &Pose) {
        let end = *path.sample(0.05).last().unwrap();
        assert!(end.distance(goal) < 1e-6, "{path:?} ends at {end:?}");
        let dh = crate::geometry::normalize_angle(end.heading - goal.heading);
        assert!(dh.abs() < 1e-6);
    }

    #[test]
    fn every_candidate_reaches_goal() {
        let starts = [Pose::new(0.0, 0.0, 0.0), Pose::new(3.0, -2.0, 1.0)];
        let goals = [Pose::new(15.0, -5.0, 0.0), Pose::new(-12.0, 8.0, 2.5), Pose::new(20.0, 20.0, -1.2)];
        for s in &starts {
            for g in &goals {
                let c = candidates(s, g, 5.0);
                assert!(!c.is_empty());
                for p in &c {
                    end_matches(p, g);
                }
            }
        }
    }

    #[test]
    fn straight_line_is_shortest() {
        let best = &candidates(&Pose::new(0.0, 0.0, 0.0), &Pose::new(10.0, 0.0, 0.0), 5.0)[0];
        assert!((best.length() - 10.0).abs() < 1e-9);
        assert!(!best.reverse);
    }

    #[test]
    fn reverse_path_drives_backwards() {
        let best = &candidates(&Pose::new(10.0, 0.0, 0.0), &Pose::new(0.0, 0.0, 0.0), 5.0)[0];
        assert!(best.reverse);
        assert!((best.length() - 10.0).abs() < 1e-9);
        let traj = to_trajectory(best, 0.0, 0.0, 1.0, 0.5, 1.0);
        assert!(traj.points().iter().all(|p| p.speed <= 0.0));
    }

    #[test]
    fn obstacle_forces_other_path() {
        let start = Pose::new(0.0, 0.0, 0.0);
        let goal = Pose::new(20.0, 0.0, 0.0);
        let block = StaticObstacle { id: "o".into(), pose: Pose::new(10.0, 0.0, 0.0), shape: Shape::new(2.0, 2.0) };
        let shape = Shape::new(4.5, 1.8);
        let p = plan(&start, &goal, 5.0, shape, std::slice::from_ref(&block)).expect("detour");
        assert!(p.length() > 20.0);
        assert!(!collides(&p.sample(PATH_STEP), shape, &[block]));
    }
}
