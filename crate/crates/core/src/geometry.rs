//! 2-D primitives shared by world generation, collision checks and ray casting.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector for a compass heading in degrees (0° = +y, 90° = +x).
    pub fn from_heading(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self::new(s, c)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    /// Compass bearing in degrees from `self` towards `to`, in `(-180, 180]`.
    pub fn bearing_to(self, to: Vec2) -> f64 {
        let d = to - self;
        d.x.atan2(d.y).to_degrees()
    }

    /// Rotates clockwise by `deg` about `pivot` (compass sense, matching headings).
    pub fn rotate_about(self, pivot: Vec2, deg: f64) -> Vec2 {
        let (s, c) = deg.to_radians().sin_cos();
        let d = self - pivot;
        pivot + Vec2::new(d.x * c + d.y * s, -d.x * s + d.y * c)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let ab = self.b - self.a;
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(ab) / len2).clamp(0.0, 1.0);
        self.a + ab.scale(t)
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        p.dist(self.closest_point(p))
    }

    /// Proper or touching intersection test between two segments.
    pub fn intersects(&self, o: &Segment) -> bool {
        let d1 = orient(o.a, o.b, self.a);
        let d2 = orient(o.a, o.b, self.b);
        let d3 = orient(self.a, self.b, o.a);
        let d4 = orient(self.a, self.b, o.b);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
            return true;
        }
        (d1 == 0.0 && on_segment(o, self.a))
            || (d2 == 0.0 && on_segment(o, self.b))
            || (d3 == 0.0 && on_segment(self, o.a))
            || (d4 == 0.0 && on_segment(self, o.b))
    }

    /// Minimum distance between two segments.
    pub fn distance_to_segment(&self, o: &Segment) -> f64 {
        if self.intersects(o) {
            return 0.0;
        }
        self.distance_to(o.a)
            .min(self.distance_to(o.b))
            .min(o.distance_to(self.a))
            .min(o.distance_to(self.b))
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(s: &Segment, p: Vec2) -> bool {
    p.x >= s.a.x.min(s.b.x) && p.x <= s.a.x.max(s.b.x) && p.y >= s.a.y.min(s.b.y) && p.y <= s.a.y.max(s.b.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    /// Closed-disc membership.
    pub fn contains(&self, p: Vec2) -> bool {
        self.center.dist(p) <= self.radius
    }
}

/// Closed polygon given by its vertices in order (either winding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd point containment. Points exactly on an edge may fall either way;
    /// callers that care test edge distance separately.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let vi = self.vertices[i];
            let vj = self.vertices[j];
            if (vi.y > p.y) != (vj.y > p.y) {
                let x = vj.x + (p.y - vj.y) * (vi.x - vj.x) / (vi.y - vj.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        self.edges().map(|e| e.distance_to(p)).fold(f64::INFINITY, f64::min)
    }

    /// True if no two non-adjacent edges touch and no vertex repeats.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            if self.vertices[(i + 1)..].contains(&self.vertices[i]) {
                return false;
            }
        }
        let edges: Vec<Segment> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if edges[i].intersects(&edges[j]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
            * 0.5
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let mut sign = 0.0;
        for i in 0..n {
            let c = orient(self.vertices[i], self.vertices[(i + 1) % n], self.vertices[(i + 2) % n]);
            if c != 0.0 {
                if sign != 0.0 && c.signum() != sign {
                    return false;
                }
                sign = c.signum();
            }
        }
        sign != 0.0
    }

    pub fn bounding_rect(&self) -> Rect {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        Rect { min, max }
    }
}

/// Distance along the ray `origin + t·dir` (`dir` unit length) to the segment,
/// or `None` if it misses. Hits at `t <= 0` are ignored.
pub fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b - seg.a;
    let denom = dir.cross(e);
    if denom == 0.0 {
        // Parallel; a collinear overlap is reported at the nearer endpoint ahead.
        if (seg.a - origin).cross(dir) != 0.0 {
            return None;
        }
        let ta = (seg.a - origin).dot(dir);
        let tb = (seg.b - origin).dot(dir);
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        return if hi <= 0.0 {
            None
        } else if lo > 0.0 {
            Some(lo)
        } else {
            None
        };
    }
    let w = seg.a - origin;
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    if t > 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Distance along the ray to the first crossing of the circle boundary ahead.
pub fn ray_circle(origin: Vec2, dir: Vec2, disc: &Disc) -> Option<f64> {
    let oc = origin - disc.center;
    let b = oc.dot(dir);
    let c = oc.dot(oc) - disc.radius * disc.radius;
    let disc2 = b * b - c;
    if disc2 < 0.0 {
        return None;
    }
    let sq = disc2.sqrt();
    let t0 = -b - sq;
    let t1 = -b + sq;
    if t0 > 0.0 {
        Some(t0)
    } else if t1 > 0.0 {
        Some(t1)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance() {
        let s = Segment::new(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0));
        assert_eq!(s.distance_to(Vec2::new(5.0, 3.0)), 3.0);
        assert_eq!(s.distance_to(Vec2::new(13.0, 4.0)), 5.0);
        let t = Segment::new(Vec2::new(5.0, -1.0), Vec2::new(5.0, 1.0));
        assert!(s.intersects(&t));
        assert_eq!(s.distance_to_segment(&t), 0.0);
        let u = Segment::new(Vec2::new(0.0, 2.0), Vec2::new(10.0, 2.0));
        assert_eq!(s.distance_to_segment(&u), 2.0);
    }

    #[test]
    fn ray_hits_perpendicular_wall() {
        let wall = Segment::new(Vec2::new(-5.0, 7.0), Vec2::new(5.0, 7.0));
        let t = ray_segment(Vec2::new(0.0, 0.0), Vec2::from_heading(0.0), &wall).unwrap();
        assert!((t - 7.0).abs() < 1e-12);
        assert!(ray_segment(Vec2::new(0.0, 0.0), Vec2::from_heading(180.0), &wall).is_none());
    }

    #[test]
    fn ray_circle_cases() {
        let d = Disc {
            center: Vec2::new(10.0, 0.0),
            radius: 2.0,
        };
        let t = ray_circle(Vec2::new(0.0, 0.0), Vec2::from_heading(90.0), &d).unwrap();
        assert!((t - 8.0).abs() < 1e-12);
        assert!(ray_circle(Vec2::new(0.0, 0.0), Vec2::from_heading(0.0), &d).is_none());
        // from inside, the exit point is reported
        let t = ray_circle(Vec2::new(10.0, 0.0), Vec2::from_heading(90.0), &d).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_predicates() {
        let sq = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(4.0, 4.0),
            Vec2::new(0.0, 4.0),
        ]);
        assert!(sq.contains(Vec2::new(2.0, 2.0)));
        assert!(!sq.contains(Vec2::new(5.0, 2.0)));
        assert!(sq.is_simple());
        assert!(sq.is_convex());
        assert_eq!(sq.signed_area(), 16.0);
        let bow = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 4.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(0.0, 4.0),
        ]);
        assert!(!bow.is_simple());
        assert!(!bow.is_convex());
    }

    #[test]
    fn rotation_and_bearing_follow_compass() {
        let p = Vec2::new(0.0, 1.0).rotate_about(Vec2::default(), 90.0);
        assert!((p.x - 1.0).abs() < 1e-15 && p.y.abs() < 1e-15);
        assert!((Vec2::default().bearing_to(Vec2::new(1.0, 0.0)) - 90.0).abs() < 1e-12);
        assert!((Vec2::default().bearing_to(Vec2::new(-1.0, 0.0)) + 90.0).abs() < 1e-12);
    }
}
