//! Seeded port worlds.
//!
//! A scene is a rectangular basin whose outline is indented by rectangular
//! quays, a handful of convex static obstacles, non-reactive traffic looping
//! along waypoint routes, a spawn pose and a goal disc. The water outline is
//! kept as one simple polygon (`basin`); its edges are the wall segments.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Disc, Polygon, Rect, Segment, Vec2};
use crate::kinematics::VesselState;
use crate::{Error, Result};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

/// Inclusive `[min, max]` range, written as a two-element array in config files.
pub type Span<T> = [T; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Basin width (x extent), meters.
    pub width: f64,
    /// Basin height (y extent), meters.
    pub height: f64,
    pub quay_count: Span<usize>,
    /// Quay extent along the wall, meters.
    pub quay_width: Span<f64>,
    /// How far a quay juts into the basin, meters. Capped at a quarter of the
    /// basin dimension it protrudes across.
    pub quay_depth: Span<f64>,
    pub static_count: Span<usize>,
    /// Circumradius of static obstacles, meters.
    pub static_radius: Span<f64>,
    pub static_vertices: Span<usize>,
    pub dynamic_count: Span<usize>,
    pub dynamic_radius: Span<f64>,
    /// m/s.
    pub dynamic_speed: Span<f64>,
    pub route_waypoints: Span<usize>,
    pub goal_radius: f64,
    /// Minimum spawn-to-goal distance, meters.
    pub min_separation: f64,
    /// Maximum spawn-to-goal distance; `0` means unbounded.
    pub max_separation: f64,
    /// When > 0, the goal is placed exactly this far ahead of the spawn heading.
    pub goal_ahead: f64,
    /// Free water required around spawn and goal centres, meters.
    pub clearance: f64,
    /// Free water kept between obstacles and walls so passages stay navigable.
    pub passage: f64,
    /// Rejection-sampling budget per entity.
    pub max_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            width: 400.0,
            height: 300.0,
            quay_count: [2, 5],
            quay_width: [20.0, 60.0],
            quay_depth: [15.0, 50.0],
            static_count: [3, 8],
            static_radius: [5.0, 15.0],
            static_vertices: [3, 7],
            dynamic_count: [1, 3],
            dynamic_radius: [3.0, 6.0],
            dynamic_speed: [0.5, 2.5],
            route_waypoints: [2, 4],
            goal_radius: 10.0,
            min_separation: 60.0,
            max_separation: 0.0,
            goal_ahead: 0.0,
            clearance: 12.0,
            passage: 16.0,
            max_attempts: 2000,
        }
    }
}

impl GenConfig {
    /// Obstacle-free basin with the goal a fixed distance ahead of the spawn.
    pub fn near_goal(distance: f64) -> Self {
        Self {
            quay_count: [0, 0],
            static_count: [0, 0],
            dynamic_count: [0, 0],
            goal_ahead: distance,
            min_separation: distance.min(GenConfig::default().min_separation),
            ..Self::default()
        }
    }

    /// Walls and quays only.
    pub fn obstacle_free() -> Self {
        Self {
            static_count: [0, 0],
            dynamic_count: [0, 0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn span_f(name: &str, s: Span<f64>) -> Result<()> {
            if !(s[0].is_finite() && s[1].is_finite() && s[0] >= 0.0 && s[0] <= s[1]) {
                return Err(Error::Config(format!(
                    "world.{name} must be a non-empty non-negative range, got {s:?}"
                )));
            }
            Ok(())
        }
        fn span_u(name: &str, s: Span<usize>) -> Result<()> {
            if s[0] > s[1] {
                return Err(Error::Config(format!(
                    "world.{name} must be a non-empty range, got {s:?}"
                )));
            }
            Ok(())
        }
        let positive = [
            ("width", self.width),
            ("height", self.height),
            ("goal_radius", self.goal_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("world.{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("min_separation", self.min_separation),
            ("max_separation", self.max_separation),
            ("goal_ahead", self.goal_ahead),
            ("clearance", self.clearance),
            ("passage", self.passage),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("world.{name} must be >= 0, got {v}")));
            }
        }
        span_u("quay_count", self.quay_count)?;
        span_f("quay_width", self.quay_width)?;
        span_f("quay_depth", self.quay_depth)?;
        span_u("static_count", self.static_count)?;
        span_f("static_radius", self.static_radius)?;
        span_u("static_vertices", self.static_vertices)?;
        span_u("dynamic_count", self.dynamic_count)?;
        span_f("dynamic_radius", self.dynamic_radius)?;
        span_f("dynamic_speed", self.dynamic_speed)?;
        span_u("route_waypoints", self.route_waypoints)?;
        if self.static_vertices[0] < 3 {
            return Err(Error::Config("world.static_vertices must start at >= 3".into()));
        }
        if self.route_waypoints[0] < 2 {
            return Err(Error::Config("world.route_waypoints must start at >= 2".into()));
        }
        if self.quay_width[0] <= 0.0 || self.static_radius[0] <= 0.0 || self.dynamic_radius[0] <= 0.0 {
            return Err(Error::Config(
                "world sizes (quay_width, static_radius, dynamic_radius) must be > 0".into(),
            ));
        }
        if self.max_separation > 0.0 && self.max_separation < self.min_separation {
            return Err(Error::Config(
                "world.max_separation must be 0 or >= min_separation".into(),
            ));
        }
        if self.goal_ahead > 0.0 && self.goal_ahead < self.min_separation {
            return Err(Error::Config("world.goal_ahead must be >= min_separation".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("world.max_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicObstacle {
    pub footprint_radius: f64,
    /// Waypoints; the route is closed, running from the last waypoint back to the first.
    pub route: Vec<Vec2>,
    pub speed: f64,
    /// Fraction of the closed route length travelled, in `[0, 1)`.
    pub route_progress: f64,
}

impl DynamicObstacle {
    pub fn legs(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.route.len();
        (0..n).map(move |i| Segment::new(self.route[i], self.route[(i + 1) % n]))
    }

    pub fn route_length(&self) -> f64 {
        self.legs().map(|s| s.length()).sum()
    }

    pub fn position(&self) -> Vec2 {
        let total = self.route_length();
        if total == 0.0 {
            return self.route[0];
        }
        let mut remaining = self.route_progress * total;
        for leg in self.legs() {
            let len = leg.length();
            if remaining <= len {
                if len == 0.0 {
                    return leg.a;
                }
                return leg.a + (leg.b - leg.a).scale(remaining / len);
            }
            remaining -= len;
        }
        self.route[0]
    }

    pub fn disc(&self) -> Disc {
        Disc {
            center: self.position(),
            radius: self.footprint_radius,
        }
    }

    /// Moves `speed·dt` meters along the closed route, wrapping at the end.
    pub fn advance(&mut self, dt: f64) {
        let total = self.route_length();
        if total == 0.0 || self.speed == 0.0 {
            return;
        }
        let travelled = self.route_progress * total + self.speed * dt;
        let p = (travelled / total).rem_euclid(1.0);
        self.route_progress = if p >= 1.0 { 0.0 } else { p };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldScene {
    pub schema_version: u32,
    pub seed: u64,
    pub bounds: Rect,
    /// Navigable water outline; its edges are `wall_segments`.
    pub basin: Polygon,
    pub wall_segments: Vec<Segment>,
    pub static_obstacles: Vec<Polygon>,
    pub dynamic_obstacles: Vec<DynamicObstacle>,
    pub goal: Disc,
    pub spawn_pose: VesselState,
}

impl WorldScene {
    /// Rectangular basin with nothing in it; spawn and goal are set by the caller.
    pub fn empty(width: f64, height: f64) -> Self {
        let basin = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(width, 0.0),
            Vec2::new(width, height),
            Vec2::new(0.0, height),
        ]);
        let wall_segments = basin.edges().collect();
        Self {
            schema_version: SCENE_SCHEMA_VERSION,
            seed: 0,
            bounds: Rect {
                min: Vec2::new(0.0, 0.0),
                max: Vec2::new(width, height),
            },
            basin,
            wall_segments,
            static_obstacles: Vec::new(),
            dynamic_obstacles: Vec::new(),
            goal: Disc {
                center: Vec2::new(width * 0.5, height * 0.75),
                radius: 10.0,
            },
            spawn_pose: VesselState::at_rest(width * 0.5, height * 0.25, 0.0),
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.bounds.diagonal()
    }

    pub fn advance_dynamics(&mut self, dt: f64) {
        for o in &mut self.dynamic_obstacles {
            o.advance(dt);
        }
    }

    /// True iff the ego disc touches a wall, a static obstacle or traffic, or
    /// its centre has left the water.
    pub fn check_collision(&self, pose: &VesselState, footprint_radius: f64) -> bool {
        let p = Vec2::new(pose.x, pose.y);
        if !self.bounds.contains(p) || !self.basin.contains(p) {
            return true;
        }
        if self.wall_segments.iter().any(|s| s.distance_to(p) <= footprint_radius) {
            return true;
        }
        if self
            .static_obstacles
            .iter()
            .any(|poly| poly.contains(p) || poly.distance_to_boundary(p) <= footprint_radius)
        {
            return true;
        }
        self.dynamic_obstacles
            .iter()
            .any(|o| o.position().dist(p) <= footprint_radius + o.footprint_radius)
    }

    /// Closed-disc goal test on the ego centre.
    pub fn check_goal(&self, pose: &VesselState) -> bool {
        self.goal.contains(Vec2::new(pose.x, pose.y))
    }

    /// Distance from `p` to the nearest wall or static obstacle (0 if inside one
    /// or outside the water).
    pub fn static_clearance(&self, p: Vec2) -> f64 {
        if !self.basin.contains(p) {
            return 0.0;
        }
        let mut d = self.basin.distance_to_boundary(p);
        for poly in &self.static_obstacles {
            if poly.contains(p) {
                return 0.0;
            }
            d = d.min(poly.distance_to_boundary(p));
        }
        d
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: WorldScene = serde_json::from_str(s)?;
        if scene.schema_version != SCENE_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "unsupported scene schema version {} (expected {SCENE_SCHEMA_VERSION})",
                scene.schema_version
            )));
        }
        Ok(scene)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    cfg: &'a GenConfig,
}

impl Sampler<'_> {
    fn count(&mut self, s: Span<usize>) -> usize {
        self.rng.random_range(s[0]..=s[1])
    }

    fn uniform(&mut self, s: Span<f64>) -> f64 {
        if s[0] == s[1] {
            s[0]
        } else {
            self.rng.random_range(s[0]..s[1])
        }
    }

    fn point_in(&mut self, r: &Rect) -> Vec2 {
        Vec2::new(self.uniform([r.min.x, r.max.x]), self.uniform([r.min.y, r.max.y]))
    }

    fn attempts<T>(&mut self, entity: impl FnOnce() -> String, mut f: impl FnMut(&mut Self) -> Option<T>) -> Result<T> {
        for _ in 0..self.cfg.max_attempts {
            if let Some(v) = f(self) {
                return Ok(v);
            }
        }
        Err(Error::Generation {
            entity: entity(),
            attempts: self.cfg.max_attempts,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Quay {
    edge: usize,
    start: f64,
    width: f64,
    depth: f64,
}

impl Quay {
    /// Footprint as an axis-aligned rectangle, for overlap tests.
    fn rect(&self, w: f64, h: f64) -> Rect {
        let (a, b, d) = (self.start, self.start + self.width, self.depth);
        match self.edge {
            0 => Rect {
                min: Vec2::new(a, 0.0),
                max: Vec2::new(b, d),
            },
            1 => Rect {
                min: Vec2::new(w - d, a),
                max: Vec2::new(w, b),
            },
            2 => Rect {
                min: Vec2::new(w - b, h - d),
                max: Vec2::new(w - a, h),
            },
            _ => Rect {
                min: Vec2::new(0.0, h - b),
                max: Vec2::new(d, h - a),
            },
        }
    }
}

fn rects_near(a: &Rect, b: &Rect, gap: f64) -> bool {
    a.min.x - gap < b.max.x && b.min.x - gap < a.max.x && a.min.y - gap < b.max.y && b.min.y - gap < a.max.y
}

/// Counter-clockwise basin outline with quays cut in.
fn basin_outline(w: f64, h: f64, quays: &[Quay]) -> Polygon {
    // (start corner, travel direction, inward normal) per edge, CCW.
    let edges = [
        (Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)),
        (Vec2::new(w, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0)),
        (Vec2::new(w, h), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0)),
        (Vec2::new(0.0, h), Vec2::new(0.0, -1.0), Vec2::new(1.0, 0.0)),
    ];
    let mut vertices = Vec::new();
    for (i, (corner, dir, inward)) in edges.iter().enumerate() {
        vertices.push(*corner);
        let mut on_edge: Vec<&Quay> = quays.iter().filter(|q| q.edge == i).collect();
        on_edge.sort_by(|a, b| a.start.total_cmp(&b.start));
        for q in on_edge {
            let a = *corner + dir.scale(q.start);
            let b = *corner + dir.scale(q.start + q.width);
            vertices.push(a);
            vertices.push(a + inward.scale(q.depth));
            vertices.push(b + inward.scale(q.depth));
            vertices.push(b);
        }
    }
    Polygon::new(vertices)
}

/// Convex polygon inscribed in a circle, vertices in angular order.
fn inscribed_polygon(rng: &mut ChaCha8Rng, center: Vec2, radius: f64, n: usize) -> Polygon {
    let step = 360.0 / n as f64;
    let rot = rng.random_range(0.0..360.0);
    let vertices = (0..n)
        .map(|i| {
            let jitter = rng.random_range(-0.3..0.3) * step;
            center + Vec2::from_heading(rot + i as f64 * step + jitter).scale(radius)
        })
        .collect();
    Polygon::new(vertices)
}

fn segment_polygon_distance(seg: &Segment, poly: &Polygon) -> f64 {
    if poly.contains(seg.a) || poly.contains(seg.b) {
        return 0.0;
    }
    poly.edges()
        .map(|e| e.distance_to_segment(seg))
        .fold(f64::INFINITY, f64::min)
}

/// Generates a scene. Identical `(seed, cfg)` always yields an identical scene.
pub fn generate(seed: u64, cfg: &GenConfig) -> Result<WorldScene> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(seed),
        cfg,
    };
    let corner_margin = cfg.passage.max(10.0);

    let n_quays = s.count(cfg.quay_count);
    let mut quays: Vec<Quay> = Vec::with_capacity(n_quays);
    for i in 0..n_quays {
        let q = s.attempts(
            || format!("quay {i}"),
            |s| {
                let edge = s.rng.random_range(0..4);
                let (len, across) = if edge % 2 == 0 { (w, h) } else { (h, w) };
                let width = s.uniform(cfg.quay_width);
                let depth = s.uniform(cfg.quay_depth).min(0.25 * across);
                let room = len - 2.0 * corner_margin - width;
                if room <= 0.0 || depth <= 0.0 {
                    return None;
                }
                let start = corner_margin + s.uniform([0.0, room]);
                let q = Quay {
                    edge,
                    start,
                    width,
                    depth,
                };
                let r = q.rect(w, h);
                let clash = quays.iter().any(|o| rects_near(&r, &o.rect(w, h), cfg.passage));
                (!clash).then_some(q)
            },
        )?;
        quays.push(q);
    }

    let basin = basin_outline(w, h, &quays);
    let mut scene = WorldScene {
        schema_version: SCENE_SCHEMA_VERSION,
        seed,
        bounds: Rect {
            min: Vec2::new(0.0, 0.0),
            max: Vec2::new(w, h),
        },
        wall_segments: basin.edges().collect(),
        basin,
        static_obstacles: Vec::new(),
        dynamic_obstacles: Vec::new(),
        goal: Disc {
            center: Vec2::default(),
            radius: cfg.goal_radius,
        },
        spawn_pose: VesselState::default(),
    };

    let n_static = s.count(cfg.static_count);
    let mut static_discs: Vec<Disc> = Vec::with_capacity(n_static);
    for i in 0..n_static {
        let (disc, poly) = s.attempts(
            || format!("static obstacle {i}"),
            |s| {
                let radius = s.uniform(cfg.static_radius);
                let center = s.point_in(&scene.bounds);
                if !scene.basin.contains(center) || scene.basin.distance_to_boundary(center) < radius + cfg.passage {
                    return None;
                }
                if static_discs
                    .iter()
                    .any(|d| d.center.dist(center) < d.radius + radius + cfg.passage)
                {
                    return None;
                }
                let n = s.count(cfg.static_vertices);
                let poly = inscribed_polygon(&mut s.rng, center, radius, n);
                Some((Disc { center, radius }, poly))
            },
        )?;
        static_discs.push(disc);
        scene.static_obstacles.push(poly);
    }

    let (spawn, goal) = s.attempts(
        || "spawn/goal pair".to_string(),
        |s| {
            let spawn = s.point_in(&scene.bounds);
            if scene.static_clearance(spawn) < cfg.clearance {
                return None;
            }
            let heading = s.rng.random_range(0.0..360.0);
            let goal = if cfg.goal_ahead > 0.0 {
                spawn + Vec2::from_heading(heading).scale(cfg.goal_ahead)
            } else {
                let g = s.point_in(&scene.bounds);
                let d = g.dist(spawn);
                if d < cfg.min_separation || (cfg.max_separation > 0.0 && d > cfg.max_separation) {
                    return None;
                }
                g
            };
            if scene.static_clearance(goal) < cfg.clearance || goal.dist(spawn) < cfg.min_separation {
                return None;
            }
            Some((VesselState::at_rest(spawn.x, spawn.y, heading), goal))
        },
    )?;
    scene.spawn_pose = spawn;
    scene.goal.center = goal;
    let spawn_p = Vec2::new(spawn.x, spawn.y);

    let n_dynamic = s.count(cfg.dynamic_count);
    for i in 0..n_dynamic {
        let obstacle = s.attempts(
            || format!("dynamic obstacle {i}"),
            |s| {
                let radius = s.uniform(cfg.dynamic_radius);
                let n = s.count(cfg.route_waypoints);
                let mut route = Vec::with_capacity(n);
                for _ in 0..n {
                    let p = s.point_in(&scene.bounds);
                    if scene.static_clearance(p) < radius + cfg.clearance * 0.5 {
                        return None;
                    }
                    route.push(p);
                }
                let o = DynamicObstacle {
                    footprint_radius: radius,
                    route,
                    speed: s.uniform(cfg.dynamic_speed),
                    route_progress: s.rng.random_range(0.0..1.0),
                };
                for leg in o.legs() {
                    if leg.length() < 2.0 * radius {
                        return None;
                    }
                    if scene
                        .wall_segments
                        .iter()
                        .any(|wall| wall.distance_to_segment(&leg) < radius + 1.0)
                    {
                        return None;
                    }
                    if scene
                        .static_obstacles
                        .iter()
                        .any(|p| segment_polygon_distance(&leg, p) < radius + 1.0)
                    {
                        return None;
                    }
                    if leg.distance_to(spawn_p) < radius + cfg.clearance {
                        return None;
                    }
                }
                Some(o)
            },
        )?;
        scene.dynamic_obstacles.push(obstacle);
    }

    Ok(scene)
}
