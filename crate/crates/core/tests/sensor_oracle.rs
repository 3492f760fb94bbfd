//! Range scans against a brute-force nearest-intersection oracle.

use std::f64::consts::PI;

use portnav::geometry::{Disc, Polygon, Rect, Segment, Vec2};
use portnav::kinematics::VesselState;
use portnav::sensor::{scan, SensorConfig};
use portnav::world::{generate, DynamicObstacle, GenConfig, WorldScene};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ray/segment hit distance by Cramer's rule, `None` when parallel or missed.
fn hit_segment(o: (f64, f64), d: (f64, f64), a: (f64, f64), b: (f64, f64)) -> Option<f64> {
    let e = (b.0 - a.0, b.1 - a.1);
    let det = -d.0 * e.1 + d.1 * e.0;
    if det.abs() < 1e-15 {
        return None;
    }
    let r = (a.0 - o.0, a.1 - o.1);
    let t = (-r.0 * e.1 + r.1 * e.0) / det;
    let u = (d.0 * r.1 - d.1 * r.0) / det;
    (t > 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Smallest positive root of |o + t·d − c|² = ρ².
fn hit_circle(o: (f64, f64), d: (f64, f64), c: (f64, f64), rho: f64) -> Option<f64> {
    let f = (o.0 - c.0, o.1 - c.1);
    let b = f.0 * d.0 + f.1 * d.1;
    let cc = f.0 * f.0 + f.1 * f.1 - rho * rho;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    [-b - s, -b + s].into_iter().filter(|t| *t > 0.0).reduce(f64::min)
}

fn brute_force(scene: &WorldScene, pose: &VesselState, cfg: &SensorConfig) -> Vec<f64> {
    let n = cfg.n_rays;
    let step = if cfg.fov >= 360.0 {
        cfg.fov / n as f64
    } else {
        cfg.fov / (n as f64 - 1.0)
    };
    let mut prims: Vec<((f64, f64), (f64, f64))> = scene
        .wall_segments
        .iter()
        .map(|s| ((s.a.x, s.a.y), (s.b.x, s.b.y)))
        .collect();
    for poly in &scene.static_obstacles {
        let v = &poly.vertices;
        for i in 0..v.len() {
            let j = (i + 1) % v.len();
            prims.push(((v[i].x, v[i].y), (v[j].x, v[j].y)));
        }
    }
    let circles: Vec<((f64, f64), f64)> = scene
        .dynamic_obstacles
        .iter()
        .map(|o| {
            let p = o.position();
            ((p.x, p.y), o.footprint_radius)
        })
        .collect();
    (0..n)
        .map(|i| {
            let off = if n == 1 { 0.0 } else { -cfg.fov / 2.0 + i as f64 * step };
            let ang = (pose.heading + off) * PI / 180.0;
            let d = (ang.sin(), ang.cos());
            let o = (pose.x, pose.y);
            let mut best = cfg.max_range;
            for &(a, b) in &prims {
                if let Some(t) = hit_segment(o, d, a, b) {
                    best = best.min(t);
                }
            }
            for &(c, r) in &circles {
                if let Some(t) = hit_circle(o, d, c, r) {
                    best = best.min(t);
                }
            }
            best
        })
        .collect()
}

fn free_pose(scene: &WorldScene, rng: &mut ChaCha8Rng) -> VesselState {
    loop {
        let p = VesselState::at_rest(
            rng.random_range(scene.bounds.min.x..scene.bounds.max.x),
            rng.random_range(scene.bounds.min.y..scene.bounds.max.y),
            rng.random_range(0.0..360.0),
        );
        if !scene.check_collision(&p, 1.0) {
            return p;
        }
    }
}

#[test]
fn thousand_scenes_match_brute_force() {
    let cfg = SensorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut hits = 0usize;
    for seed in 0..1000u64 {
        let mut scene = generate(seed, &GenConfig::default()).unwrap();
        scene.advance_dynamics(rng.random_range(0.1..200.0));
        let pose = free_pose(&scene, &mut rng);
        let got = scan(&scene, &pose, &cfg).ranges;
        let want = brute_force(&scene, &pose, &cfg);
        assert_eq!(got.len(), 32);
        for (g, w) in got.iter().zip(&want) {
            assert!(*g > 0.0 && *g <= cfg.max_range);
            worst = worst.max((g - w).abs());
            hits += usize::from(*w < cfg.max_range);
        }
    }
    assert!(worst <= 1e-9, "max range error {worst}");
    assert!(hits > 10_000, "oracle exercised too few hits ({hits})");
}

#[test]
fn narrow_fans_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for seed in 0..200u64 {
        let scene = generate(seed, &GenConfig::default()).unwrap();
        let cfg = SensorConfig {
            n_rays: rng.random_range(1..40),
            fov: rng.random_range(10.0..359.0),
            max_range: rng.random_range(20.0..300.0),
            noise_std: 0.0,
        };
        let pose = free_pose(&scene, &mut rng);
        let got = scan(&scene, &pose, &cfg).ranges;
        let want = brute_force(&scene, &pose, &cfg);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9, "seed {seed}: {g} vs {w}");
        }
    }
}

fn rot(p: Vec2, c: Vec2, deg: f64) -> Vec2 {
    // Clockwise by `deg` (compass sense), about `c`.
    let (s, co) = (deg * PI / 180.0).sin_cos();
    let (dx, dy) = (p.x - c.x, p.y - c.y);
    Vec2::new(c.x + dx * co + dy * s, c.y - dx * s + dy * co)
}

fn rotate_scene(scene: &WorldScene, c: Vec2, deg: f64) -> WorldScene {
    let mut out = scene.clone();
    let pad = scene.bounds.diagonal();
    out.bounds = Rect {
        min: Vec2::new(c.x - pad, c.y - pad),
        max: Vec2::new(c.x + pad, c.y + pad),
    };
    out.basin = Polygon::new(scene.basin.vertices.iter().map(|v| rot(*v, c, deg)).collect());
    out.wall_segments = scene
        .wall_segments
        .iter()
        .map(|s| Segment::new(rot(s.a, c, deg), rot(s.b, c, deg)))
        .collect();
    out.static_obstacles = scene
        .static_obstacles
        .iter()
        .map(|p| Polygon::new(p.vertices.iter().map(|v| rot(*v, c, deg)).collect()))
        .collect();
    out.dynamic_obstacles = scene
        .dynamic_obstacles
        .iter()
        .map(|o| DynamicObstacle {
            route: o.route.iter().map(|v| rot(*v, c, deg)).collect(),
            ..o.clone()
        })
        .collect();
    out.goal = Disc {
        center: rot(scene.goal.center, c, deg),
        radius: scene.goal.radius,
    };
    out
}

#[test]
fn rotating_scene_and_pose_together_leaves_scan_unchanged() {
    let cfg = SensorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for seed in 0..300u64 {
        let mut scene = generate(seed, &GenConfig::default()).unwrap();
        scene.advance_dynamics(rng.random_range(0.0..100.0));
        let pose = free_pose(&scene, &mut rng);
        let phi = rng.random_range(-180.0..180.0);
        let c = Vec2::new(pose.x, pose.y);
        let rotated = rotate_scene(&scene, c, phi);
        let turned = VesselState {
            heading: (pose.heading + phi).rem_euclid(360.0),
            ..pose
        };
        let a = scan(&scene, &pose, &cfg).ranges;
        let b = scan(&rotated, &turned, &cfg).ranges;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    // Rotating coordinates in floating point is not exact; agreement is to rounding.
    assert!(worst <= 1e-9, "max deviation {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn extra_obstacle_never_lengthens_a_ray(
        seed in 0u64..500,
        pose_seed in any::<u64>(),
        cx in -60.0f64..60.0,
        cy in -60.0f64..60.0,
        r in 1.0f64..20.0,
        sides in 3usize..8,
    ) {
        let scene = generate(seed, &GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pose_seed);
        let pose = free_pose(&scene, &mut rng);
        let cfg = SensorConfig::default();
        let before = scan(&scene, &pose, &cfg).ranges;
        let centre = Vec2::new(pose.x + cx, pose.y + cy);
        let poly = Polygon::new(
            (0..sides)
                .map(|k| centre + Vec2::from_heading(k as f64 * 360.0 / sides as f64).scale(r))
                .collect(),
        );
        let mut more = scene.clone();
        more.static_obstacles.push(poly);
        let after = scan(&more, &pose, &cfg).ranges;
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn ranges_lie_in_half_open_interval(seed in 0u64..300, pose_seed in any::<u64>(), noise in 0.0f64..30.0) {
        let scene = generate(seed, &GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pose_seed);
        let pose = free_pose(&scene, &mut rng);
        let cfg = SensorConfig { noise_std: noise, ..SensorConfig::default() };
        let s = portnav::sensor::scan_noisy(&scene, &pose, &cfg, &mut rng);
        prop_assert_eq!(s.ranges.len(), cfg.n_rays);
        for r in s.ranges {
            prop_assert!(r > 0.0 && r <= cfg.max_range);
        }
    }
}
