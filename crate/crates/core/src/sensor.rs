//! Simulated ranging sensor: a fan of rays cast from the ego position.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{ray_circle, ray_segment, Vec2};
use crate::kinematics::VesselState;
use crate::world::WorldScene;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub n_rays: usize,
    /// Degrees, centred on the heading.
    pub fov: f64,
    /// Meters.
    pub max_range: f64,
    /// Additive Gaussian noise, meters.
    pub noise_std: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            n_rays: 32,
            fov: 360.0,
            max_range: 200.0,
            noise_std: 0.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rays == 0 {
            return Err(Error::Config("sensor.n_rays must be >= 1".into()));
        }
        if !(self.fov > 0.0 && self.fov <= 360.0) {
            return Err(Error::Config(format!(
                "sensor.fov must be in (0, 360], got {}",
                self.fov
            )));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(Error::Config("sensor.max_range must be > 0".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config("sensor.noise_std must be >= 0".into()));
        }
        Ok(())
    }

    /// Ray angles relative to the heading, in degrees. A full-circle fan spaces
    /// rays `360/n` apart so the first and last rays do not coincide.
    pub fn ray_offsets(&self) -> Vec<f64> {
        let n = self.n_rays;
        if n == 1 {
            return vec![0.0];
        }
        let step = if self.fov >= 360.0 {
            self.fov / n as f64
        } else {
            self.fov / (n - 1) as f64
        };
        (0..n).map(|i| -self.fov / 2.0 + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeScan {
    pub ranges: Vec<f64>,
}

/// Distance to the nearest scene primitive along one ray, capped at `max_range`.
pub fn cast_ray(scene: &WorldScene, origin: Vec2, dir: Vec2, max_range: f64) -> f64 {
    let mut best = max_range;
    let mut consider = |t: Option<f64>| {
        if let Some(t) = t {
            if t < best {
                best = t;
            }
        }
    };
    for wall in &scene.wall_segments {
        consider(ray_segment(origin, dir, wall));
    }
    for poly in &scene.static_obstacles {
        for edge in poly.edges() {
            consider(ray_segment(origin, dir, &edge));
        }
    }
    for o in &scene.dynamic_obstacles {
        consider(ray_circle(origin, dir, &o.disc()));
    }
    best
}

/// Noise-free scan.
pub fn scan(scene: &WorldScene, pose: &VesselState, cfg: &SensorConfig) -> RangeScan {
    let origin = Vec2::new(pose.x, pose.y);
    let ranges = cfg
        .ray_offsets()
        .into_iter()
        .map(|off| {
            let dir = Vec2::from_heading(pose.heading + off);
            cast_ray(scene, origin, dir, cfg.max_range)
        })
        .collect();
    RangeScan { ranges }
}

/// Scan with additive Gaussian noise, clamped back into `(0, max_range]`.
pub fn scan_noisy<R: Rng + ?Sized>(
    scene: &WorldScene,
    pose: &VesselState,
    cfg: &SensorConfig,
    rng: &mut R,
) -> RangeScan {
    let mut s = scan(scene, pose, cfg);
    if cfg.noise_std > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_std).expect("validated noise_std");
        let floor = cfg.max_range * 1e-6;
        for r in &mut s.ranges {
            *r = (*r + normal.sample(rng)).clamp(floor, cfg.max_range);
        }
    }
    s
}
