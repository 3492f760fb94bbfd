use serde::{Deserialize, Serialize};

use super::Policy;
use crate::env::EnvConfig;
use crate::kinematics::ControlInput;
use crate::{Error, Result};

/// Stateless pursuit controller: steers at the goal bearing and regulates
/// speed from distance, bearing error and forward clearance. It assumes the
/// nominal mass and turn rate it was built with, so parameter sweeps expose
/// its model mismatch just as they do for learned policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPursuit {
    pub thrust_max: f64,
    pub speed_max: f64,
    pub angular_rate_max: f64,
    pub mass: f64,
    pub turn_rate: f64,
    pub dt: f64,
    pub diagonal: f64,
    pub max_range: f64,
    pub ray_offsets: Vec<f64>,
    /// Rays within this many degrees of the bow count as "forward".
    pub forward_cone: f64,
}

impl ScriptedPursuit {
    pub fn from_env(cfg: &EnvConfig) -> Self {
        let v = &cfg.vessel;
        Self {
            thrust_max: v.thrust_max,
            speed_max: v.speed_max,
            angular_rate_max: v.angular_rate_max,
            mass: v.mass,
            turn_rate: v.turn_rate,
            dt: v.dt,
            diagonal: cfg.world.width.hypot(cfg.world.height),
            max_range: cfg.sensor.max_range,
            ray_offsets: cfg.sensor.ray_offsets(),
            forward_cone: 30.0,
        }
    }

    pub fn control(&self, obs: &[f64]) -> Result<ControlInput> {
        let n = self.ray_offsets.len();
        if obs.len() != n + 4 {
            return Err(Error::Shape(format!(
                "observation of length {}, controller expects {}",
                obs.len(),
                n + 4
            )));
        }
        let bearing = obs[n + 1] * 180.0;
        let distance = obs[n] * self.diagonal;
        let speed = obs[n + 2] * self.speed_max;
        let rate = obs[n + 3] * self.angular_rate_max;

        let rudder = if bearing.abs() > 45.0 {
            bearing.signum()
        } else {
            let wanted = (0.5 * bearing).clamp(-self.angular_rate_max, self.angular_rate_max);
            ((wanted - rate) / (self.turn_rate * self.dt)).clamp(-1.0, 1.0)
        };

        let forward = self
            .ray_offsets
            .iter()
            .zip(&obs[..n])
            .filter(|(off, _)| off.abs() <= self.forward_cone)
            .map(|(_, r)| r * self.max_range)
            .fold(self.max_range, f64::min);
        let heading_factor = bearing.to_radians().cos().max(0.15);
        let target_speed = (1.0 + 0.1 * distance)
            .min(0.75 * self.speed_max)
            .min(0.12 * (forward - 12.0).max(0.0) + 0.5)
            * heading_factor;
        let thrust = (0.5 * self.mass * (target_speed - speed) / self.dt).clamp(-self.thrust_max, self.thrust_max);
        Ok(ControlInput::new(thrust, rudder))
    }
}

impl Policy for ScriptedPursuit {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn act(&self, obs: &[f64]) -> Result<ControlInput> {
        self.control(obs)
    }
}
