//! Planar 3-DOF vessel kinematics.
//!
//! Thrust accelerates the hull (`a = thrust / mass`), rudder changes the
//! angular rate through the turn-rate gain, and the pose is then advanced with
//! the freshly updated velocity (semi-implicit Euler). Headings use the
//! compass convention: 0° points along +y and x advances with `sin(heading)`.
//! There is no drag, so with zero input the velocity is preserved exactly.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nominal training mass in kilograms.
pub const NOMINAL_MASS: f64 = 175_000.0;
/// Nominal turn-rate gain in degrees/s² per unit rudder.
pub const NOMINAL_TURN_RATE: f64 = 70.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VesselState {
    pub x: f64,
    pub y: f64,
    /// Degrees in `[0, 360)`.
    pub heading: f64,
    /// m/s, negative when reversing.
    pub speed: f64,
    /// Degrees per second.
    pub angular_rate: f64,
}

impl VesselState {
    pub fn at_rest(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_heading(heading),
            speed: 0.0,
            angular_rate: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.heading.is_finite()
            && self.speed.is_finite()
            && self.angular_rate.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Newtons.
    pub thrust: f64,
    /// Dimensionless, `[-1, 1]`; positive turns to starboard (clockwise).
    pub rudder: f64,
}

impl ControlInput {
    pub fn new(thrust: f64, rudder: f64) -> Self {
        Self { thrust, rudder }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VesselParams {
    /// Kilograms.
    pub mass: f64,
    /// Degrees/s² of angular acceleration per unit rudder.
    pub turn_rate: f64,
    /// Newtons.
    pub thrust_max: f64,
    /// m/s.
    pub speed_max: f64,
    /// Degrees/s.
    pub angular_rate_max: f64,
    /// Seconds per step.
    pub dt: f64,
}

impl Default for VesselParams {
    fn default() -> Self {
        Self {
            mass: NOMINAL_MASS,
            turn_rate: NOMINAL_TURN_RATE,
            thrust_max: 400_000.0,
            speed_max: 8.0,
            angular_rate_max: 15.0,
            dt: 0.5,
        }
    }
}

impl VesselParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("turn_rate", self.turn_rate),
            ("thrust_max", self.thrust_max),
            ("speed_max", self.speed_max),
            ("angular_rate_max", self.angular_rate_max),
            ("dt", self.dt),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_turn_rate(mut self, turn_rate: f64) -> Self {
        self.turn_rate = turn_rate;
        self
    }
}

/// Wraps any finite angle into `[0, 360)`.
pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Wraps any finite angle into `[-180, 180)`.
pub fn wrap_signed(deg: f64) -> f64 {
    let h = normalize_heading(deg + 180.0) - 180.0;
    if h >= 180.0 {
        -180.0
    } else {
        h
    }
}

pub fn clamp(input: ControlInput, params: &VesselParams) -> Result<ControlInput> {
    if !(input.thrust.is_finite() && input.rudder.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite control input {input:?}")));
    }
    Ok(ControlInput {
        thrust: input.thrust.clamp(-params.thrust_max, params.thrust_max),
        rudder: input.rudder.clamp(-1.0, 1.0),
    })
}

/// One integration step. Velocity is updated and clamped first; the pose then
/// moves with the new velocity along the pre-step heading.
pub fn step(state: &VesselState, input: &ControlInput, params: &VesselParams) -> Result<VesselState> {
    if !state.is_finite() {
        return Err(Error::InvalidState(format!("non-finite vessel state {state:?}")));
    }
    if !(input.thrust.is_finite() && input.rudder.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite control input {input:?}")));
    }
    let dt = params.dt;
    let accel = input.thrust / params.mass;
    let speed = (state.speed + accel * dt).clamp(-params.speed_max, params.speed_max);
    let angular_rate = (state.angular_rate + input.rudder * params.turn_rate * dt)
        .clamp(-params.angular_rate_max, params.angular_rate_max);

    let (sin, cos) = state.heading.to_radians().sin_cos();
    let next = VesselState {
        x: state.x + sin * (speed * dt),
        y: state.y + cos * (speed * dt),
        heading: normalize_heading(state.heading + angular_rate * dt),
        speed,
        angular_rate,
    };
    if !next.is_finite() {
        return Err(Error::InvalidState(format!(
            "integration produced non-finite state {next:?}"
        )));
    }
    Ok(next)
}

/// A vessel whose physical parameters may be swapped between steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vessel {
    pub state: VesselState,
    params: VesselParams,
}

impl Vessel {
    pub fn new(state: VesselState, params: VesselParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { state, params })
    }

    pub fn params(&self) -> &VesselParams {
        &self.params
    }

    /// Replaces the parameters used by subsequent steps. Invalid parameters are
    /// rejected and the previous ones kept.
    pub fn set_params(&mut self, new: VesselParams) -> Result<()> {
        new.validate()?;
        self.params = new;
        Ok(())
    }

    /// Clamps `input`, integrates one step and returns the clamped input that was applied.
    pub fn step(&mut self, input: ControlInput) -> Result<ControlInput> {
        let applied = clamp(input, &self.params)?;
        self.state = step(&self.state, &applied, &self.params)?;
        Ok(applied)
    }
}
