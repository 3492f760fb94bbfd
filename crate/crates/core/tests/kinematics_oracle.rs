//! Vessel integration checked against a separately written reference.

use std::f64::consts::PI;
use std::time::Instant;

use portnav::kinematics::{self, ControlInput, Vessel, VesselParams, VesselState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference: acceleration from thrust over mass, velocity first (clamped),
/// then the pose advances with the new speed along the old heading.
fn reference(s: [f64; 5], thrust: f64, rudder: f64, p: &VesselParams) -> [f64; 5] {
    let [x, y, h, v, w] = s;
    let thrust = thrust.max(-p.thrust_max).min(p.thrust_max);
    let rudder = rudder.max(-1.0).min(1.0);
    let v2 = (v + thrust / p.mass * p.dt).max(-p.speed_max).min(p.speed_max);
    let w2 = (w + rudder * p.turn_rate * p.dt)
        .max(-p.angular_rate_max)
        .min(p.angular_rate_max);
    let rad = h * PI / 180.0;
    let mut h2 = (h + w2 * p.dt) % 360.0;
    if h2 < 0.0 {
        h2 += 360.0;
    }
    [x + rad.sin() * v2 * p.dt, y + rad.cos() * v2 * p.dt, h2, v2, w2]
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

fn random_params(rng: &mut ChaCha8Rng) -> VesselParams {
    VesselParams {
        mass: rng.random_range(1e4..1e6),
        turn_rate: rng.random_range(1.0..1000.0),
        thrust_max: rng.random_range(1e4..1e6),
        speed_max: rng.random_range(0.5..20.0),
        angular_rate_max: rng.random_range(1.0..60.0),
        dt: rng.random_range(0.05..1.0),
    }
}

#[test]
fn million_random_steps_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1_000_000 {
        let p = random_params(&mut rng);
        let s = VesselState {
            x: rng.random_range(-1000.0..1000.0),
            y: rng.random_range(-1000.0..1000.0),
            heading: rng.random_range(0.0..360.0),
            speed: rng.random_range(-p.speed_max..=p.speed_max),
            angular_rate: rng.random_range(-p.angular_rate_max..=p.angular_rate_max),
        };
        let u = ControlInput::new(
            rng.random_range(-1.5 * p.thrust_max..1.5 * p.thrust_max),
            rng.random_range(-1.5..1.5),
        );
        let applied = kinematics::clamp(u, &p).unwrap();
        let got = kinematics::step(&s, &applied, &p).unwrap();
        let want = reference([s.x, s.y, s.heading, s.speed, s.angular_rate], u.thrust, u.rudder, &p);
        let err = [
            (got.x - want[0]).abs(),
            (got.y - want[1]).abs(),
            angle_gap(got.heading, want[2]),
            (got.speed - want[3]).abs(),
            (got.angular_rate - want[4]).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst = worst.max(err);
        assert!((0.0..360.0).contains(&got.heading));
    }
    let elapsed = start.elapsed();
    assert!(worst <= 1e-9, "max abs error {worst}");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
}

#[test]
fn coasting_preserves_velocity_exactly() {
    let p = VesselParams::default();
    let mut v = Vessel::new(
        VesselState {
            x: 3.0,
            y: -7.0,
            heading: 33.0,
            speed: 4.25,
            angular_rate: -2.5,
        },
        p,
    )
    .unwrap();
    for _ in 0..10_000 {
        v.step(ControlInput::new(0.0, 0.0)).unwrap();
        assert_eq!(v.state.speed.to_bits(), 4.25f64.to_bits());
        assert_eq!(v.state.angular_rate.to_bits(), (-2.5f64).to_bits());
    }
}

#[test]
fn hand_evaluated_rudder_step() {
    // From heading 90°, speed 2: ω = 0.1·70·0.5 = 3.5°/s, heading 90 + 1.75,
    // displacement 2·0.5 = 1 m along sin(90°) = +x.
    let p = VesselParams::default();
    let s = VesselState {
        x: 0.0,
        y: 0.0,
        heading: 90.0,
        speed: 2.0,
        angular_rate: 0.0,
    };
    let n = kinematics::step(&s, &ControlInput::new(0.0, 0.1), &p).unwrap();
    assert!((n.angular_rate - 3.5).abs() < 1e-12);
    assert!((n.heading - 91.75).abs() < 1e-12);
    assert!((n.x - 1.0).abs() < 1e-12);
    assert!(n.y.abs() < 1e-12);
}

proptest! {
    #[test]
    fn state_stays_in_bounds(
        seed in any::<u64>(),
        heading in 0.0f64..360.0,
        steps in 1usize..200,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng);
        let mut v = Vessel::new(VesselState { heading, ..VesselState::at_rest(0.0, 0.0, 0.0) }, p).unwrap();
        for _ in 0..steps {
            let u = ControlInput::new(
                rng.random_range(-3.0 * p.thrust_max..3.0 * p.thrust_max),
                rng.random_range(-3.0..3.0),
            );
            let applied = v.step(u).unwrap();
            prop_assert!(applied.thrust.abs() <= p.thrust_max && applied.rudder.abs() <= 1.0);
            prop_assert!((0.0..360.0).contains(&v.state.heading));
            prop_assert!(v.state.speed.abs() <= p.speed_max);
            prop_assert!(v.state.angular_rate.abs() <= p.angular_rate_max);
        }
    }

    #[test]
    fn step_is_a_pure_function(x in -1e3f64..1e3, h in 0.0f64..360.0, s in -8.0f64..8.0, t in -4e5f64..4e5, r in -1.0f64..1.0) {
        let p = VesselParams::default();
        let st = VesselState { x, y: -x, heading: h, speed: s, angular_rate: 1.0 };
        let u = ControlInput::new(t, r);
        let a = kinematics::step(&st, &u, &p).unwrap();
        let b = kinematics::step(&st, &u, &p).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn clamp_is_idempotent(t in -1e7f64..1e7, r in -10.0f64..10.0) {
        let p = VesselParams::default();
        let once = kinematics::clamp(ControlInput::new(t, r), &p).unwrap();
        prop_assert_eq!(kinematics::clamp(once, &p).unwrap(), once);
    }
}

#[test]
fn non_finite_inputs_are_rejected() {
    let p = VesselParams::default();
    let s = VesselState::at_rest(0.0, 0.0, 0.0);
    assert!(kinematics::step(&s, &ControlInput::new(f64::NAN, 0.0), &p).is_err());
    assert!(kinematics::clamp(ControlInput::new(0.0, f64::INFINITY), &p).is_err());
}
