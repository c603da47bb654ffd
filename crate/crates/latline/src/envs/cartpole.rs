//! Frictionless cart-pole dynamics.
//!
//! State layout: `[cart_pos, cart_vel, pole_angle, pole_ang_vel]` with the
//! angle measured from upright (0 = up, pi = hanging) and stored unwrapped.
//! Constants are fixed, documented stand-ins: cart 1.0 kg, pole 0.1 kg with
//! half-length 0.5 m and uniform mass, g = 9.81, force bound 10 N, and a
//! 1 m track enforced by clamping the cart with zeroed velocity at the
//! walls.

pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const GRAVITY: f64 = 9.81;
pub const FORCE_MAX: f64 = 10.0;
pub const TRACK_HALF: f64 = 0.5;
pub const DT: f64 = 0.01;

/// One semi-implicit Euler step of the cart-pole ODE. The force is clamped
/// to `FORCE_MAX`.
pub fn cartpole_step(s: &[f64], force: f64, dt: f64) -> Vec<f64> {
    assert_eq!(s.len(), 4, "cartpole state is 4-dimensional");
    let force = force.clamp(-FORCE_MAX, FORCE_MAX);
    let (x, x_dot, theta, theta_dot) = (s[0], s[1], s[2], s[3]);
    let total_mass = CART_MASS + POLE_MASS;
    let ml = POLE_MASS * POLE_HALF_LENGTH;
    let (sin_t, cos_t) = theta.sin_cos();

    let temp = (force + ml * theta_dot * theta_dot * sin_t) / total_mass;
    let theta_acc = (GRAVITY * sin_t - cos_t * temp)
        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t * cos_t / total_mass));
    let x_acc = temp - ml * theta_acc * cos_t / total_mass;

    let new_x_dot = x_dot + dt * x_acc;
    let new_theta_dot = theta_dot + dt * theta_acc;
    let mut new_x = x + dt * new_x_dot;
    let new_theta = theta + dt * new_theta_dot;

    let mut out_x_dot = new_x_dot;
    if new_x.abs() >= TRACK_HALF {
        new_x = new_x.clamp(-TRACK_HALF, TRACK_HALF);
        out_x_dot = 0.0;
    }
    vec![new_x, out_x_dot, new_theta, new_theta_dot]
}

/// Pole energy in the pivot frame: rotational kinetic energy about the
/// pivot plus potential, zero at pole horizontal. This is the quantity
/// energy-shaping controllers drive to `POLE_MASS * GRAVITY *
/// POLE_HALF_LENGTH` (its upright-rest value).
pub fn pole_pivot_energy(s: &[f64]) -> f64 {
    let i_pivot = (4.0 / 3.0) * POLE_MASS * POLE_HALF_LENGTH * POLE_HALF_LENGTH;
    0.5 * i_pivot * s[3] * s[3] + POLE_MASS * GRAVITY * POLE_HALF_LENGTH * s[2].cos()
}

/// Total mechanical energy of the cart-pole (kinetic + potential), with the
/// potential zero at pole horizontal. Conserved by the zero-force dynamics.
pub fn cartpole_energy(s: &[f64]) -> f64 {
    let (x_dot, theta, theta_dot) = (s[1], s[2], s[3]);
    let total_mass = CART_MASS + POLE_MASS;
    let ml = POLE_MASS * POLE_HALF_LENGTH;
    let kinetic = 0.5 * total_mass * x_dot * x_dot
        + ml * x_dot * theta_dot * theta.cos()
        + (2.0 / 3.0) * POLE_MASS * POLE_HALF_LENGTH * POLE_HALF_LENGTH * theta_dot * theta_dot;
    let potential = ml * GRAVITY * theta.cos();
    kinetic + potential
}
