//! Planar 2-link reacher with damped double-integrator joints.
//!
//! State layout: `[joint1, joint2, joint1_vel, joint2_vel, target_x,
//! target_y]`. Each joint follows `theta_dd = tau - c * theta_dot` with unit
//! inertia and viscous damping `c = 0.1`, integrated semi-implicitly. The
//! target never moves during an episode.

pub const DAMPING: f64 = 0.1;
pub const TORQUE_MAX: f64 = 1.0;
pub const LINK1: f64 = 0.5;
pub const LINK2: f64 = 0.5;
pub const DT: f64 = 0.01;

/// One semi-implicit Euler step. Torques are clamped to `TORQUE_MAX`.
pub fn reacher_step(s: &[f64], torques: &[f64], dt: f64) -> Vec<f64> {
    assert_eq!(s.len(), 6, "reacher state is 6-dimensional");
    assert_eq!(torques.len(), 2, "reacher takes 2 torques");
    let mut out = s.to_vec();
    for j in 0..2 {
        let tau = torques[j].clamp(-TORQUE_MAX, TORQUE_MAX);
        let acc = tau - DAMPING * s[2 + j];
        out[2 + j] = s[2 + j] + dt * acc;
        out[j] = s[j] + dt * out[2 + j];
    }
    out
}

/// End-effector position from the joint angles.
pub fn tip_position(s: &[f64]) -> (f64, f64) {
    let (t1, t2) = (s[0], s[1]);
    (
        LINK1 * t1.cos() + LINK2 * (t1 + t2).cos(),
        LINK1 * t1.sin() + LINK2 * (t1 + t2).sin(),
    )
}
