//! Scripted expert controllers used as an alternate demonstration source.
//!
//! The swingup expert pumps mechanical energy toward the upright level and
//! hands over to a linear catch controller near the top. The reacher expert
//! tracks an inverse-kinematics pose with a PD law. Gains were tuned once
//! against the fixed environment constants and are frozen here.

use crate::data::{wrap_to_pi, Trajectory};
use crate::envs::cartpole::{
    cartpole_step, pole_pivot_energy, CART_MASS, DT as CART_DT, FORCE_MAX, GRAVITY,
    POLE_HALF_LENGTH, POLE_MASS,
};
use crate::envs::reacher::{reacher_step, DT as REACH_DT, LINK1, LINK2, TORQUE_MAX};
use crate::envs::Task;

/// A closed-loop rollout recorded for the dataset: states, the controls that
/// produced them, and whether the controller reached its goal band.
#[derive(Clone, Debug)]
pub struct DemoRollout {
    pub trajectory: Trajectory,
    pub controls: Vec<Vec<f64>>,
    pub success: bool,
}

// Swingup gains (energy pumping on the pivot-frame pole energy, with a
// slight overshoot so the pole arrives at the top slow enough to catch).
const K_PUMP: f64 = 80.0;
const E_MARGIN: f64 = 0.12;
const K_CART_POS: f64 = 1.0;
const K_CART_VEL: f64 = 2.0;
const CATCH_ANGLE: f64 = 0.3;
const CATCH_RATE: f64 = 4.0;
const K_ANGLE: f64 = 45.0;
const K_RATE: f64 = 7.0;
const K_POS: f64 = 2.0;
const K_VEL: f64 = 3.5;

/// Swingup expert force for one state.
pub fn swingup_expert_force(state: &[f64]) -> f64 {
    let (x, x_dot, theta_dot) = (state[0], state[1], state[3]);
    let theta = wrap_to_pi(state[2]);
    let force = if theta.abs() < CATCH_ANGLE && theta_dot.abs() < CATCH_RATE {
        K_ANGLE * theta + K_RATE * theta_dot + K_POS * x + K_VEL * x_dot
    } else {
        let target = POLE_MASS * POLE_HALF_LENGTH * GRAVITY + E_MARGIN;
        let energy_err = pole_pivot_energy(state) - target;
        let pump_signal = theta_dot * theta.cos();
        if energy_err < -0.05 && pump_signal.abs() < 1e-3 {
            // Symmetric rest near the bottom: kick to start the swing.
            FORCE_MAX
        } else {
            let accel = K_PUMP * energy_err * pump_signal - K_CART_POS * x - K_CART_VEL * x_dot;
            (CART_MASS + POLE_MASS) * accel
        }
    };
    force.clamp(-FORCE_MAX, FORCE_MAX)
}

/// Goal band the swingup expert (and its dataset gate) must hit: pole within
/// 0.2 rad of upright, spinning slower than 1 rad/s.
pub fn swingup_goal(state: &[f64]) -> bool {
    wrap_to_pi(state[2]).abs() < 0.2 && state[3].abs() < 1.0
}

/// Closed-loop swingup rollout from `start` for `steps` steps.
pub fn swingup_expert(start: &[f64], steps: usize) -> DemoRollout {
    let mut state = start.to_vec();
    let mut states = vec![state.clone()];
    let mut controls = Vec::with_capacity(steps);
    let mut success = swingup_goal(&state);
    for _ in 0..steps {
        let force = swingup_expert_force(&state);
        state = cartpole_step(&state, force, CART_DT);
        controls.push(vec![force]);
        states.push(state.clone());
        success |= swingup_goal(&state);
    }
    DemoRollout {
        trajectory: Trajectory {
            env_id: Task::CartpoleSwingup.id().to_string(),
            dt: CART_DT,
            states,
        },
        controls,
        success,
    }
}

// Reacher PD gains.
const K_P: f64 = 2.0;
const K_D: f64 = 2.0;

/// Elbow-up inverse kinematics for the 2-link arm. Targets outside the
/// reachable annulus are projected onto it.
pub fn reacher_ik(tx: f64, ty: f64) -> (f64, f64) {
    let r = (tx * tx + ty * ty).sqrt().max(1e-9);
    let reach = (r.clamp((LINK1 - LINK2).abs() + 1e-6, LINK1 + LINK2 - 1e-6)) / r;
    let (px, py) = (tx * reach, ty * reach);
    let d = ((px * px + py * py) - LINK1 * LINK1 - LINK2 * LINK2) / (2.0 * LINK1 * LINK2);
    let d = d.clamp(-1.0, 1.0);
    let t2 = (1.0 - d * d).sqrt().atan2(d);
    let t1 = py.atan2(px) - (LINK2 * t2.sin()).atan2(LINK1 + LINK2 * t2.cos());
    (t1, t2)
}

/// Reacher PD torques toward the IK pose of the state's own target.
pub fn reacher_expert_torques(state: &[f64]) -> Vec<f64> {
    let (g1, g2) = reacher_ik(state[4], state[5]);
    let tau1 = K_P * wrap_to_pi(g1 - state[0]) - K_D * state[2];
    let tau2 = K_P * wrap_to_pi(g2 - state[1]) - K_D * state[3];
    vec![
        tau1.clamp(-TORQUE_MAX, TORQUE_MAX),
        tau2.clamp(-TORQUE_MAX, TORQUE_MAX),
    ]
}

/// Goal band for the reacher expert: tip within 5 cm of the target with low
/// joint speeds.
pub fn reacher_goal(state: &[f64]) -> bool {
    let (tx, ty) = crate::envs::reacher::tip_position(state);
    let dist = ((tx - state[4]).powi(2) + (ty - state[5]).powi(2)).sqrt();
    dist < 0.05 && state[2].abs() < 0.5 && state[3].abs() < 0.5
}

/// Closed-loop reacher rollout from `start` for `steps` steps.
pub fn reacher_expert(start: &[f64], steps: usize) -> DemoRollout {
    let mut state = start.to_vec();
    let mut states = vec![state.clone()];
    let mut controls = Vec::with_capacity(steps);
    let mut success = reacher_goal(&state);
    for _ in 0..steps {
        let tau = reacher_expert_torques(&state);
        state = reacher_step(&state, &tau, REACH_DT);
        controls.push(tau);
        states.push(state.clone());
        success |= reacher_goal(&state);
    }
    DemoRollout {
        trajectory: Trajectory {
            env_id: Task::Reacher.id().to_string(),
            dt: REACH_DT,
            states,
        },
        controls,
        success,
    }
}

/// Scripted expert rollout for a task. Swingup demos run the task horizon
/// (200 steps); reacher demos run 600 steps so the torque-limited arm has
/// time to cross the workspace.
pub fn scripted_expert(task: Task, start: &[f64]) -> DemoRollout {
    match task {
        Task::CartpoleBalance | Task::CartpoleSwingup => swingup_expert(start, 200),
        Task::Reacher => reacher_expert(start, 600),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Env, Task};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn swingup_from_hanging_reaches_goal_band() {
        let rollout = swingup_expert(&[0.0, 0.0, PI, 0.0], 200);
        assert!(rollout.success, "expert failed from hanging rest");
        assert_eq!(rollout.trajectory.states.len(), 201);
    }

    #[test]
    fn swingup_succeeds_from_most_random_starts() {
        let mut env = Env::new(Task::CartpoleSwingup);
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let mut ok = 0;
        for _ in 0..100 {
            let start = env.reset(&mut rng).to_vec();
            if swingup_expert(&start, 200).success {
                ok += 1;
            }
        }
        assert!(ok >= 90, "swingup expert success {ok}/100");
    }

    #[test]
    fn reacher_ik_ground_truth() {
        // Straight out to (1, 0): both joints zero.
        let (t1, t2) = reacher_ik(1.0 - 1e-6, 0.0);
        assert!(t1.abs() < 1e-2 && t2.abs() < 1e-2);
        // IK pose actually puts the tip at the target.
        for (tx, ty) in [(0.3, 0.4), (-0.5, 0.2), (0.1, -0.6)] {
            let (t1, t2) = reacher_ik(tx, ty);
            let s = vec![t1, t2, 0.0, 0.0, tx, ty];
            let (px, py) = crate::envs::reacher::tip_position(&s);
            let err = ((px - tx).powi(2) + (py - ty).powi(2)).sqrt();
            assert!(err < 1e-6, "ik error {err} for target ({tx},{ty})");
        }
    }

    #[test]
    fn reacher_pd_at_target_barely_moves() {
        // Start with the tip already on the target: near-zero motion.
        let (t1, t2) = reacher_ik(0.4, 0.3);
        let start = vec![t1, t2, 0.0, 0.0, 0.4, 0.3];
        let rollout = reacher_expert(&start, 100);
        assert!(rollout.success);
        let last = rollout.trajectory.states.last().unwrap();
        assert!((last[0] - t1).abs() < 0.05 && (last[1] - t2).abs() < 0.05);
    }

    #[test]
    fn reacher_succeeds_from_most_random_starts() {
        let mut env = Env::new(Task::Reacher);
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        let mut ok = 0;
        for _ in 0..100 {
            let start = env.reset(&mut rng).to_vec();
            if reacher_expert(&start, 600).success {
                ok += 1;
            }
        }
        assert!(ok >= 90, "reacher expert success {ok}/100");
    }
}
