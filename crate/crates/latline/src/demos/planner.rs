//! Random-shooting kinodynamic planner.
//!
//! The planner grows a trajectory segment by segment: each iteration it
//! samples a batch of bounded control segments (one random control vector
//! held for the segment's duration), simulates each from the current state,
//! keeps the one whose end state has the lowest goal cost, and appends it.
//! It stops as soon as the goal predicate fires (truncating the winning
//! segment at the first goal state) or when the iteration budget runs out,
//! in which case the trajectory is returned with `success = false` for the
//! caller to filter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{wrap_to_pi, Trajectory};
use crate::envs::{cartpole, reacher, Task};

/// A deterministic control problem the planner can shoot against.
pub trait PlanEnv {
    fn step(&self, state: &[f64], control: &[f64]) -> Vec<f64>;
    fn control_dim(&self) -> usize;
    fn control_bound(&self) -> f64;
    /// Scalar progress measure; lower is closer to the goal.
    fn goal_cost(&self, state: &[f64]) -> f64;
    fn goal_reached(&self, state: &[f64]) -> bool;
}

/// Random-shooting budget and seeding.
#[derive(Clone, Debug)]
pub struct PlannerConfig {
    /// Candidate control sequences per iteration (>= 1).
    pub samples: usize,
    /// Steps per candidate segment.
    pub segment_len: usize,
    /// Maximum accepted segments before giving up.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            segment_len: 40,
            max_iters: 300,
            seed: 0,
        }
    }
}

/// Planner output: the state sequence, the controls that produced it, and
/// per-iteration cost bookkeeping for auditing the selection rule.
#[derive(Clone, Debug)]
pub struct PlanResult {
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub success: bool,
    /// Goal cost of the accepted segment end, per iteration.
    pub accepted_costs: Vec<f64>,
    /// Goal costs of every candidate, per iteration.
    pub candidate_costs: Vec<Vec<f64>>,
}

impl PlanResult {
    pub fn into_trajectory(self, env_id: &str, dt: f64) -> Trajectory {
        Trajectory {
            env_id: env_id.to_string(),
            dt,
            states: self.states,
        }
    }
}

/// Iterative random shooting from `start`.
pub fn plan_kinodynamic(env: &impl PlanEnv, start: &[f64], cfg: &PlannerConfig) -> PlanResult {
    assert!(cfg.samples >= 1, "need at least one candidate per iteration");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = env.control_bound();
    let c_dim = env.control_dim();

    let mut result = PlanResult {
        states: vec![start.to_vec()],
        controls: Vec::new(),
        success: env.goal_reached(start),
        accepted_costs: Vec::new(),
        candidate_costs: Vec::new(),
    };
    if result.success {
        return result;
    }

    let mut current = start.to_vec();
    for _ in 0..cfg.max_iters {
        let mut best: Option<(f64, Vec<Vec<f64>>, Vec<f64>)> = None;
        let mut costs = Vec::with_capacity(cfg.samples);
        for _ in 0..cfg.samples {
            let u: Vec<f64> = (0..c_dim).map(|_| rng.random_range(-bound..bound)).collect();
            let mut seg_states = Vec::with_capacity(cfg.segment_len);
            let mut s = current.clone();
            for _ in 0..cfg.segment_len {
                s = env.step(&s, &u);
                seg_states.push(s.clone());
            }
            let cost = env.goal_cost(&s);
            costs.push(cost);
            let better = best.as_ref().map_or(true, |(c, _, _)| cost < *c);
            if better {
                best = Some((cost, seg_states, u));
            }
        }
        let (cost, seg_states, control) = best.unwrap();
        result.accepted_costs.push(cost);
        result.candidate_costs.push(costs);

        // Append, truncating at the first in-segment goal state.
        for s in seg_states {
            let done = env.goal_reached(&s);
            result.states.push(s.clone());
            result.controls.push(control.clone());
            current = s;
            if done {
                result.success = true;
                return result;
            }
        }
    }
    result
}

/// 1-D double integrator reaching a point: the planner's reference problem.
pub struct DoubleIntegrator1D {
    pub target: f64,
    pub dt: f64,
}

impl PlanEnv for DoubleIntegrator1D {
    fn step(&self, state: &[f64], control: &[f64]) -> Vec<f64> {
        let v = state[1] + self.dt * control[0];
        vec![state[0] + self.dt * v, v]
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn control_bound(&self) -> f64 {
        1.0
    }
    fn goal_cost(&self, state: &[f64]) -> f64 {
        (state[0] - self.target).abs() + 0.2 * state[1].abs()
    }
    fn goal_reached(&self, state: &[f64]) -> bool {
        (state[0] - self.target).abs() < 0.05 && state[1].abs() < 0.2
    }
}

/// Cart-pole swingup as a planning problem: pump mechanical energy to the
/// upright level, then align the pole.
pub struct CartpoleSwingupPlan;

impl PlanEnv for CartpoleSwingupPlan {
    fn step(&self, state: &[f64], control: &[f64]) -> Vec<f64> {
        cartpole::cartpole_step(state, control[0], cartpole::DT)
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn control_bound(&self) -> f64 {
        cartpole::FORCE_MAX
    }
    fn goal_cost(&self, state: &[f64]) -> f64 {
        let upright_energy =
            cartpole::POLE_MASS * cartpole::POLE_HALF_LENGTH * cartpole::GRAVITY;
        let energy_err = (cartpole::pole_pivot_energy(state) - upright_energy).abs();
        let angle = wrap_to_pi(state[2]);
        2.0 * energy_err + (1.0 - angle.cos()) + 0.1 * state[3].abs() + 0.2 * state[0].abs()
    }
    fn goal_reached(&self, state: &[f64]) -> bool {
        wrap_to_pi(state[2]).abs() < 0.2 && state[3].abs() < 1.0
    }
}

/// Reacher tip-to-target as a planning problem.
pub struct ReacherPlan;

impl PlanEnv for ReacherPlan {
    fn step(&self, state: &[f64], control: &[f64]) -> Vec<f64> {
        reacher::reacher_step(state, control, reacher::DT)
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn control_bound(&self) -> f64 {
        reacher::TORQUE_MAX
    }
    fn goal_cost(&self, state: &[f64]) -> f64 {
        let (tx, ty) = reacher::tip_position(state);
        let dist = ((tx - state[4]).powi(2) + (ty - state[5]).powi(2)).sqrt();
        dist + 0.05 * (state[2].abs() + state[3].abs())
    }
    fn goal_reached(&self, state: &[f64]) -> bool {
        let (tx, ty) = reacher::tip_position(state);
        let dist = ((tx - state[4]).powi(2) + (ty - state[5]).powi(2)).sqrt();
        dist < 0.05 && state[2].abs() < 0.5 && state[3].abs() < 0.5
    }
}

/// Planner problem for a task id.
pub fn plan_env_for(task: Task) -> Box<dyn PlanEnv> {
    match task {
        Task::CartpoleBalance | Task::CartpoleSwingup => Box::new(CartpoleSwingupPlan),
        Task::Reacher => Box::new(ReacherPlan),
    }
}

impl PlanEnv for Box<dyn PlanEnv> {
    fn step(&self, state: &[f64], control: &[f64]) -> Vec<f64> {
        self.as_ref().step(state, control)
    }
    fn control_dim(&self) -> usize {
        self.as_ref().control_dim()
    }
    fn control_bound(&self) -> f64 {
        self.as_ref().control_bound()
    }
    fn goal_cost(&self, state: &[f64]) -> f64 {
        self.as_ref().goal_cost(state)
    }
    fn goal_reached(&self, state: &[f64]) -> bool {
        self.as_ref().goal_reached(state)
    }
}
