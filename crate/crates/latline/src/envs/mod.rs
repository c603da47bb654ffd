//! Analytic control environments and observation wrappers.
//!
//! Three tasks are exposed by string id: `cartpole-balance`,
//! `cartpole-swingup`, and `reacher`. Environments are value-semantic state
//! machines over plain state vectors; stepping is deterministic and
//! side-effect free, and every source of reset randomness comes from the
//! caller's RNG.

pub mod cartpole;
pub mod reacher;

use rand::Rng;

use crate::data::Trajectory;
use crate::embedding::EmbeddingModel;
use crate::{Error, Result};

/// Task selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    CartpoleBalance,
    CartpoleSwingup,
    Reacher,
}

impl Task {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "cartpole-balance" => Ok(Self::CartpoleBalance),
            "cartpole-swingup" => Ok(Self::CartpoleSwingup),
            "reacher" => Ok(Self::Reacher),
            other => Err(Error::Config(format!(
                "unknown env id '{other}' (expected cartpole-balance, cartpole-swingup, or reacher)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::CartpoleBalance => "cartpole-balance",
            Self::CartpoleSwingup => "cartpole-swingup",
            Self::Reacher => "reacher",
        }
    }

    pub fn spec(&self) -> EnvSpec {
        match self {
            Self::CartpoleBalance => EnvSpec {
                state_dim: 4,
                action_dim: 1,
                action_bound: cartpole::FORCE_MAX,
                dt: cartpole::DT,
                horizon: 100,
            },
            Self::CartpoleSwingup => EnvSpec {
                state_dim: 4,
                action_dim: 1,
                action_bound: cartpole::FORCE_MAX,
                dt: cartpole::DT,
                horizon: 200,
            },
            Self::Reacher => EnvSpec {
                state_dim: 6,
                action_dim: 2,
                action_bound: reacher::TORQUE_MAX,
                dt: reacher::DT,
                horizon: 100,
            },
        }
    }
}

/// Static facts about a task: dimensions, bounds, step size, episode length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bound: f64,
    pub dt: f64,
    pub horizon: usize,
}

/// What the policy sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObsMode {
    /// The raw state vector.
    Raw,
    /// Angles replaced by their sine/cosine pairs.
    Trig,
    /// Encoder mean of the embedding input only.
    Embedded,
    /// Raw observation with the encoder mean appended.
    Augmented,
}

impl ObsMode {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "raw" => Ok(Self::Raw),
            "trig" => Ok(Self::Trig),
            "embedded" => Ok(Self::Embedded),
            "augmented" => Ok(Self::Augmented),
            other => Err(Error::Config(format!(
                "unknown observation mode '{other}' (expected raw, trig, embedded, or augmented)"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Trig => "trig",
            Self::Embedded => "embedded",
            Self::Augmented => "augmented",
        }
    }

    pub fn needs_model(&self) -> bool {
        matches!(self, Self::Embedded | Self::Augmented)
    }
}

/// The state slice fed to the embedding encoder: the full cart-pole state,
/// or the reacher's joints and velocities without the target.
pub fn embed_input(task: Task, state: &[f64]) -> &[f64] {
    match task {
        Task::CartpoleBalance | Task::CartpoleSwingup => &state[..4],
        Task::Reacher => &state[..4],
    }
}

/// Build the observation vector for a mode. Embedding modes require a model.
pub fn observe(
    task: Task,
    state: &[f64],
    mode: ObsMode,
    model: Option<&EmbeddingModel>,
) -> Result<Vec<f64>> {
    let raw = || -> Vec<f64> { state.to_vec() };
    let trig = || -> Vec<f64> {
        match task {
            Task::CartpoleBalance | Task::CartpoleSwingup => {
                vec![state[0], state[1], state[2].sin(), state[2].cos(), state[3]]
            }
            Task::Reacher => vec![
                state[0].sin(),
                state[1].sin(),
                state[0].cos(),
                state[1].cos(),
                state[2],
                state[3],
                state[4],
                state[5],
            ],
        }
    };
    match mode {
        ObsMode::Raw => Ok(raw()),
        ObsMode::Trig => Ok(trig()),
        ObsMode::Embedded | ObsMode::Augmented => {
            let model = model.ok_or_else(|| {
                Error::Config(format!("observation mode '{}' requires an embedding model", mode.id()))
            })?;
            let z = model.encode_mean(embed_input(task, state))?;
            if mode == ObsMode::Embedded {
                Ok(z)
            } else {
                let mut obs = raw();
                obs.extend_from_slice(&z);
                Ok(obs)
            }
        }
    }
}

/// Width of the observation vector for a mode.
pub fn obs_dim(task: Task, mode: ObsMode, z_dim: usize) -> usize {
    let raw = task.spec().state_dim;
    match (task, mode) {
        (_, ObsMode::Raw) => raw,
        (Task::Reacher, ObsMode::Trig) => 8,
        (_, ObsMode::Trig) => 5,
        (_, ObsMode::Embedded) => z_dim,
        (_, ObsMode::Augmented) => raw + z_dim,
    }
}

/// Per-step reward as a pure function of the post-step state and the action
/// that produced it.
pub fn reward(task: Task, state: &[f64], action: &[f64]) -> f64 {
    match task {
        Task::CartpoleBalance => {
            if balance_ok(state) {
                1.0
            } else {
                0.0
            }
        }
        Task::CartpoleSwingup => {
            let force = action[0].clamp(-cartpole::FORCE_MAX, cartpole::FORCE_MAX);
            state[2].cos() - 0.01 * force * force
        }
        Task::Reacher => {
            let (tx, ty) = reacher::tip_position(state);
            let dist = ((tx - state[4]).powi(2) + (ty - state[5]).powi(2)).sqrt();
            let tau_sq: f64 = action
                .iter()
                .map(|t| {
                    let t = t.clamp(-reacher::TORQUE_MAX, reacher::TORQUE_MAX);
                    t * t
                })
                .sum();
            -dist - 0.01 * tau_sq
        }
    }
}

fn balance_ok(state: &[f64]) -> bool {
    state[2].abs() < 0.2 && state[0].abs() < cartpole::TRACK_HALF
}

/// Closed-form return of the do-nothing policy on cartpole swingup from the
/// hanging rest state: cos(pi) every step with zero control cost, i.e.
/// `-horizon`. Used as the reference band for "did the learner beat doing
/// nothing at all".
pub fn do_nothing_return(horizon: usize) -> f64 {
    -(horizon as f64)
}

/// Upper edge of the do-nothing band (10% above the closed-form value); a
/// trained policy is considered above the band when its mean return exceeds
/// this.
pub fn do_nothing_band_upper(horizon: usize) -> f64 {
    0.9 * do_nothing_return(horizon)
}

/// A running episode: current state plus termination bookkeeping.
#[derive(Clone, Debug)]
pub struct Env {
    pub task: Task,
    pub state: Vec<f64>,
    terminated: bool,
}

/// Result of one wrapper step.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminated: bool,
}

impl Env {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            state: vec![0.0; task.spec().state_dim],
            terminated: false,
        }
    }

    pub fn spec(&self) -> EnvSpec {
        self.task.spec()
    }

    /// Draw a fresh start state. Balance starts near the center with the
    /// pole nearly upright; swingup starts anywhere with small velocities;
    /// the reacher draws random joints and a reachable target.
    pub fn reset(&mut self, rng: &mut impl Rng) -> &[f64] {
        use std::f64::consts::PI;
        self.terminated = false;
        self.state = match self.task {
            Task::CartpoleBalance => vec![
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
            ],
            Task::CartpoleSwingup => vec![
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.5..0.5),
                rng.random_range(-PI..PI),
                rng.random_range(-0.5..0.5),
            ],
            Task::Reacher => {
                let angle = rng.random_range(-PI..PI);
                let radius = rng.random_range(0.1..0.9);
                vec![
                    rng.random_range(-PI..PI),
                    rng.random_range(-PI..PI),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    radius * angle.cos(),
                    radius * angle.sin(),
                ]
            }
        };
        &self.state
    }

    /// Place the environment in an explicit state (demo generation).
    pub fn set_state(&mut self, state: Vec<f64>) {
        assert_eq!(state.len(), self.spec().state_dim);
        self.state = state;
        self.terminated = false;
    }

    /// Advance one step. Only the balance task terminates early (pole or
    /// track violation); horizons are enforced by the caller.
    pub fn step(&mut self, action: &[f64]) -> StepOutcome {
        assert_eq!(action.len(), self.spec().action_dim, "action width");
        let dt = self.spec().dt;
        self.state = match self.task {
            Task::CartpoleBalance | Task::CartpoleSwingup => {
                cartpole::cartpole_step(&self.state, action[0], dt)
            }
            Task::Reacher => reacher::reacher_step(&self.state, action, dt),
        };
        let reward = reward(self.task, &self.state, action);
        if self.task == Task::CartpoleBalance && !balance_ok(&self.state) {
            self.terminated = true;
        }
        StepOutcome {
            reward,
            terminated: self.terminated,
        }
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    /// Roll out a fixed control sequence from a start state, recording the
    /// visited states as a [`Trajectory`].
    pub fn rollout_controls(task: Task, start: &[f64], controls: &[Vec<f64>]) -> Trajectory {
        let mut env = Env::new(task);
        env.set_state(start.to_vec());
        let mut states = vec![start.to_vec()];
        for action in controls {
            env.step(action);
            states.push(env.state.clone());
        }
        Trajectory {
            env_id: task.id().to_string(),
            dt: task.spec().dt,
            states,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn env_ids_round_trip() {
        for id in ["cartpole-balance", "cartpole-swingup", "reacher"] {
            assert_eq!(Task::from_id(id).unwrap().id(), id);
        }
        assert!(Task::from_id("mountain-car").is_err());
    }

    #[test]
    fn horizons_match_task() {
        assert_eq!(Task::CartpoleBalance.spec().horizon, 100);
        assert_eq!(Task::CartpoleSwingup.spec().horizon, 200);
        assert_eq!(Task::Reacher.spec().horizon, 100);
    }

    #[test]
    fn balance_reward_and_termination() {
        assert_eq!(reward(Task::CartpoleBalance, &[0.0, 0.0, 0.0, 0.0], &[0.0]), 1.0);
        assert_eq!(reward(Task::CartpoleBalance, &[0.0, 0.0, 0.3, 0.0], &[0.0]), 0.0);

        let mut env = Env::new(Task::CartpoleBalance);
        env.set_state(vec![0.0, 0.0, 0.19, 3.0]);
        let out = env.step(&[0.0]);
        assert!(out.terminated, "fast-falling pole should end the episode");
    }

    #[test]
    fn swingup_reward_cases() {
        // Hanging with zero force: cos(pi) = -1.
        assert_eq!(reward(Task::CartpoleSwingup, &[0.0, 0.0, PI, 0.0], &[0.0]), -1.0);
        // Upright with zero force: +1.
        assert_eq!(reward(Task::CartpoleSwingup, &[0.0, 0.0, 0.0, 0.0], &[0.0]), 1.0);
        // Control penalty.
        let r = reward(Task::CartpoleSwingup, &[0.0, 0.0, 0.0, 0.0], &[10.0]);
        assert!((r - (1.0 - 0.01 * 100.0)).abs() < 1e-12);
    }

    #[test]
    fn do_nothing_from_hanging_accumulates_minus_horizon() {
        let mut env = Env::new(Task::CartpoleSwingup);
        env.set_state(vec![0.0, 0.0, PI, 0.0]);
        let mut total = 0.0;
        for _ in 0..200 {
            total += env.step(&[0.0]).reward;
        }
        assert_eq!(total, do_nothing_return(200));
        assert!(do_nothing_band_upper(200) > do_nothing_return(200));
    }

    #[test]
    fn reacher_reward_is_negative_distance_with_control_cost() {
        // Tip at (1, 0), target at (1, 0): zero distance.
        let s = vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(reward(Task::Reacher, &s, &[0.0, 0.0]), 0.0);
        let r = reward(Task::Reacher, &s, &[1.0, 1.0]);
        assert!((r + 0.02).abs() < 1e-12);
    }

    #[test]
    fn observe_raw_returns_state_unchanged() {
        let s = vec![0.1, 0.2, 0.3, 0.4];
        let obs = observe(Task::CartpoleSwingup, &s, ObsMode::Raw, None).unwrap();
        assert_eq!(obs, s);
    }

    #[test]
    fn observe_trig_reacher_layout() {
        let s = vec![0.0, PI / 2.0, 0.7, -0.7, 0.3, 0.4];
        let obs = observe(Task::Reacher, &s, ObsMode::Trig, None).unwrap();
        assert!((obs[0] - 0.0).abs() < 1e-12);
        assert!((obs[1] - 1.0).abs() < 1e-12);
        assert!((obs[2] - 1.0).abs() < 1e-12);
        assert!(obs[3].abs() < 1e-12);
        assert_eq!(&obs[4..], &[0.7, -0.7, 0.3, 0.4]);
    }

    #[test]
    fn observe_embedding_modes() {
        use crate::nn::{Mlp, MlpShape};
        let model = EmbeddingModel {
            encoder: Mlp::zeros(MlpShape::new(4, &[4], 3)),
            decoder: Mlp::zeros(MlpShape::new(3, &[4], 4)),
            z_dim: 3,
        };
        let s = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let emb = observe(Task::Reacher, &s, ObsMode::Embedded, Some(&model)).unwrap();
        assert_eq!(emb.len(), 3);
        let aug = observe(Task::Reacher, &s, ObsMode::Augmented, Some(&model)).unwrap();
        assert_eq!(aug.len(), 6 + 3);
        assert_eq!(&aug[..6], &s[..]);
        assert_eq!(aug.len(), obs_dim(Task::Reacher, ObsMode::Augmented, 3));

        assert!(observe(Task::Reacher, &s, ObsMode::Embedded, None).is_err());
    }

    #[test]
    fn resets_are_seed_deterministic_and_in_range() {
        let mut a = Env::new(Task::CartpoleSwingup);
        let mut b = Env::new(Task::CartpoleSwingup);
        let sa = a.reset(&mut ChaCha8Rng::seed_from_u64(3)).to_vec();
        let sb = b.reset(&mut ChaCha8Rng::seed_from_u64(3)).to_vec();
        assert_eq!(sa, sb);

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let s = a.reset(&mut rng).to_vec();
            assert!(s[0].abs() <= 0.4 && s[2].abs() <= PI);
            assert!(s[1].abs() <= 0.5 && s[3].abs() <= 0.5);
        }
        let mut env = Env::new(Task::CartpoleBalance);
        for _ in 0..200 {
            let s = env.reset(&mut rng).to_vec();
            assert!(s.iter().all(|v| v.abs() <= 0.05));
        }
        let mut env = Env::new(Task::Reacher);
        for _ in 0..200 {
            let s = env.reset(&mut rng).to_vec();
            let r = (s[4] * s[4] + s[5] * s[5]).sqrt();
            assert!((0.1..=0.9).contains(&r), "target radius {r}");
        }
    }

    #[test]
    fn rollout_controls_replays_exactly() {
        let start = vec![0.0, 0.0, 2.0, 0.0];
        let controls: Vec<Vec<f64>> = (0..20).map(|k| vec![(k % 5) as f64 - 2.0]).collect();
        let a = Env::rollout_controls(Task::CartpoleSwingup, &start, &controls);
        let b = Env::rollout_controls(Task::CartpoleSwingup, &start, &controls);
        assert_eq!(a, b);
        assert_eq!(a.states.len(), 21);
    }
}
