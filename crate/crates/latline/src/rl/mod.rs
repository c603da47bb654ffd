//! Policy-gradient learner used to compare observation spaces.
//!
//! The policy is a Gaussian over actions: a small tanh net maps the
//! observation to the action mean, and a learnable per-action log-std
//! (bounded to `[-5, 2]`) sets the exploration scale. Training is REINFORCE
//! with a per-timestep value baseline fitted by a second net of the same
//! substrate; advantages are normalized per batch. Every observation mode
//! shares this identical learner so differences between runs come only from
//! what the policy observes.

mod train;

pub use train::{seed_sweep, train_policy, CurveRow, LearningCurve, RLConfig, SweepReport};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingModel;
use crate::envs::{observe, Env, ObsMode, Task};
use crate::nn::{Mlp, MlpShape};
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Gaussian policy: observation -> action mean, plus a state-independent
/// log-std vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Policy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

impl Policy {
    pub fn init(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            net: Mlp::init(MlpShape::new(obs_dim, hidden, action_dim), rng),
            log_std: vec![init_log_std; action_dim],
        }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    /// Deterministic action mean.
    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let (mu, _, _) = self.net.forward(obs)?;
        Ok(mu)
    }

    /// Sample an unclipped action; callers clip to env bounds before
    /// stepping but score the raw sample.
    pub fn sample(&self, obs: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
        let mu = self.mean(obs)?;
        Ok(mu
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| {
                let eps: f64 = StandardNormal.sample(rng);
                m + ls.exp() * eps
            })
            .collect())
    }

    pub fn clamp_log_std(&mut self) {
        for ls in &mut self.log_std {
            *ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }
}

/// A frozen batch for the policy-gradient surrogate: observations, the raw
/// actions that were sampled there, and their advantages.
#[derive(Clone, Debug, Default)]
pub struct SurrogateBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub advantages: Vec<f64>,
}

/// Surrogate loss `-(1/N) sum_t log pi(a_t | s_t) * A_t`, whose gradient is
/// the REINFORCE estimator for the frozen batch.
pub fn policy_surrogate(policy: &Policy, batch: &SurrogateBatch) -> Result<f64> {
    surrogate_impl(policy, batch, None)
}

/// As [`policy_surrogate`], accumulating gradients for the mean net and the
/// log-std vector.
pub fn policy_surrogate_grad(
    policy: &Policy,
    batch: &SurrogateBatch,
    net_grads: &mut [f64],
    log_std_grads: &mut [f64],
) -> Result<f64> {
    surrogate_impl(policy, batch, Some((net_grads, log_std_grads)))
}

fn surrogate_impl(
    policy: &Policy,
    batch: &SurrogateBatch,
    mut grads: Option<(&mut [f64], &mut [f64])>,
) -> Result<f64> {
    const LN_2PI: f64 = 1.8378770664093453;
    let n = batch.obs.len();
    if n == 0 || batch.actions.len() != n || batch.advantages.len() != n {
        return Err(Error::Config("surrogate batch is empty or ragged".into()));
    }
    let a_dim = policy.action_dim();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let zero_sigma = vec![0.0; a_dim];

    for i in 0..n {
        let (mu, _, tape) = policy.net.forward(&batch.obs[i])?;
        let adv = batch.advantages[i];
        let mut d_mu = vec![0.0; a_dim];
        for j in 0..a_dim {
            let ls = policy.log_std[j];
            let sigma = ls.exp();
            let diff = batch.actions[i][j] - mu[j];
            let z = diff / sigma;
            loss -= adv * (-0.5 * LN_2PI - ls - 0.5 * z * z) * inv_n;
            if let Some((_, log_std_grads)) = grads.as_mut() {
                // d(-logp)/d mu = -(a - mu)/sigma^2; d(-logp)/d ls = 1 - z^2.
                d_mu[j] = -adv * (diff / (sigma * sigma)) * inv_n;
                log_std_grads[j] += adv * (1.0 - z * z) * inv_n;
            }
        }
        if let Some((net_grads, _)) = grads.as_mut() {
            policy.net.backward_into(&tape, &d_mu, &zero_sigma, net_grads)?;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("policy surrogate loss".into()));
    }
    Ok(loss)
}

/// An environment the rollout collector can drive. The library tasks
/// implement this through [`TaskEnv`]; tests add synthetic bandits.
pub trait RolloutEnv {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn action_bound(&self) -> f64;
    fn horizon(&self) -> usize;
    fn reset(&mut self, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<(Vec<f64>, f64, bool)>;
}

/// Library task wrapped with an observation mode.
pub struct TaskEnv {
    env: Env,
    mode: ObsMode,
    model: Option<EmbeddingModel>,
    checked_this_episode: bool,
}

impl TaskEnv {
    pub fn new(task: Task, mode: ObsMode, model: Option<EmbeddingModel>) -> Result<Self> {
        if mode.needs_model() && model.is_none() {
            return Err(Error::Config(format!(
                "observation mode '{}' requires an embedding checkpoint",
                mode.id()
            )));
        }
        Ok(Self {
            env: Env::new(task),
            mode,
            model,
            checked_this_episode: false,
        })
    }

    pub fn task(&self) -> Task {
        self.env.task
    }

    fn observe_current(&self) -> Result<Vec<f64>> {
        observe(self.env.task, &self.env.state, self.mode, self.model.as_ref())
    }

    /// Once per episode: the augmented observation must be exactly the raw
    /// observation with the encoder mean appended.
    fn spot_check_wrapper(&mut self, obs: &[f64]) -> Result<()> {
        if self.checked_this_episode || self.mode != ObsMode::Augmented {
            return Ok(());
        }
        self.checked_this_episode = true;
        let raw = observe(self.env.task, &self.env.state, ObsMode::Raw, None)?;
        let z = observe(self.env.task, &self.env.state, ObsMode::Embedded, self.model.as_ref())?;
        let ok = obs.len() == raw.len() + z.len()
            && obs[..raw.len()] == raw[..]
            && obs[raw.len()..] == z[..];
        if !ok {
            return Err(Error::NonFinite(
                "augmented observation is not raw ++ encoder mean".into(),
            ));
        }
        Ok(())
    }
}

impl RolloutEnv for TaskEnv {
    fn obs_dim(&self) -> usize {
        let z_dim = self.model.as_ref().map_or(0, |m| m.z_dim);
        crate::envs::obs_dim(self.env.task, self.mode, z_dim)
    }
    fn action_dim(&self) -> usize {
        self.env.spec().action_dim
    }
    fn action_bound(&self) -> f64 {
        self.env.spec().action_bound
    }
    fn horizon(&self) -> usize {
        self.env.spec().horizon
    }
    fn reset(&mut self, rng: &mut rand_chacha::ChaCha8Rng) -> Result<Vec<f64>> {
        self.env.reset(rng);
        self.checked_this_episode = false;
        let obs = self.observe_current()?;
        self.spot_check_wrapper(&obs)?;
        Ok(obs)
    }
    fn step(&mut self, action: &[f64]) -> Result<(Vec<f64>, f64, bool)> {
        let out = self.env.step(action);
        let obs = self.observe_current()?;
        Ok((obs, out.reward, out.terminated))
    }
}
