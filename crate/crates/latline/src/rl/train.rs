//! REINFORCE training loop, seed sweeps, and their CSV/JSON reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{policy_surrogate_grad, Policy, RolloutEnv, SurrogateBatch};
use crate::nn::{AdamState, Mlp, MlpShape};
use crate::report::{mean, rolling_mean, sample_variance};
use crate::{Error, Result};

/// Learner hyperparameters; every observation mode runs these unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RLConfig {
    pub discount: f64,
    pub episodes_per_update: usize,
    pub updates: usize,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    pub seed: u64,
    pub smooth_window: usize,
}

impl Default for RLConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            episodes_per_update: 20,
            updates: 500,
            policy_lr: 3e-3,
            value_lr: 1e-2,
            hidden: vec![32, 32],
            init_log_std: 0.5,
            seed: 0,
            smooth_window: 10,
        }
    }
}

/// One row of a learning curve: per-update undiscounted return statistics.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CurveRow {
    pub update: usize,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub smoothed: f64,
}

/// Per-seed training record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearningCurve {
    pub seed: u64,
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    pub fn final_smoothed(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.smoothed)
    }

    pub fn max_smoothed(&self) -> f64 {
        self.rows.iter().map(|r| r.smoothed).fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV columns: `update,mean,min,max,smoothed`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "update,mean,min,max,smoothed")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.update, r.mean_return, r.min_return, r.max_return, r.smoothed
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Train one policy with REINFORCE + value baseline; deterministic per seed.
pub fn train_policy(env: &mut impl RolloutEnv, cfg: &RLConfig) -> Result<LearningCurve> {
    if cfg.episodes_per_update == 0 || cfg.updates == 0 {
        return Err(Error::Config("updates and episodes_per_update must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let obs_dim = env.obs_dim();
    let a_dim = env.action_dim();
    let bound = env.action_bound();

    let mut policy = Policy::init(obs_dim, a_dim, &cfg.hidden, cfg.init_log_std, &mut rng);
    let mut value = Mlp::init(MlpShape::new(obs_dim, &cfg.hidden, 1), &mut rng);

    let mut adam_policy = AdamState::new(policy.net.params.len(), cfg.policy_lr);
    let mut adam_log_std = AdamState::new(a_dim, cfg.policy_lr);
    let mut adam_value = AdamState::new(value.params.len(), cfg.value_lr);

    let mut net_grads = policy.net.zero_grads();
    let mut ls_grads = vec![0.0; a_dim];
    let mut value_grads = value.zero_grads();
    let mut means = Vec::with_capacity(cfg.updates);
    let mut rows = Vec::with_capacity(cfg.updates);

    for update in 0..cfg.updates {
        let mut batch = SurrogateBatch::default();
        let mut returns_to_go: Vec<f64> = Vec::new();
        let mut episode_returns = Vec::with_capacity(cfg.episodes_per_update);

        for _ in 0..cfg.episodes_per_update {
            let mut obs = env.reset(&mut rng)?;
            let mut rewards = Vec::with_capacity(env.horizon());
            for _ in 0..env.horizon() {
                let action = policy.sample(&obs, &mut rng)?;
                let clipped: Vec<f64> =
                    action.iter().map(|a| a.clamp(-bound, bound)).collect();
                batch.obs.push(obs);
                batch.actions.push(action);
                let (next_obs, reward, done) = env.step(&clipped)?;
                rewards.push(reward);
                obs = next_obs;
                if done {
                    break;
                }
            }
            episode_returns.push(rewards.iter().sum::<f64>());
            let mut g = 0.0;
            let mut discounted = vec![0.0; rewards.len()];
            for (t, &r) in rewards.iter().enumerate().rev() {
                g = r + cfg.discount * g;
                discounted[t] = g;
            }
            returns_to_go.extend(discounted);
        }

        // Value baseline: fit v(s) to the returns, advantage = G - v.
        value_grads.fill(0.0);
        let n = returns_to_go.len() as f64;
        let mut advantages = Vec::with_capacity(returns_to_go.len());
        for (obs, &g) in batch.obs.iter().zip(&returns_to_go) {
            let (v, _, tape) = value.forward(obs)?;
            advantages.push(g - v[0]);
            let d_v = [(v[0] - g) / n];
            value.backward_into(&tape, &d_v, &[0.0], &mut value_grads)?;
        }

        // Per-batch advantage normalization.
        let adv_mean = mean(&advantages);
        let adv_std = (advantages
            .iter()
            .map(|a| (a - adv_mean) * (a - adv_mean))
            .sum::<f64>()
            / n)
            .sqrt()
            .max(1e-8);
        for a in &mut advantages {
            *a = (*a - adv_mean) / adv_std;
        }
        batch.advantages = advantages;

        net_grads.fill(0.0);
        ls_grads.fill(0.0);
        policy_surrogate_grad(&policy, &batch, &mut net_grads, &mut ls_grads)
            .map_err(|e| Error::NonFinite(format!("update {update}: {e}")))?;

        adam_policy
            .step(&mut policy.net.params, &net_grads)
            .map_err(|e| Error::NonFinite(format!("update {update}: {e}")))?;
        adam_log_std
            .step(&mut policy.log_std, &ls_grads)
            .map_err(|e| Error::NonFinite(format!("update {update}: {e}")))?;
        policy.clamp_log_std();
        adam_value
            .step(&mut value.params, &value_grads)
            .map_err(|e| Error::NonFinite(format!("update {update}: {e}")))?;

        let mean_return = mean(&episode_returns);
        means.push(mean_return);
        rows.push(CurveRow {
            update,
            mean_return,
            min_return: episode_returns.iter().cloned().fold(f64::INFINITY, f64::min),
            max_return: episode_returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            smoothed: 0.0,
        });
    }

    for (row, s) in rows.iter_mut().zip(rolling_mean(&means, cfg.smooth_window)) {
        row.smoothed = s;
    }
    Ok(LearningCurve {
        seed: cfg.seed,
        rows,
    })
}

/// Per-update cross-seed statistics: the mean of the smoothed curves, the
/// band from second-worst to second-best, and the best-ever run's curve.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub update: usize,
    pub mean_smoothed: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub best_curve: f64,
}

/// Everything a seed sweep produces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub seeds: Vec<u64>,
    pub curves: Vec<LearningCurve>,
    pub failed: Vec<(u64, String)>,
    pub rows: Vec<SweepRow>,
    pub final_smoothed: Vec<f64>,
    pub final_variance: f64,
    pub best_seed: u64,
}

impl SweepReport {
    /// CSV columns: `update,mean_smoothed,band_low,band_high,best_curve`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "update,mean_smoothed,band_low,band_high,best_curve")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.update, r.mean_smoothed, r.band_low, r.band_high, r.best_curve
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run [`train_policy`] once per seed as independent tasks and aggregate.
/// Individual seed failures are recorded, not fatal, as long as at least
/// three runs complete.
pub fn seed_sweep<E, F>(make_env: F, cfg: &RLConfig, seeds: &[u64]) -> Result<SweepReport>
where
    E: RolloutEnv,
    F: Fn() -> Result<E> + Sync,
{
    if seeds.len() < 3 {
        return Err(Error::Config(format!(
            "seed_sweep needs >= 3 seeds, got {}",
            seeds.len()
        )));
    }

    let results: Vec<(u64, Result<LearningCurve>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let run_cfg = RLConfig { seed, ..cfg.clone() };
                let make_env = &make_env;
                scope.spawn(move || {
                    let run = || -> Result<LearningCurve> {
                        let mut env = make_env()?;
                        train_policy(&mut env, &run_cfg)
                    };
                    (seed, run())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut curves = Vec::new();
    let mut failed = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(curve) => curves.push(curve),
            Err(e) => failed.push((seed, e.to_string())),
        }
    }
    if curves.len() < 3 {
        return Err(Error::Gate(format!(
            "only {} of {} seed runs completed",
            curves.len(),
            seeds.len()
        )));
    }

    let updates = curves[0].rows.len();
    let best_idx = (0..curves.len())
        .max_by(|&a, &b| {
            curves[a]
                .max_smoothed()
                .partial_cmp(&curves[b].max_smoothed())
                .unwrap()
        })
        .unwrap();

    let mut rows = Vec::with_capacity(updates);
    for u in 0..updates {
        let mut smoothed: Vec<f64> = curves.iter().map(|c| c.rows[u].smoothed).collect();
        let best_curve = curves[best_idx].rows[u].smoothed;
        let mean_smoothed = mean(&smoothed);
        smoothed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(SweepRow {
            update: u,
            mean_smoothed,
            band_low: smoothed[1],
            band_high: smoothed[smoothed.len() - 2],
            best_curve,
        });
    }

    let final_smoothed: Vec<f64> = curves.iter().map(LearningCurve::final_smoothed).collect();
    Ok(SweepReport {
        seeds: seeds.to_vec(),
        final_variance: sample_variance(&final_smoothed),
        best_seed: curves[best_idx].seed,
        curves,
        failed,
        rows,
        final_smoothed,
    })
}
