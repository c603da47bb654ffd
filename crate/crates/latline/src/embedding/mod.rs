//! Variational trajectory-linearity embedding.
//!
//! The encoder `q(z|x)` and decoder `p(x|z)` are diagonal-Gaussian heads on
//! small MLPs. Training maximizes a modified evidence lower bound over state
//! triplets `(x_prev, x_mid, x_next)`:
//!
//! * the two edge latents pay an analytic KL against the `N(0, I)` prior,
//! * all three states are reconstructed, the middle one from a sample of the
//!   midpoint law of the edge latents (optionally variance-doubled so its
//!   scale matches the encoder's own output),
//! * a `lambda`-weighted analytic KL ties that midpoint law to the encoder's
//!   distribution at `x_mid`, which is what pulls trajectories straight.
//!
//! A deterministic squared-error baseline over encoder means is provided for
//! comparison, and [`eval`] scores any encoder by how linearly it lays out
//! held-out trajectories.

mod eval;
mod train;

pub use eval::{eval_metric, fit_scale, EvalReport};
pub use train::{
    select_best_seed, train_embedding, train_seeds, Checkpoint, LogRow, TrainedRun, TrainingLog,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Triplet;
use crate::gaussian::{kl_divergence, DiagGaussian, SIGMA_FLOOR};
use crate::nn::{Mlp, MlpShape};
use crate::{Error, Result};

/// Paired stochastic encoder and decoder with their latent width.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub z_dim: usize,
}

impl EmbeddingModel {
    pub fn init(state_dim: usize, z_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let encoder = Mlp::init(MlpShape::new(state_dim, hidden, z_dim), rng);
        let decoder = Mlp::init(MlpShape::new(z_dim, hidden, state_dim), rng);
        Self {
            encoder,
            decoder,
            z_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.encoder.shape.input_dim
    }

    /// Encode a state to its latent distribution (sigma floored).
    pub fn encode(&self, x: &[f64]) -> Result<DiagGaussian> {
        let (mu, sigma, _) = self.encoder.forward(x)?;
        DiagGaussian::new(mu, floor_sigma(&sigma))
    }

    /// Mean of `q(z|x)`; the embedded state handed to observers.
    pub fn encode_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (mu, _, _) = self.encoder.forward(x)?;
        Ok(mu)
    }
}

/// Training hyperparameters. Every field is overridable from the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub z_dim: usize,
    pub triplet_steps: Vec<usize>,
    pub variance_doubling: bool,
    pub hidden: Vec<usize>,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            steps: 4000,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 0,
            z_dim: 3,
            triplet_steps: vec![1, 3, 5, 10, 30],
            variance_doubling: true,
            hidden: vec![64, 64],
            eval_every: 1000,
        }
    }
}

/// Loss terms from one triplet. `loss` is the negated lower bound
/// `kl_prior - recon + lambda * kl_mid`, to be minimized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboTerms {
    pub loss: f64,
    pub kl_prior: f64,
    pub recon: f64,
    pub kl_mid: f64,
}

fn floor_sigma(sigma: &[f64]) -> Vec<f64> {
    sigma.iter().map(|&s| s.max(SIGMA_FLOOR)).collect()
}

/// Zero the gradient where the floor clamped sigma.
fn mask_floored(grad: &mut [f64], raw: &[f64]) {
    for (g, &r) in grad.iter_mut().zip(raw) {
        if r < SIGMA_FLOOR {
            *g = 0.0;
        }
    }
}

/// KL of `N(mu, sigma)` against the standard normal prior, with gradient
/// accumulation into `(d_mu, d_sigma)`.
fn kl_to_prior(mu: &[f64], sigma: &[f64], d_mu: &mut [f64], d_sigma: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..mu.len() {
        let (m, s) = (mu[i], sigma[i]);
        total += 0.5 * (s * s + m * m - 1.0) - s.ln();
        d_mu[i] += m;
        d_sigma[i] += s - 1.0 / s;
    }
    total
}

/// Gaussian log density plus gradients of the *negated* density w.r.t. the
/// head outputs (`d_mu`, `d_sigma`) and the evaluation point (`d_x`).
fn log_prob_backward(
    x: &[f64],
    mu: &[f64],
    sigma: &[f64],
    d_mu: &mut [f64],
    d_sigma: &mut [f64],
) -> f64 {
    const LN_2PI: f64 = 1.8378770664093453;
    let mut total = 0.0;
    for i in 0..x.len() {
        let s = sigma[i];
        let diff = x[i] - mu[i];
        let z = diff / s;
        total += -0.5 * LN_2PI - s.ln() - 0.5 * z * z;
        // loss contains -log p, so flip signs of the density gradient.
        d_mu[i] += -(diff / (s * s));
        d_sigma[i] += -(-1.0 / s + diff * diff / (s * s * s));
    }
    total
}

struct DecoderPass {
    log_prob: f64,
    d_latent: Vec<f64>,
}

/// Run the decoder at `z`, score `x`, and (optionally) accumulate decoder
/// parameter gradients, returning the gradient w.r.t. `z`.
fn decode_and_score(
    model: &EmbeddingModel,
    z: &[f64],
    x: &[f64],
    dec_grads: Option<&mut [f64]>,
) -> Result<DecoderPass> {
    let (mu, sigma_raw, tape) = model.decoder.forward(z)?;
    let sigma = floor_sigma(&sigma_raw);
    let mut d_mu = vec![0.0; x.len()];
    let mut d_sigma = vec![0.0; x.len()];
    let log_prob = log_prob_backward(x, &mu, &sigma, &mut d_mu, &mut d_sigma);
    let d_latent = match dec_grads {
        Some(grads) => {
            mask_floored(&mut d_sigma, &sigma_raw);
            model.decoder.backward_into(&tape, &d_mu, &d_sigma, grads)?
        }
        None => vec![0.0; model.z_dim],
    };
    Ok(DecoderPass { log_prob, d_latent })
}

/// Negated modified lower bound for one triplet, with frozen noise.
///
/// `noise` holds `2 * z_dim` standard-normal draws: the first half drives the
/// `x_prev` latent sample, the second half the `x_next` sample. The midpoint
/// latent reuses both halves scaled so its marginal law is exactly the
/// (optionally variance-doubled) midpoint distribution of the edge latents.
pub fn elbo_hat(
    model: &EmbeddingModel,
    triplet: &Triplet,
    noise: &[f64],
    cfg: &TrainConfig,
) -> Result<ElboTerms> {
    elbo_impl(model, triplet, noise, cfg, None)
}

/// As [`elbo_hat`], accumulating parameter gradients of the loss into the
/// flat encoder and decoder buffers.
pub fn elbo_hat_grad(
    model: &EmbeddingModel,
    triplet: &Triplet,
    noise: &[f64],
    cfg: &TrainConfig,
    enc_grads: &mut [f64],
    dec_grads: &mut [f64],
) -> Result<ElboTerms> {
    elbo_impl(model, triplet, noise, cfg, Some((enc_grads, dec_grads)))
}

fn elbo_impl(
    model: &EmbeddingModel,
    triplet: &Triplet,
    noise: &[f64],
    cfg: &TrainConfig,
    grads: Option<(&mut [f64], &mut [f64])>,
) -> Result<ElboTerms> {
    let z_dim = model.z_dim;
    let n = model.state_dim();
    if triplet.x_mid.len() != n {
        return Err(Error::Shape {
            context: "triplet state vs encoder input",
            expected: n,
            actual: triplet.x_mid.len(),
        });
    }
    if noise.len() != 2 * z_dim {
        return Err(Error::Shape {
            context: "elbo noise",
            expected: 2 * z_dim,
            actual: noise.len(),
        });
    }
    let (eps_a, eps_b) = noise.split_at(z_dim);

    // Encode all three states.
    let (mu_a, sig_a_raw, tape_a) = model.encoder.forward(&triplet.x_prev)?;
    let (mu_t, sig_t_raw, tape_t) = model.encoder.forward(&triplet.x_mid)?;
    let (mu_b, sig_b_raw, tape_b) = model.encoder.forward(&triplet.x_next)?;
    let sig_a = floor_sigma(&sig_a_raw);
    let sig_t = floor_sigma(&sig_t_raw);
    let sig_b = floor_sigma(&sig_b_raw);

    // Edge latent samples and the shared-noise midpoint sample.
    let z_a: Vec<f64> = (0..z_dim).map(|i| mu_a[i] + sig_a[i] * eps_a[i]).collect();
    let z_b: Vec<f64> = (0..z_dim).map(|i| mu_b[i] + sig_b[i] * eps_b[i]).collect();

    // var(z_mid) = scale * (sig_a^2 + sig_b^2); kappa maps the summed edge
    // noise onto that standard deviation.
    let var_scale: f64 = if cfg.variance_doubling { 0.5 } else { 0.25 };
    let kappa = var_scale.sqrt();
    let mid_mu: Vec<f64> = (0..z_dim).map(|i| 0.5 * (mu_a[i] + mu_b[i])).collect();
    let mid_sigma: Vec<f64> = (0..z_dim)
        .map(|i| (var_scale * (sig_a[i] * sig_a[i] + sig_b[i] * sig_b[i])).sqrt())
        .collect();
    let z_mid: Vec<f64> = (0..z_dim)
        .map(|i| mid_mu[i] + kappa * (sig_a[i] * eps_a[i] + sig_b[i] * eps_b[i]))
        .collect();

    // Analytic terms.
    let mut d_mu_a = vec![0.0; z_dim];
    let mut d_sig_a = vec![0.0; z_dim];
    let mut d_mu_b = vec![0.0; z_dim];
    let mut d_sig_b = vec![0.0; z_dim];
    let mut d_mu_t = vec![0.0; z_dim];
    let mut d_sig_t = vec![0.0; z_dim];

    let kl_prior = kl_to_prior(&mu_a, &sig_a, &mut d_mu_a, &mut d_sig_a)
        + kl_to_prior(&mu_b, &sig_b, &mut d_mu_b, &mut d_sig_b);

    let mid = DiagGaussian::new(mid_mu.clone(), mid_sigma.clone())?;
    let enc_t = DiagGaussian::new(mu_t.clone(), sig_t.clone())?;
    let kl_mid = kl_divergence(&mid, &enc_t)?;

    let (enc_grads, mut dec_grads) = match grads {
        Some((e, d)) => (Some(e), Some(d)),
        None => (None, None),
    };

    // Reconstruction of all three states.
    let pass_a = decode_and_score(model, &z_a, &triplet.x_prev, dec_grads.as_deref_mut())?;
    let pass_t = decode_and_score(model, &z_mid, &triplet.x_mid, dec_grads.as_deref_mut())?;
    let pass_b = decode_and_score(model, &z_b, &triplet.x_next, dec_grads.as_deref_mut())?;
    let recon = pass_a.log_prob + pass_t.log_prob + pass_b.log_prob;

    let loss = kl_prior - recon + cfg.lambda * kl_mid;
    let terms = ElboTerms {
        loss,
        kl_prior,
        recon,
        kl_mid,
    };
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "elbo loss (kl_prior={kl_prior}, recon={recon}, kl_mid={kl_mid})"
        )));
    }

    let Some(enc_grads) = enc_grads else {
        return Ok(terms);
    };
    let dec_grads_done = dec_grads.is_some();
    debug_assert!(dec_grads_done);

    // Chain decoder input gradients into the latent heads.
    let mut d_mid_mu = vec![0.0; z_dim];
    let mut d_mid_sigma = vec![0.0; z_dim];
    for i in 0..z_dim {
        // Edge samples: z = mu + sigma * eps.
        d_mu_a[i] += pass_a.d_latent[i];
        d_sig_a[i] += pass_a.d_latent[i] * eps_a[i];
        d_mu_b[i] += pass_b.d_latent[i];
        d_sig_b[i] += pass_b.d_latent[i] * eps_b[i];
        // Midpoint sample: z = mid_mu + kappa (sig_a eps_a + sig_b eps_b).
        d_mid_mu[i] += pass_t.d_latent[i];
        d_sig_a[i] += pass_t.d_latent[i] * kappa * eps_a[i];
        d_sig_b[i] += pass_t.d_latent[i] * kappa * eps_b[i];
    }

    // lambda-weighted KL(mid || enc_t), differentiated in closed form.
    for i in 0..z_dim {
        let (qm, qs) = (mid_mu[i], mid_sigma[i]);
        let (pm, ps) = (mu_t[i], sig_t[i]);
        let diff = qm - pm;
        d_mid_mu[i] += cfg.lambda * diff / (ps * ps);
        d_mid_sigma[i] += cfg.lambda * (-1.0 / qs + qs / (ps * ps));
        d_mu_t[i] += cfg.lambda * (-diff / (ps * ps));
        d_sig_t[i] += cfg.lambda * (1.0 / ps - (qs * qs + diff * diff) / (ps * ps * ps));
    }

    // Midpoint law parameters back to the edge heads.
    for i in 0..z_dim {
        d_mu_a[i] += 0.5 * d_mid_mu[i];
        d_mu_b[i] += 0.5 * d_mid_mu[i];
        d_sig_a[i] += d_mid_sigma[i] * var_scale * sig_a[i] / mid_sigma[i];
        d_sig_b[i] += d_mid_sigma[i] * var_scale * sig_b[i] / mid_sigma[i];
    }

    mask_floored(&mut d_sig_a, &sig_a_raw);
    mask_floored(&mut d_sig_t, &sig_t_raw);
    mask_floored(&mut d_sig_b, &sig_b_raw);
    model
        .encoder
        .backward_into(&tape_a, &d_mu_a, &d_sig_a, enc_grads)?;
    model
        .encoder
        .backward_into(&tape_t, &d_mu_t, &d_sig_t, enc_grads)?;
    model
        .encoder
        .backward_into(&tape_b, &d_mu_b, &d_sig_b, enc_grads)?;

    Ok(terms)
}

/// Deterministic baseline: Euclidean distance between `x_mid` and the decoded
/// average of the edge encoder means. Only the `mu` heads participate.
pub fn direct_loss(model: &EmbeddingModel, triplet: &Triplet) -> Result<f64> {
    direct_impl(model, triplet, None)
}

/// As [`direct_loss`] with gradient accumulation.
pub fn direct_loss_grad(
    model: &EmbeddingModel,
    triplet: &Triplet,
    enc_grads: &mut [f64],
    dec_grads: &mut [f64],
) -> Result<f64> {
    direct_impl(model, triplet, Some((enc_grads, dec_grads)))
}

fn direct_impl(
    model: &EmbeddingModel,
    triplet: &Triplet,
    grads: Option<(&mut [f64], &mut [f64])>,
) -> Result<f64> {
    let z_dim = model.z_dim;
    let (mu_a, _, tape_a) = model.encoder.forward(&triplet.x_prev)?;
    let (mu_b, _, tape_b) = model.encoder.forward(&triplet.x_next)?;
    let mid: Vec<f64> = (0..z_dim).map(|i| 0.5 * (mu_a[i] + mu_b[i])).collect();
    let (dec_mu, _, dec_tape) = model.decoder.forward(&mid)?;

    let residual: Vec<f64> = dec_mu
        .iter()
        .zip(&triplet.x_mid)
        .map(|(d, x)| d - x)
        .collect();
    let loss = residual.iter().map(|r| r * r).sum::<f64>().sqrt();
    if !loss.is_finite() {
        return Err(Error::NonFinite("direct loss".into()));
    }

    if let Some((enc_grads, dec_grads)) = grads {
        // d||r|| / d dec_mu = r / ||r||; undefined at zero, where we take 0.
        let d_dec_mu: Vec<f64> = if loss > 0.0 {
            residual.iter().map(|r| r / loss).collect()
        } else {
            vec![0.0; residual.len()]
        };
        let zero_head = vec![0.0; residual.len()];
        let d_mid = model
            .decoder
            .backward_into(&dec_tape, &d_dec_mu, &zero_head, dec_grads)?;
        let d_edge: Vec<f64> = d_mid.iter().map(|g| 0.5 * g).collect();
        let zero_z = vec![0.0; z_dim];
        model
            .encoder
            .backward_into(&tape_a, &d_edge, &zero_z, enc_grads)?;
        model
            .encoder
            .backward_into(&tape_b, &d_edge, &zero_z, enc_grads)?;
    }
    Ok(loss)
}
