//! Latent-line state embeddings for control.
//!
//! This crate learns a stochastic encoder that maps raw robot states into a
//! latent space where demonstration trajectories become straight,
//! constant-velocity lines, then measures whether appending that embedding to
//! an RL agent's observations improves policy-gradient training.
//!
//! The pipeline, end to end:
//!
//! 1. [`demos`] generates demonstration trajectories (random-shooting
//!    kinodynamic planner or scripted experts) on the analytic environments
//!    in [`envs`].
//! 2. [`data`] turns trajectories into evenly spaced state triplets.
//! 3. [`embedding`] trains a variational encoder/decoder pair on those
//!    triplets, built on the tiny network substrate in [`nn`] and the
//!    diagonal-Gaussian algebra in [`gaussian`], and scores the result with a
//!    trajectory-linearity metric.
//! 4. [`rl`] trains Gaussian policies with REINFORCE + value baseline under
//!    raw, trig, embedded, or augmented observations and sweeps seeds.
//! 5. [`cli`] wires the stages into subcommands with reproducible manifests.

pub mod cli;
pub mod data;
pub mod demos;
pub mod embedding;
pub mod envs;
pub mod gaussian;
pub mod nn;
pub mod report;
pub mod rl;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix dimension did not match what the operation expects.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A loss, gradient, or state component stopped being finite.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A stored record failed validation on load.
    #[error("bad record {index}: {reason}")]
    Record { index: usize, reason: String },

    /// Invalid configuration (unknown key, out-of-range value, missing input).
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline quality gate failed (success floor, degenerate selection).
    #[error("gate failure: {0}")]
    Gate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
