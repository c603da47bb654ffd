//! Trajectory-linearity metric.
//!
//! For each trajectory, compare the Euclidean distance between the encoded
//! endpoints (`d_i`, using encoder means) against the demonstration path
//! length (`y_i`, normalized to mean 1 over the evaluated set). A single
//! scale `C` minimizing `sum (y_i - C d_i)^2` aligns the two, and the report
//! summarizes the absolute residuals.

use serde::{Deserialize, Serialize};

use super::EmbeddingModel;
use crate::data::{path_length, Trajectory};
use crate::report::{mean, population_std};
use crate::{Error, Result};

/// Per-trajectory linearity scores and their summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Embedded endpoint distances `d_i`.
    pub distances: Vec<f64>,
    /// Path lengths normalized to mean 1, `y_i`.
    pub normalized_lengths: Vec<f64>,
    /// Fitted scale `C = sum(d y) / sum(d^2)`.
    pub scale: f64,
    /// Mean of `|y_i - C d_i|`.
    pub mean_abs_error: f64,
    /// Population standard deviation of `|y_i - C d_i|`.
    pub std_abs_error: f64,
    /// Set when the embedding collapsed (`sum d^2 = 0`) or the trajectories
    /// have no length to normalize by; `scale` is reported as 0 and never
    /// divided by.
    pub degenerate: bool,
}

/// Closed-form least-squares scale between embedded and demonstrated
/// distances. Returns `(scale, degenerate)`; a degenerate fit (all `d_i`
/// zero) reports scale 0 instead of dividing by zero.
pub fn fit_scale(distances: &[f64], lengths: &[f64]) -> (f64, bool) {
    assert_eq!(distances.len(), lengths.len());
    let d_sq: f64 = distances.iter().map(|d| d * d).sum();
    if d_sq == 0.0 {
        return (0.0, true);
    }
    let dy: f64 = distances.iter().zip(lengths).map(|(d, y)| d * y).sum();
    (dy / d_sq, false)
}

/// Score an encoder on a trajectory set. Needs at least two trajectories,
/// otherwise the scale fit is meaningless.
pub fn eval_metric(model: &EmbeddingModel, trajs: &[Trajectory]) -> Result<EvalReport> {
    if trajs.len() < 2 {
        return Err(Error::Config(format!(
            "eval_metric needs >= 2 trajectories, got {}",
            trajs.len()
        )));
    }

    let mut distances = Vec::with_capacity(trajs.len());
    let mut raw_lengths = Vec::with_capacity(trajs.len());
    for traj in trajs {
        let first = traj.states.first().ok_or_else(|| Error::Record {
            index: 0,
            reason: "empty trajectory".into(),
        })?;
        let last = traj.states.last().unwrap();
        let z0 = model.encode_mean(first)?;
        let z1 = model.encode_mean(last)?;
        let d = z0
            .iter()
            .zip(&z1)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        distances.push(d);
        raw_lengths.push(path_length(traj));
    }

    let mean_len = mean(&raw_lengths);
    if mean_len == 0.0 {
        return Ok(EvalReport {
            normalized_lengths: vec![0.0; raw_lengths.len()],
            scale: 0.0,
            mean_abs_error: 0.0,
            std_abs_error: 0.0,
            degenerate: true,
            distances,
        });
    }
    let normalized: Vec<f64> = raw_lengths.iter().map(|l| l / mean_len).collect();

    let (scale, degenerate) = fit_scale(&distances, &normalized);
    let abs_errors: Vec<f64> = distances
        .iter()
        .zip(&normalized)
        .map(|(d, y)| (y - scale * d).abs())
        .collect();

    Ok(EvalReport {
        mean_abs_error: mean(&abs_errors),
        std_abs_error: population_std(&abs_errors),
        distances,
        normalized_lengths: normalized,
        scale,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mlp, MlpShape};

    /// Headless identity encoder: enc_mu(x) = x via a hidden-free mu head.
    fn identity_model(dim: usize) -> EmbeddingModel {
        let mut encoder = Mlp::zeros(MlpShape::new(dim, &[], dim));
        let mut decoder = Mlp::zeros(MlpShape::new(dim, &[], dim));
        for i in 0..dim {
            encoder.params[i * dim + i] = 1.0;
            decoder.params[i * dim + i] = 1.0;
        }
        EmbeddingModel {
            encoder,
            decoder,
            z_dim: dim,
        }
    }

    #[test]
    fn proportional_case_fits_perfectly() {
        let (c, degenerate) = fit_scale(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(c, 1.0);
        assert!(!degenerate);
    }

    #[test]
    fn hand_applied_scale_on_equal_distances() {
        // d = [1, 1], y = [2/3, 4/3]: C = mean(y) = 1, both errors 1/3.
        let d = [1.0, 1.0];
        let y = [2.0 / 3.0, 4.0 / 3.0];
        let (c, _) = fit_scale(&d, &y);
        assert!((c - 1.0).abs() < 1e-15);
        for (di, yi) in d.iter().zip(&y) {
            assert!(((yi - c * di).abs() - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn scale_matches_golden_section_minimizer() {
        // Independent route: golden-section search over C, then one
        // parabolic refinement to get past the sqrt(eps) comparison floor of
        // pure section search on a flat quadratic.
        let golden = |d: &[f64], y: &[f64]| -> f64 {
            let err = |c: f64| -> f64 {
                d.iter()
                    .zip(y)
                    .map(|(&di, &yi)| (yi - c * di) * (yi - c * di))
                    .sum()
            };
            let (mut lo, mut hi) = (-100.0f64, 100.0f64);
            let phi = (5.0f64.sqrt() - 1.0) / 2.0;
            for _ in 0..60 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if err(m1) < err(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let m = 0.5 * (lo + hi);
            let h = 1e-5;
            let (fm, fp, fn_) = (err(m), err(m + h), err(m - h));
            m - h * (fp - fn_) / (2.0 * (fp - 2.0 * fm + fn_))
        };
        let d = [0.5, 1.7, 2.2, 0.9];
        let y = [0.6, 1.5, 2.5, 1.0];
        let (c, _) = fit_scale(&d, &y);
        assert!((c - golden(&d, &y)).abs() < 1e-9);
    }

    #[test]
    fn identity_encoder_on_lines_scores_zero_error() {
        let model = identity_model(3);
        let trajs = crate::data::synthetic_linear_trajectories(6, 3, 20, 99);
        let report = eval_metric(&model, &trajs).unwrap();
        assert!(!report.degenerate);
        assert!(report.mean_abs_error < 1e-12, "err {}", report.mean_abs_error);
        // Normalization leaves the lengths with mean exactly 1.
        let m = crate::report::mean(&report.normalized_lengths);
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collapsed_encoder_is_flagged_degenerate() {
        // Zero encoder: every state maps to mean 0, so all d_i = 0.
        let model = EmbeddingModel {
            encoder: Mlp::zeros(MlpShape::new(3, &[4], 2)),
            decoder: Mlp::zeros(MlpShape::new(2, &[4], 3)),
            z_dim: 2,
        };
        let trajs = crate::data::synthetic_linear_trajectories(4, 3, 10, 5);
        let report = eval_metric(&model, &trajs).unwrap();
        assert!(report.degenerate);
        assert_eq!(report.scale, 0.0);
    }

    #[test]
    fn fewer_than_two_trajectories_rejected() {
        let model = identity_model(2);
        let trajs = crate::data::synthetic_linear_trajectories(1, 2, 10, 1);
        assert!(eval_metric(&model, &trajs).is_err());
    }

    #[test]
    fn fitted_scale_is_a_minimum() {
        let d = [0.3, 1.1, 0.8];
        let y = [0.5, 1.2, 0.9];
        let (c, _) = fit_scale(&d, &y);
        let err = |c: f64| -> f64 {
            d.iter()
                .zip(&y)
                .map(|(&di, &yi)| (yi - c * di) * (yi - c * di))
                .sum()
        };
        let base = err(c);
        assert!(err(c + 1e-3) >= base);
        assert!(err(c - 1e-3) >= base);
    }
}
