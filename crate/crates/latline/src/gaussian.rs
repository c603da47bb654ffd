//! Diagonal-covariance Gaussian algebra.
//!
//! [`DiagGaussian`] is the currency of the variational model: encoder and
//! decoder heads produce one, the latent prior is one, and the distribution
//! of the midpoint of two independent latents is again one. Everything here
//! is a pure function over value types.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower clamp applied to standard deviations inside losses so log terms and
/// divisions stay finite.
pub const SIGMA_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.8378770664093453;

/// Multivariate normal with diagonal covariance, stored as a mean vector and
/// a strictly positive standard-deviation vector of equal length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::Shape {
                context: "gaussian mu/sigma",
                expected: mu.len(),
                actual: sigma.len(),
            });
        }
        if sigma.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::NonFinite("gaussian sigma must be positive".into()));
        }
        Ok(Self { mu, sigma })
    }

    /// Standard normal N(0, I) in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            sigma: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Log density at `x`: the sum of per-component univariate normal
    /// log densities.
    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                context: "log_prob point",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let mut total = 0.0;
        for ((&m, &s), &xi) in self.mu.iter().zip(&self.sigma).zip(x) {
            let z = (xi - m) / s;
            total += -0.5 * LN_2PI - s.ln() - 0.5 * z * z;
        }
        Ok(total)
    }

    /// Reparameterized sample `mu + sigma * noise` for externally supplied
    /// standard-normal noise.
    pub fn reparam_sample(&self, noise: &[f64]) -> Vec<f64> {
        assert_eq!(noise.len(), self.dim(), "noise dimension mismatch");
        self.mu
            .iter()
            .zip(&self.sigma)
            .zip(noise)
            .map(|((&m, &s), &e)| m + s * e)
            .collect()
    }
}

/// Closed-form KL divergence `D(q || p)` between diagonal Gaussians, summed
/// over dimensions. Nonnegative, zero iff `q == p`.
pub fn kl_divergence(q: &DiagGaussian, p: &DiagGaussian) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::Shape {
            context: "kl_divergence operands",
            expected: q.dim(),
            actual: p.dim(),
        });
    }
    let mut total = 0.0;
    for i in 0..q.dim() {
        let (qm, qs) = (q.mu[i], q.sigma[i]);
        let (pm, ps) = (p.mu[i], p.sigma[i]);
        let d = qm - pm;
        total += (ps / qs).ln() + (qs * qs + d * d) / (2.0 * ps * ps) - 0.5;
    }
    Ok(total)
}

/// Distribution of the average of one sample from `a` and one from `b`:
/// `N((mu_a + mu_b)/2, (sigma_a^2 + sigma_b^2)/4)`.
///
/// With `variance_doubling` the variance is doubled to
/// `(sigma_a^2 + sigma_b^2)/2` before converting back to a standard
/// deviation, which makes the midpoint law match the encoder's own output
/// scale when `a` and `b` agree.
pub fn midpoint_distribution(
    a: &DiagGaussian,
    b: &DiagGaussian,
    variance_doubling: bool,
) -> Result<DiagGaussian> {
    if a.dim() != b.dim() {
        return Err(Error::Shape {
            context: "midpoint_distribution operands",
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let scale = if variance_doubling { 0.5 } else { 0.25 };
    let mut mu = Vec::with_capacity(a.dim());
    let mut sigma = Vec::with_capacity(a.dim());
    for i in 0..a.dim() {
        mu.push(0.5 * (a.mu[i] + b.mu[i]));
        let var = scale * (a.sigma[i] * a.sigma[i] + b.sigma[i] * b.sigma[i]);
        sigma.push(var.sqrt());
    }
    DiagGaussian::new(mu, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn draw_standard(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn log_prob_standard_normal() {
        let d = DiagGaussian::standard(1);
        assert!((d.log_prob(&[0.0]).unwrap() - (-0.9189385332046727)).abs() < 1e-12);
        let d4 = DiagGaussian::standard(4);
        assert!((d4.log_prob(&[0.0; 4]).unwrap() - (-3.675754132818691)).abs() < 1e-12);
    }

    #[test]
    fn log_prob_scalar_case() {
        // -0.5 ln(2 pi * 4) - 4 / 8
        let d = DiagGaussian::new(vec![1.0], vec![2.0]).unwrap();
        assert!((d.log_prob(&[3.0]).unwrap() - (-2.1120857137646178)).abs() < 1e-12);
    }

    #[test]
    fn log_prob_dimension_mismatch() {
        let d = DiagGaussian::standard(2);
        assert!(d.log_prob(&[0.0]).is_err());
    }

    #[test]
    fn kl_identity_is_zero() {
        let q = DiagGaussian::new(vec![0.3, -1.0], vec![0.7, 2.0]).unwrap();
        assert_eq!(kl_divergence(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn kl_known_values() {
        let q = DiagGaussian::new(vec![1.0], vec![1.0]).unwrap();
        let p = DiagGaussian::standard(1);
        assert!((kl_divergence(&q, &p).unwrap() - 0.5).abs() < 1e-12);

        let q = DiagGaussian::new(vec![0.0], vec![0.5]).unwrap();
        let expected = (1.0f64 / 0.5).ln() + (0.25 - 1.0) / 2.0;
        assert!((kl_divergence(&q, &p).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.3181471805599453).abs() < 1e-12);
    }

    #[test]
    fn kl_matches_monte_carlo() {
        // MC estimate of E_q[log q - log p] within 3 standard errors.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let q = DiagGaussian::new(vec![0.4, -0.8], vec![0.6, 1.7]).unwrap();
        let p = DiagGaussian::new(vec![-0.2, 0.5], vec![1.2, 0.4]).unwrap();
        let analytic = kl_divergence(&q, &p).unwrap();

        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let noise = draw_standard(&mut rng, 2);
            let x = q.reparam_sample(&noise);
            let s = q.log_prob(&x).unwrap() - p.log_prob(&x).unwrap();
            sum += s;
            sum_sq += s * s;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - analytic).abs() < 3.0 * se,
            "analytic {analytic}, mc {mean}, se {se}"
        );
    }

    #[test]
    fn reparam_sample_identities() {
        let d = DiagGaussian::new(vec![2.0, -1.0], vec![3.0, 0.5]).unwrap();
        assert_eq!(d.reparam_sample(&[0.0, 0.0]), vec![2.0, -1.0]);
        let std = DiagGaussian::standard(2);
        assert_eq!(std.reparam_sample(&[0.7, -0.3]), vec![0.7, -0.3]);
    }

    #[test]
    fn reparam_sample_empirical_mean() {
        let d = DiagGaussian::new(vec![2.0], vec![3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| d.reparam_sample(&draw_standard(&mut rng, 1))[0])
            .sum::<f64>()
            / n as f64;
        let tol = 3.0 * 3.0 / (n as f64).sqrt();
        assert!((mean - 2.0).abs() < tol, "mean {mean}");
    }

    #[test]
    fn midpoint_known_values() {
        let std = DiagGaussian::standard(1);
        let plain = midpoint_distribution(&std, &std, false).unwrap();
        assert!((plain.sigma[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(plain.mu[0], 0.0);

        let doubled = midpoint_distribution(&std, &std, true).unwrap();
        assert!((doubled.sigma[0] - 1.0).abs() < 1e-15);

        let a = DiagGaussian::new(vec![2.0], vec![1.0]).unwrap();
        let b = DiagGaussian::new(vec![4.0], vec![1.0]).unwrap();
        assert_eq!(midpoint_distribution(&a, &b, false).unwrap().mu[0], 3.0);
    }

    #[test]
    fn midpoint_matches_paired_sample_average() {
        // Empirical mean/variance of (sample(a) + sample(b)) / 2 against the
        // uncorrected midpoint law, within 4 standard errors per dimension.
        let a = DiagGaussian::new(vec![1.0, -2.0], vec![0.8, 1.5]).unwrap();
        let b = DiagGaussian::new(vec![-0.5, 3.0], vec![2.0, 0.4]).unwrap();
        let mid = midpoint_distribution(&a, &b, false).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut sum = [0.0; 2];
        let mut sum_sq = [0.0; 2];
        for _ in 0..n {
            let xa = a.reparam_sample(&draw_standard(&mut rng, 2));
            let xb = b.reparam_sample(&draw_standard(&mut rng, 2));
            for i in 0..2 {
                let m = 0.5 * (xa[i] + xb[i]);
                sum[i] += m;
                sum_sq[i] += m * m;
            }
        }
        for i in 0..2 {
            let mean = sum[i] / n as f64;
            let var = sum_sq[i] / n as f64 - mean * mean;
            let true_var = mid.sigma[i] * mid.sigma[i];
            let se_mean = mid.sigma[i] / (n as f64).sqrt();
            let se_var = true_var * (2.0 / (n as f64 - 1.0)).sqrt();
            assert!(
                (mean - mid.mu[i]).abs() < 4.0 * se_mean,
                "dim {i}: mean {mean} vs {}",
                mid.mu[i]
            );
            assert!(
                (var - true_var).abs() < 4.0 * se_var,
                "dim {i}: var {var} vs {true_var}"
            );
        }
    }

    #[test]
    fn invalid_sigma_rejected() {
        assert!(DiagGaussian::new(vec![0.0], vec![0.0]).is_err());
        assert!(DiagGaussian::new(vec![0.0], vec![-1.0]).is_err());
        assert!(DiagGaussian::new(vec![0.0], vec![f64::NAN]).is_err());
        assert!(DiagGaussian::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_zero_on_identity(
            mu1 in proptest::collection::vec(-3.0f64..3.0, 1..5),
            s1 in proptest::collection::vec(0.3f64..3.0, 1..5),
            mu2 in proptest::collection::vec(-3.0f64..3.0, 1..5),
            s2 in proptest::collection::vec(0.3f64..3.0, 1..5),
        ) {
            let k = mu1.len().min(s1.len()).min(mu2.len()).min(s2.len());
            let q = DiagGaussian::new(mu1[..k].to_vec(), s1[..k].to_vec()).unwrap();
            let p = DiagGaussian::new(mu2[..k].to_vec(), s2[..k].to_vec()).unwrap();
            prop_assert!(kl_divergence(&q, &p).unwrap() >= -1e-12);
            prop_assert!(kl_divergence(&q, &q).unwrap().abs() <= 1e-12);
        }
    }
}
