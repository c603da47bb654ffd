//! Minimal fully connected network substrate.
//!
//! A [`Mlp`] is a stack of tanh hidden layers followed by two output heads:
//! a linear `mu` head and a `sigma` head kept strictly positive by
//! [`sigma_activation`]. Parameters live in one flat `Vec<f64>` so the Adam
//! optimizer, finite-difference checks, and checkpointing all operate on a
//! single buffer. Gradients are computed by hand-rolled reverse mode against
//! an activation [`Tape`] recorded during the forward pass.

mod adam;
pub mod gradcheck;

pub use adam::AdamState;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Positive activation for standard-deviation heads.
///
/// `x + 1` for `x >= 0`, `exp(x)` otherwise. Both branches meet at `(0, 1)`
/// with slope 1, so the function is C1 everywhere and its range is `(0, inf)`.
#[inline]
pub fn sigma_activation(x: f64) -> f64 {
    if x >= 0.0 {
        x + 1.0
    } else {
        x.exp()
    }
}

/// Derivative of [`sigma_activation`].
#[inline]
pub fn sigma_activation_deriv(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Shape of an [`Mlp`]: input width, tanh hidden widths, and the width of
/// each output head (`mu` and `sigma` are always the same width).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub head_dim: usize,
}

impl MlpShape {
    pub fn new(input_dim: usize, hidden: &[usize], head_dim: usize) -> Self {
        assert!(input_dim > 0 && head_dim > 0, "dims must be positive");
        assert!(hidden.iter().all(|&h| h > 0), "hidden widths must be positive");
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            head_dim,
        }
    }

    /// Width of the vector feeding the output heads.
    pub fn last_hidden(&self) -> usize {
        self.hidden.last().copied().unwrap_or(self.input_dim)
    }

    /// Total number of parameters in the flat layout:
    /// hidden layers (weights then bias, in order), mu head, sigma head.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        let mut fan_in = self.input_dim;
        for &h in &self.hidden {
            n += fan_in * h + h;
            fan_in = h;
        }
        n + 2 * (fan_in * self.head_dim + self.head_dim)
    }

    /// Per-layer `(weight_offset, bias_offset, in_dim, out_dim)` entries for
    /// the hidden stack followed by the mu and sigma heads.
    fn layer_offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.hidden.len() + 2);
        let mut off = 0;
        let mut fan_in = self.input_dim;
        for &h in &self.hidden {
            out.push((off, off + fan_in * h, fan_in, h));
            off += fan_in * h + h;
            fan_in = h;
        }
        for _ in 0..2 {
            out.push((off, off + fan_in * self.head_dim, fan_in, self.head_dim));
            off += fan_in * self.head_dim + self.head_dim;
        }
        out
    }
}

/// Fully connected network with flat parameter storage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    pub shape: MlpShape,
    pub params: Vec<f64>,
}

/// Activation record from [`Mlp::forward`], consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    input: Vec<f64>,
    hidden: Vec<Vec<f64>>,
    sigma_pre: Vec<f64>,
}

impl Mlp {
    /// Initialize with weights uniform in `±sqrt(6 / (fan_in + fan_out))`
    /// and zero biases.
    pub fn init(shape: MlpShape, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; shape.param_count()];
        for (w_off, b_off, fan_in, fan_out) in shape.layer_offsets() {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut params[w_off..b_off] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Self { shape, params }
    }

    /// Zero-initialized network (useful in tests).
    pub fn zeros(shape: MlpShape) -> Self {
        let params = vec![0.0; shape.param_count()];
        Self { shape, params }
    }

    /// Zero gradient buffer matching this network's flat layout.
    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    /// Forward pass: returns the linear `mu` head, the positive `sigma`
    /// head, and the activation tape required for [`Mlp::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Tape)> {
        if input.len() != self.shape.input_dim {
            return Err(Error::Shape {
                context: "mlp input (layer 0)",
                expected: self.shape.input_dim,
                actual: input.len(),
            });
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mlp input".into()));
        }

        let mut hidden_outs: Vec<Vec<f64>> = Vec::with_capacity(self.shape.hidden.len());
        let mut off = 0;
        let mut fan_in = self.shape.input_dim;
        for &h in &self.shape.hidden {
            let w = &self.params[off..off + fan_in * h];
            let b = &self.params[off + fan_in * h..off + fan_in * h + h];
            let x: &[f64] = hidden_outs.last().map_or(input, |v| v.as_slice());
            let mut y = vec![0.0; h];
            matvec(w, b, x, &mut y);
            for v in &mut y {
                *v = v.tanh();
            }
            hidden_outs.push(y);
            off += fan_in * h + h;
            fan_in = h;
        }

        let h_last: &[f64] = hidden_outs.last().map_or(input, |v| v.as_slice());
        let head = self.shape.head_dim;

        let mut mu = vec![0.0; head];
        let w = &self.params[off..off + fan_in * head];
        let b = &self.params[off + fan_in * head..off + fan_in * head + head];
        matvec(w, b, h_last, &mut mu);
        off += fan_in * head + head;

        let mut sigma_pre = vec![0.0; head];
        let w = &self.params[off..off + fan_in * head];
        let b = &self.params[off + fan_in * head..off + fan_in * head + head];
        matvec(w, b, h_last, &mut sigma_pre);

        let sigma = sigma_pre.iter().map(|&x| sigma_activation(x)).collect();

        Ok((
            mu,
            sigma,
            Tape {
                input: input.to_vec(),
                hidden: hidden_outs,
                sigma_pre,
            },
        ))
    }

    /// Reverse pass: given head gradients `dL/d_mu` and `dL/d_sigma`, returns
    /// the flat parameter gradient and `dL/d_input`.
    pub fn backward(
        &self,
        tape: &Tape,
        grad_mu: &[f64],
        grad_sigma: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grads = self.zero_grads();
        let d_input = self.backward_into(tape, grad_mu, grad_sigma, &mut grads)?;
        Ok((grads, d_input))
    }

    /// As [`Mlp::backward`] but accumulates into an existing flat gradient
    /// buffer, so callers can sum per-sample gradients without reallocating.
    pub fn backward_into(
        &self,
        tape: &Tape,
        grad_mu: &[f64],
        grad_sigma: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        self.check_tape(tape)?;
        let head = self.shape.head_dim;
        if grad_mu.len() != head || grad_sigma.len() != head {
            return Err(Error::Shape {
                context: "mlp head gradient",
                expected: head,
                actual: if grad_mu.len() != head {
                    grad_mu.len()
                } else {
                    grad_sigma.len()
                },
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape {
                context: "mlp gradient buffer",
                expected: self.params.len(),
                actual: grads.len(),
            });
        }

        let offsets = self.shape.layer_offsets();
        let n_hidden = self.shape.hidden.len();
        let h_last: &[f64] = tape.hidden.last().map_or(&tape.input, |v| v.as_slice());

        // Sigma head: chain through the activation first.
        let d_sigma_pre: Vec<f64> = grad_sigma
            .iter()
            .zip(&tape.sigma_pre)
            .map(|(&g, &pre)| g * sigma_activation_deriv(pre))
            .collect();

        let mut d_hidden = vec![0.0; h_last.len()];
        let (w_off, b_off, fan_in, _) = offsets[n_hidden];
        accumulate_layer(
            &self.params[w_off..b_off],
            grad_mu,
            h_last,
            &mut grads[w_off..b_off + head],
            Some(&mut d_hidden),
            fan_in,
        );
        let (w_off, b_off, fan_in, _) = offsets[n_hidden + 1];
        accumulate_layer(
            &self.params[w_off..b_off],
            &d_sigma_pre,
            h_last,
            &mut grads[w_off..b_off + head],
            Some(&mut d_hidden),
            fan_in,
        );

        // Hidden stack, last to first.
        let mut d_out = d_hidden;
        for k in (0..n_hidden).rev() {
            let (w_off, b_off, fan_in, out_dim) = offsets[k];
            let y = &tape.hidden[k];
            // tanh' from the recorded output: 1 - y^2.
            let d_pre: Vec<f64> = d_out
                .iter()
                .zip(y)
                .map(|(&g, &yv)| g * (1.0 - yv * yv))
                .collect();
            let x: &[f64] = if k == 0 {
                &tape.input
            } else {
                &tape.hidden[k - 1]
            };
            let mut d_x = vec![0.0; fan_in];
            accumulate_layer(
                &self.params[w_off..b_off],
                &d_pre,
                x,
                &mut grads[w_off..b_off + out_dim],
                Some(&mut d_x),
                fan_in,
            );
            d_out = d_x;
        }

        Ok(d_out)
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.input.len() != self.shape.input_dim {
            return Err(Error::Shape {
                context: "tape input (layer 0)",
                expected: self.shape.input_dim,
                actual: tape.input.len(),
            });
        }
        if tape.hidden.len() != self.shape.hidden.len() {
            return Err(Error::Shape {
                context: "tape hidden layer count",
                expected: self.shape.hidden.len(),
                actual: tape.hidden.len(),
            });
        }
        for (k, (rec, &want)) in tape.hidden.iter().zip(&self.shape.hidden).enumerate() {
            if rec.len() != want {
                return Err(Error::Shape {
                    context: if k == 0 { "tape hidden layer 0" } else { "tape hidden layer" },
                    expected: want,
                    actual: rec.len(),
                });
            }
        }
        if tape.sigma_pre.len() != self.shape.head_dim {
            return Err(Error::Shape {
                context: "tape sigma head",
                expected: self.shape.head_dim,
                actual: tape.sigma_pre.len(),
            });
        }
        Ok(())
    }
}

/// `y = W x + b` with `W` row-major `(out, in)`.
#[inline]
fn matvec(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let n_in = x.len();
    for (j, yj) in y.iter_mut().enumerate() {
        let row = &w[j * n_in..(j + 1) * n_in];
        let mut acc = b[j];
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        *yj = acc;
    }
}

/// Accumulate one dense layer's parameter gradients and (optionally) the
/// gradient w.r.t. its input. `grads` covers the layer's weights then bias.
#[inline]
fn accumulate_layer(
    w: &[f64],
    d_pre: &[f64],
    x: &[f64],
    grads: &mut [f64],
    d_x: Option<&mut Vec<f64>>,
    fan_in: usize,
) {
    let w_len = d_pre.len() * fan_in;
    let (gw, gb) = grads.split_at_mut(w_len);
    for (j, &g) in d_pre.iter().enumerate() {
        gb[j] += g;
        let grow = &mut gw[j * fan_in..(j + 1) * fan_in];
        for (gi, xi) in grow.iter_mut().zip(x) {
            *gi += g * xi;
        }
    }
    if let Some(d_x) = d_x {
        for (j, &g) in d_pre.iter().enumerate() {
            let row = &w[j * fan_in..(j + 1) * fan_in];
            for (di, wi) in d_x.iter_mut().zip(row) {
                *di += g * wi;
            }
        }
    }
}
