use std::borrow::Borrow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::loss::{mse_grad, mse_loss};
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Weights (`out_dim × in_dim`) and biases (`out_dim`) of one dense sigmoid layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        LayerParams {
            weights: Matrix::zeros(out_dim, in_dim),
            biases: vec![0.0; out_dim],
        }
    }

    /// Uniform on `[-r, r]` with `r = √(6 / (fan_in + fan_out))`, weights and biases alike.
    pub fn glorot(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let r = glorot_limit(in_dim, out_dim);
        LayerParams {
            weights: Matrix::from_fn(out_dim, in_dim, |_, _| rng.gen_range(-r..=r)),
            biases: (0..out_dim).map(|_| rng.gen_range(-r..=r)).collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.biases.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.biases.len() != self.out_dim() {
            return Err(Error::DimensionMismatch {
                context: "layer biases",
                expected: self.out_dim(),
                found: self.biases.len(),
            });
        }
        if !self
            .weights
            .as_slice()
            .iter()
            .chain(&self.biases)
            .all(|v| v.is_finite())
        {
            return Err(Error::CorruptModel("non-finite layer parameter".into()));
        }
        Ok(())
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weights.as_slice());
        out.extend_from_slice(&self.biases);
    }

    /// Overwrites parameters from the front of `flat`, returning the unread tail.
    pub fn read_flat<'a>(&mut self, flat: &'a [f64]) -> &'a [f64] {
        let nw = self.weights.as_slice().len();
        let nb = self.biases.len();
        self.weights.as_mut_slice().copy_from_slice(&flat[..nw]);
        self.biases.copy_from_slice(&flat[nw..nw + nb]);
        &flat[nw + nb..]
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Returns `(W·x + b, σ(W·x + b))`.
pub fn forward_dense(layer: &LayerParams, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if input.len() != layer.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "dense layer input",
            expected: layer.in_dim(),
            found: input.len(),
        });
    }
    let mut pre = layer.weights.matvec(input);
    for (p, b) in pre.iter_mut().zip(&layer.biases) {
        *p += b;
    }
    let act = pre.iter().map(|&z| sigmoid(z)).collect();
    Ok((pre, act))
}

/// Runs a stack of sigmoid layers, returning every activation (input first).
pub fn forward_stack<L: Borrow<LayerParams>>(layers: &[L], input: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input.to_vec());
    for layer in layers {
        let (_, a) = forward_dense(layer.borrow(), acts.last().expect("non-empty"))?;
        acts.push(a);
    }
    Ok(acts)
}

/// Reverse pass through a sigmoid stack given `∂L/∂output`.
///
/// `acts` must come from [`forward_stack`]. Returns the layer gradients and
/// `∂L/∂input`.
pub fn backward_stack<L: Borrow<LayerParams>>(
    layers: &[L],
    acts: &[Vec<f64>],
    output_grad: &[f64],
) -> (Vec<LayerParams>, Vec<f64>) {
    let mut grads: Vec<LayerParams> = layers
        .iter()
        .map(|l| LayerParams::zeros(l.borrow().out_dim(), l.borrow().in_dim()))
        .collect();
    let mut upstream = output_grad.to_vec();
    for k in (0..layers.len()).rev() {
        let a = &acts[k + 1];
        let delta: Vec<f64> = upstream
            .iter()
            .zip(a)
            .map(|(g, s)| g * s * (1.0 - s))
            .collect();
        grads[k].weights.add_outer(&delta, &acts[k]);
        grads[k].biases.copy_from_slice(&delta);
        upstream = layers[k].borrow().weights.matvec_t(&delta);
    }
    (grads, upstream)
}

/// Loss and exact gradients of MSE through all sigmoid layers for one sample.
pub fn loss_and_gradients(
    network: &[LayerParams],
    input: &[f64],
    target: &[f64],
) -> Result<(f64, Vec<LayerParams>)> {
    let acts = forward_stack(network, input)?;
    let out = acts.last().expect("non-empty");
    let loss = mse_loss(out, target)?;
    let dy = mse_grad(out, target)?;
    let (grads, _) = backward_stack(network, &acts, &dy);
    Ok((loss, grads))
}

pub fn backprop(network: &[LayerParams], input: &[f64], target: &[f64]) -> Result<Vec<LayerParams>> {
    loss_and_gradients(network, input, target).map(|(_, g)| g)
}
