//! Elman network: a sigmoid hidden layer whose previous activations feed back
//! through recurrent weights, `h_t = σ(W_x·x_t + W_h·h_{t−1} + b)`, with the
//! output read from the final hidden state.
//!
//! A patient record is not a sequence, so two views are offered. In
//! single-step mode the whole feature vector is one step and the context starts
//! at `c₀` (0.5 per unit by default, which keeps `W_h` trainable: with `c₀ = 0`
//! its gradient is identically zero). In feature-sequence mode each feature is
//! one step of width 1.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ffnn::FfnnModel;
use crate::error::{Error, Result};
use crate::nn::{glorot_limit, mse_grad, mse_loss, sigmoid, LayerParams, Matrix, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceMode {
    #[default]
    SingleStep,
    FeatureSequence,
}

impl FromStr for SequenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-step" => Ok(SequenceMode::SingleStep),
            "feature-sequence" => Ok(SequenceMode::FeatureSequence),
            other => Err(Error::InvalidConfig(format!("unknown Elman mode `{other}`"))),
        }
    }
}

pub const DEFAULT_CONTEXT_INIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ElmanModel {
    /// `W_x` (H × step width) and `b`.
    pub input: LayerParams,
    /// `W_h` (H × H).
    pub recurrent: Matrix,
    pub output: LayerParams,
    /// `c₀`, restored before every independent sample.
    pub context_init: Vec<f64>,
    pub mode: SequenceMode,
    features: usize,
}

/// Hidden states `h_0 = c₀, h_1, …, h_T` and the output of one pass.
#[derive(Debug, Clone)]
pub struct ElmanTrace {
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ElmanModel {
    pub fn new(
        input: LayerParams,
        recurrent: Matrix,
        output: LayerParams,
        context_init: Vec<f64>,
        mode: SequenceMode,
        features: usize,
    ) -> Result<Self> {
        input.validate()?;
        output.validate()?;
        let h = input.out_dim();
        let step = match mode {
            SequenceMode::SingleStep => features,
            SequenceMode::FeatureSequence => 1,
        };
        let checks = [
            ("elman input step width", step, input.in_dim()),
            ("elman recurrent rows", h, recurrent.rows()),
            ("elman recurrent cols", h, recurrent.cols()),
            ("elman output layer input", h, output.in_dim()),
            ("elman context length", h, context_init.len()),
        ];
        for (context, expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found,
                });
            }
        }
        if features == 0 {
            return Err(Error::EmptyInput("elman feature count"));
        }
        Ok(ElmanModel {
            input,
            recurrent,
            output,
            context_init,
            mode,
            features,
        })
    }

    pub fn glorot(
        features: usize,
        hidden: usize,
        outputs: usize,
        mode: SequenceMode,
        context_init: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let step = match mode {
            SequenceMode::SingleStep => features,
            SequenceMode::FeatureSequence => 1,
        };
        let input = LayerParams::glorot(hidden, step, rng);
        let r = glorot_limit(hidden, hidden);
        let recurrent = Matrix::from_fn(hidden, hidden, |_, _| rng.gen_range(-r..=r));
        let output = LayerParams::glorot(outputs, hidden, rng);
        ElmanModel {
            input,
            recurrent,
            output,
            context_init: vec![context_init; hidden],
            mode,
            features,
        }
    }

    /// Single-step Elman sharing the FFNN's feed weights, with `W_h = 0`.
    pub fn from_ffnn(ffnn: &FfnnModel, context_init: f64) -> Self {
        let h = ffnn.hidden_width();
        ElmanModel {
            input: ffnn.hidden.clone(),
            recurrent: Matrix::zeros(h, h),
            output: ffnn.output.clone(),
            context_init: vec![context_init; h],
            mode: SequenceMode::SingleStep,
            features: ffnn.input_width(),
        }
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn hidden_width(&self) -> usize {
        self.input.out_dim()
    }

    fn steps<'a>(&self, x: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        if x.len() != self.features {
            return Err(Error::DimensionMismatch {
                context: "elman input",
                expected: self.features,
                found: x.len(),
            });
        }
        Ok(match self.mode {
            SequenceMode::SingleStep => vec![x],
            SequenceMode::FeatureSequence => x.chunks(1).collect(),
        })
    }

    pub fn trace(&self, x: &[f64]) -> Result<ElmanTrace> {
        let steps = self.steps(x)?;
        let mut hidden = Vec::with_capacity(steps.len() + 1);
        hidden.push(self.context_init.clone());
        for xt in steps {
            let prev = hidden.last().expect("context");
            let feed = self.input.weights.matvec(xt);
            let rec = self.recurrent.matvec(prev);
            let h: Vec<f64> = feed
                .iter()
                .zip(&rec)
                .zip(&self.input.biases)
                .map(|((a, r), b)| sigmoid(a + r + b))
                .collect();
            hidden.push(h);
        }
        let last = hidden.last().expect("hidden state");
        let output = self
            .output
            .weights
            .matvec(last)
            .iter()
            .zip(&self.output.biases)
            .map(|(z, b)| sigmoid(z + b))
            .collect();
        Ok(ElmanTrace { hidden, output })
    }

    fn write_grads(
        &self,
        d_input: &LayerParams,
        d_recurrent: &Matrix,
        d_output: &LayerParams,
    ) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        d_input.write_flat(&mut flat);
        flat.extend_from_slice(d_recurrent.as_slice());
        d_output.write_flat(&mut flat);
        flat
    }
}

/// Output for one sample, with the context reset to `c₀` first.
pub fn elman_forward(model: &ElmanModel, x: &[f64]) -> Result<Vec<f64>> {
    Ok(model.trace(x)?.output)
}

/// Backpropagation through time over the sample's steps. Returns the loss and
/// the flat gradient in parameter order (`W_x`, `b`, `W_h`, `W_o`, `b_o`).
pub fn elman_backward(model: &ElmanModel, x: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let steps = model.steps(x)?;
    let tr = model.trace(x)?;
    let loss = mse_loss(&tr.output, target)?;
    let dy = mse_grad(&tr.output, target)?;

    let mut d_output = LayerParams::zeros(model.output.out_dim(), model.output.in_dim());
    let dz: Vec<f64> = dy
        .iter()
        .zip(&tr.output)
        .map(|(g, y)| g * y * (1.0 - y))
        .collect();
    let t_last = tr.hidden.len() - 1;
    d_output.weights.add_outer(&dz, &tr.hidden[t_last]);
    d_output.biases.copy_from_slice(&dz);

    let mut d_input = LayerParams::zeros(model.input.out_dim(), model.input.in_dim());
    let mut d_recurrent = Matrix::zeros(model.recurrent.rows(), model.recurrent.cols());
    let mut dh = model.output.weights.matvec_t(&dz);
    for t in (1..=t_last).rev() {
        let h = &tr.hidden[t];
        let da: Vec<f64> = dh.iter().zip(h).map(|(g, s)| g * s * (1.0 - s)).collect();
        d_input.weights.add_outer(&da, steps[t - 1]);
        for (b, d) in d_input.biases.iter_mut().zip(&da) {
            *b += d;
        }
        d_recurrent.add_outer(&da, &tr.hidden[t - 1]);
        dh = model.recurrent.matvec_t(&da);
    }
    Ok((loss, model.write_grads(&d_input, &d_recurrent, &d_output)))
}

impl Network for ElmanModel {
    fn param_count(&self) -> usize {
        self.input.param_count() + self.recurrent.as_slice().len() + self.output.param_count()
    }

    fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        self.input.write_flat(&mut v);
        v.extend_from_slice(self.recurrent.as_slice());
        self.output.write_flat(&mut v);
        v
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "elman parameters",
                expected: self.param_count(),
                found: flat.len(),
            });
        }
        let rest = self.input.read_flat(flat);
        let nr = self.recurrent.as_slice().len();
        self.recurrent.as_mut_slice().copy_from_slice(&rest[..nr]);
        self.output.read_flat(&rest[nr..]);
        Ok(())
    }

    fn output_width(&self) -> usize {
        self.output.out_dim()
    }

    fn prepare(&self, features: &[Vec<f64>], _targets: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        for x in features {
            self.steps(x)?;
        }
        Ok(features.to_vec())
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        elman_forward(self, x)
    }

    fn loss_grad(&self, x: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        elman_backward(self, x, target)
    }
}
