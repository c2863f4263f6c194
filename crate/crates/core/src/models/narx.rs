//! NARX network: a feedforward core whose input is the current feature vector
//! concatenated with `d_u` delayed feature vectors and `d_y` delayed outputs,
//!
//! ```text
//! y(t) = F(x_t, x_{t−1}, …, x_{t−d_u}, y_{t−1}, …, y_{t−d_y}) + ε_t
//! ```
//!
//! In per-record mode every delay tap is zero. In stream mode the records are
//! taken in order and the output taps carry the true past targets
//! (series-parallel, teacher forced). `ε` is reported as the residual
//! `target − prediction`; it is not modeled.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ffnn::FfnnModel;
use crate::error::{Error, Result};
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NarxMode {
    #[default]
    PerRecord,
    Stream,
}

impl FromStr for NarxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-record" => Ok(NarxMode::PerRecord),
            "stream" => Ok(NarxMode::Stream),
            other => Err(Error::InvalidConfig(format!("unknown NARX mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarxDelays {
    pub input_delays: usize,
    pub output_delays: usize,
}

impl Default for NarxDelays {
    fn default() -> Self {
        NarxDelays {
            input_delays: 1,
            output_delays: 1,
        }
    }
}

impl NarxDelays {
    pub fn validate(&self) -> Result<()> {
        if self.output_delays == 0 {
            return Err(Error::InvalidConfig("NARX output delay order must be at least 1".into()));
        }
        Ok(())
    }

    /// `F·(1 + d_u) + O·d_y`.
    pub fn effective_width(&self, features: usize, outputs: usize) -> usize {
        features * (1 + self.input_delays) + outputs * self.output_delays
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarxModel {
    pub core: FfnnModel,
    pub delays: NarxDelays,
    pub mode: NarxMode,
    features: usize,
}

impl NarxModel {
    pub fn new(core: FfnnModel, delays: NarxDelays, mode: NarxMode, features: usize) -> Result<Self> {
        delays.validate()?;
        let expected = delays.effective_width(features, core.output_width());
        if core.input_width() != expected {
            return Err(Error::DimensionMismatch {
                context: "narx effective input width",
                expected,
                found: core.input_width(),
            });
        }
        Ok(NarxModel {
            core,
            delays,
            mode,
            features,
        })
    }

    pub fn glorot(
        features: usize,
        hidden: usize,
        outputs: usize,
        delays: NarxDelays,
        mode: NarxMode,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        delays.validate()?;
        let width = delays.effective_width(features, outputs);
        Ok(NarxModel {
            core: FfnnModel::glorot(width, hidden, outputs, rng),
            delays,
            mode,
            features,
        })
    }

    pub fn features(&self) -> usize {
        self.features
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.features {
            return Err(Error::DimensionMismatch {
                context: "narx features",
                expected: self.features,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Current features followed by zeroed delay taps.
    pub fn per_record_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut v = x.to_vec();
        v.resize(self.core.input_width(), 0.0);
        Ok(v)
    }

    /// Teacher-forced tapped inputs for an ordered stream. Taps before the
    /// start of the stream are zero.
    pub fn stream_inputs(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                context: "narx stream targets",
                expected: xs.len(),
                found: ys.len(),
            });
        }
        let o = self.core.output_width();
        let mut out = Vec::with_capacity(xs.len());
        for t in 0..xs.len() {
            self.check(&xs[t])?;
            let mut v = Vec::with_capacity(self.core.input_width());
            v.extend_from_slice(&xs[t]);
            for k in 1..=self.delays.input_delays {
                match t.checked_sub(k) {
                    Some(s) => v.extend_from_slice(&xs[s]),
                    None => v.extend(std::iter::repeat_n(0.0, self.features)),
                }
            }
            for k in 1..=self.delays.output_delays {
                match t.checked_sub(k) {
                    Some(s) => {
                        if ys[s].len() != o {
                            return Err(Error::DimensionMismatch {
                                context: "narx output tap",
                                expected: o,
                                found: ys[s].len(),
                            });
                        }
                        v.extend_from_slice(&ys[s]);
                    }
                    None => v.extend(std::iter::repeat_n(0.0, o)),
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Residuals `ε = target − prediction` per sample.
    pub fn residuals(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Vec<Vec<f64>> {
        predictions
            .iter()
            .zip(targets)
            .map(|(p, t)| t.iter().zip(p).map(|(a, b)| a - b).collect())
            .collect()
    }
}

/// Outputs for a batch of records in the model's mode. Stream mode needs the
/// targets for its output taps.
pub fn narx_forward(
    model: &NarxModel,
    xs: &[Vec<f64>],
    targets: Option<&[Vec<f64>]>,
) -> Result<Vec<Vec<f64>>> {
    let inputs = model.prepare(xs, targets)?;
    inputs.iter().map(|x| model.core.forward(x)).collect()
}

impl Network for NarxModel {
    fn param_count(&self) -> usize {
        self.core.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.core.params()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        self.core.set_params(flat)
    }

    fn output_width(&self) -> usize {
        self.core.output_width()
    }

    fn prepare(&self, features: &[Vec<f64>], targets: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        match self.mode {
            NarxMode::PerRecord => features.iter().map(|x| self.per_record_input(x)).collect(),
            NarxMode::Stream => {
                let ys = targets.ok_or_else(|| {
                    Error::Contract("NARX stream mode needs labeled records for its output taps".into())
                })?;
                self.stream_inputs(features, ys)
            }
        }
    }

    /// `x` is an already tapped input of the effective width.
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.core.forward(x)
    }

    fn loss_grad(&self, x: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.core.loss_grad(x, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ffnn::ffnn_forward;
    use crate::nn::LayerParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn per_record_equals_ffnn_with_zero_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let delays = NarxDelays {
            input_delays: 0,
            output_delays: 1,
        };
        let m = NarxModel::glorot(4, 6, 1, delays, NarxMode::PerRecord, &mut rng).unwrap();
        assert_eq!(m.core.input_width(), 5);
        let x = vec![0.2, -0.4, 0.6, 0.1];
        let mut padded = x.clone();
        padded.push(0.0);
        let a = narx_forward(&m, &[x], None).unwrap();
        let b = ffnn_forward(&m.core, &padded).unwrap();
        assert_eq!(a[0], b);
    }

    #[test]
    fn stream_taps_are_previous_targets() {
        let core = FfnnModel::new(LayerParams::zeros(2, 3 * 2 + 2), LayerParams::zeros(2, 2)).unwrap();
        let m = NarxModel::new(
            core,
            NarxDelays {
                input_delays: 1,
                output_delays: 1,
            },
            NarxMode::Stream,
            3,
        )
        .unwrap();
        let xs = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let ys = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let inputs = m.stream_inputs(&xs, &ys).unwrap();
        assert_eq!(inputs[0], vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(inputs[2], vec![7.0, 8.0, 9.0, 4.0, 5.0, 6.0, 0.0, 1.0]);
    }

    #[test]
    fn stream_without_labels_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = NarxModel::glorot(2, 3, 1, NarxDelays::default(), NarxMode::Stream, &mut rng).unwrap();
        assert!(matches!(narx_forward(&m, &[vec![0.0, 0.0]], None), Err(Error::Contract(_))));
    }

    #[test]
    fn residuals_are_target_minus_prediction() {
        let r = NarxModel::residuals(&[vec![0.25, 0.5]], &[vec![1.0, 0.0]]);
        assert_eq!(r, vec![vec![0.75, -0.5]]);
    }

    #[test]
    fn zero_output_delay_rejected() {
        let d = NarxDelays {
            input_delays: 0,
            output_delays: 0,
        };
        assert!(NarxModel::glorot(2, 3, 1, d, NarxMode::PerRecord, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
