use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{backward_stack, forward_stack, mse_grad, mse_loss, LayerParams, Network};

/// One sigmoid hidden layer followed by a sigmoid output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FfnnModel {
    pub hidden: LayerParams,
    pub output: LayerParams,
}

impl FfnnModel {
    pub fn new(hidden: LayerParams, output: LayerParams) -> Result<Self> {
        hidden.validate()?;
        output.validate()?;
        if output.in_dim() != hidden.out_dim() {
            return Err(Error::DimensionMismatch {
                context: "ffnn output layer input",
                expected: hidden.out_dim(),
                found: output.in_dim(),
            });
        }
        Ok(FfnnModel { hidden, output })
    }

    pub fn glorot(inputs: usize, hidden: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        FfnnModel {
            hidden: LayerParams::glorot(hidden, inputs, rng),
            output: LayerParams::glorot(outputs, hidden, rng),
        }
    }

    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        FfnnModel {
            hidden: LayerParams::zeros(hidden, inputs),
            output: LayerParams::zeros(outputs, hidden),
        }
    }

    pub fn input_width(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden.out_dim()
    }

    pub fn layer_refs(&self) -> [&LayerParams; 2] {
        [&self.hidden, &self.output]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::DimensionMismatch {
                context: "ffnn input",
                expected: self.input_width(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Composition of the two dense sigmoid layers on a normalized vector.
pub fn ffnn_forward(model: &FfnnModel, x: &[f64]) -> Result<Vec<f64>> {
    model.forward(x)
}

impl Network for FfnnModel {
    fn param_count(&self) -> usize {
        self.hidden.param_count() + self.output.param_count()
    }

    fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        self.hidden.write_flat(&mut v);
        self.output.write_flat(&mut v);
        v
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "ffnn parameters",
                expected: self.param_count(),
                found: flat.len(),
            });
        }
        let rest = self.hidden.read_flat(flat);
        self.output.read_flat(rest);
        Ok(())
    }

    fn output_width(&self) -> usize {
        self.output.out_dim()
    }

    fn prepare(&self, features: &[Vec<f64>], _targets: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        features.iter().try_for_each(|x| self.check_input(x))?;
        Ok(features.to_vec())
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut acts = forward_stack(&self.layer_refs(), x)?;
        Ok(acts.pop().expect("output activation"))
    }

    fn loss_grad(&self, x: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let layers = self.layer_refs();
        let acts = forward_stack(&layers, x)?;
        let out = acts.last().expect("output activation");
        let loss = mse_loss(out, target)?;
        let dy = mse_grad(out, target)?;
        let (grads, _) = backward_stack(&layers, &acts, &dy);
        let mut flat = Vec::with_capacity(self.param_count());
        grads.iter().for_each(|g| g.write_flat(&mut flat));
        Ok((loss, flat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_outputs_half() {
        let m = FfnnModel::zeros(9, 50, 1);
        assert_eq!(ffnn_forward(&m, &[0.3; 9]).unwrap(), vec![0.5]);
    }

    #[test]
    fn outputs_in_open_unit_interval_and_deterministic() {
        let m = FfnnModel::glorot(7, 10, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let x = [0.9, -0.2, 0.4, 1.0, -1.0, 0.0, 0.5];
        let a = ffnn_forward(&m, &x).unwrap();
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(a, ffnn_forward(&m, &x).unwrap());
        assert!(ffnn_forward(&m, &x[..6]).is_err());
    }

    #[test]
    fn params_round_trip() {
        let m = FfnnModel::glorot(3, 4, 2, &mut ChaCha8Rng::seed_from_u64(2));
        let mut z = FfnnModel::zeros(3, 4, 2);
        z.set_params(&m.params()).unwrap();
        assert_eq!(z, m);
        assert!(z.set_params(&[0.0; 3]).is_err());
    }
}
