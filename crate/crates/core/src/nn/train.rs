use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::Momentum;
use crate::error::{Error, Result};

/// A trainable model over a flat parameter vector.
///
/// `prepare` turns an ordered batch of normalized feature vectors into the
/// per-sample inputs the network consumes. For most models that is the
/// identity; delay-line models use it to attach their taps, which is why it
/// may need the targets.
pub trait Network {
    fn param_count(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, flat: &[f64]) -> Result<()>;
    fn output_width(&self) -> usize;
    fn prepare(&self, features: &[Vec<f64>], targets: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>>;
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>>;
    fn loss_grad(&self, input: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Mean loss and mean gradient over a batch of prepared inputs.
    fn batch_loss_grad(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("training batch"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                context: "batch targets",
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        let mut total = 0.0;
        let mut grad = vec![0.0; self.param_count()];
        for (x, t) in inputs.iter().zip(targets) {
            let (l, g) = self.loss_grad(x, t)?;
            total += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let n = inputs.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((total / n, grad))
    }

    fn batch_loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("evaluation batch"));
        }
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            total += super::loss::mse_loss(&self.forward(x)?, t)?;
        }
        Ok(total / inputs.len() as f64)
    }
}

/// Normalized feature vectors paired with training targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Samples {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    #[default]
    FullBatch,
    PerSample,
}

impl FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-batch" => Ok(UpdateMode::FullBatch),
            "per-sample" => Ok(UpdateMode::PerSample),
            other => Err(Error::InvalidConfig(format!("unknown update mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub update_mode: UpdateMode,
    pub hidden_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 1000,
            update_mode: UpdateMode::FullBatch,
            hidden_size: 50,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.hidden_size == 0 {
            return bad("hidden size must be at least 1".into());
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-epoch losses. In full-batch mode the training entry is the loss at the
/// parameters used for that epoch's gradient; in per-sample mode it is the mean
/// of the per-sample losses seen during the epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub train: Vec<f64>,
    pub validation: Option<Vec<f64>>,
}

impl LossCurve {
    pub fn epochs(&self) -> usize {
        self.train.len()
    }

    /// `epoch,train_loss[,val_loss]`, epochs numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match &self.validation {
            Some(val) => {
                s.push_str("epoch,train_loss,val_loss\n");
                for (i, (t, v)) in self.train.iter().zip(val).enumerate() {
                    let _ = writeln!(s, "{},{:?},{:?}", i + 1, t, v);
                }
            }
            None => {
                s.push_str("epoch,train_loss\n");
                for (i, t) in self.train.iter().enumerate() {
                    let _ = writeln!(s, "{},{:?}", i + 1, t);
                }
            }
        }
        s
    }
}

/// Mixes a base seed with a stream id so independent consumers never share a sequence.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SHUFFLE_STREAM: u64 = 2;

/// Gradient descent with momentum for `config.epochs` epochs, or fewer under patience.
///
/// With patience set, the parameters with the best validation loss are restored
/// at the end.
pub fn train_loop<N: Network>(
    network: &mut N,
    train: &Samples,
    validation: Option<&Samples>,
    config: &TrainConfig,
) -> Result<LossCurve> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training data"));
    }
    if train.inputs.len() != train.targets.len() {
        return Err(Error::DimensionMismatch {
            context: "training targets",
            expected: train.inputs.len(),
            found: train.targets.len(),
        });
    }
    let inputs = network.prepare(&train.inputs, Some(&train.targets))?;
    let val_inputs = match validation {
        Some(v) if !v.is_empty() => Some((network.prepare(&v.inputs, Some(&v.targets))?, &v.targets)),
        _ => None,
    };

    let mut params = network.params();
    let mut optimizer = Momentum::new(params.len(), config.learning_rate, config.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    let mut curve = LossCurve {
        train: Vec::with_capacity(config.epochs),
        validation: val_inputs.as_ref().map(|_| Vec::with_capacity(config.epochs)),
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0usize;

    for epoch in 1..=config.epochs {
        let epoch_loss = match config.update_mode {
            UpdateMode::FullBatch => {
                let (loss, grad) = network.batch_loss_grad(&inputs, &train.targets)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch });
                }
                optimizer.step(&mut params, &grad)?;
                network.set_params(&params)?;
                loss
            }
            UpdateMode::PerSample => {
                order.shuffle(&mut rng);
                let mut total = 0.0;
                for &i in &order {
                    let (loss, grad) = network.loss_grad(&inputs[i], &train.targets[i])?;
                    if !loss.is_finite() {
                        return Err(Error::NonFiniteLoss { epoch });
                    }
                    total += loss;
                    optimizer.step(&mut params, &grad)?;
                    network.set_params(&params)?;
                }
                total / inputs.len() as f64
            }
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        curve.train.push(epoch_loss);

        if let Some((vx, vt)) = &val_inputs {
            let vloss = network.batch_loss(vx, vt)?;
            if !vloss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            curve.validation.as_mut().expect("validation curve").push(vloss);
            if let Some(patience) = config.patience {
                match &best {
                    Some((b, _)) if vloss >= *b => {
                        stale += 1;
                        if stale >= patience {
                            break;
                        }
                    }
                    _ => {
                        best = Some((vloss, params.clone()));
                        stale = 0;
                    }
                }
            }
        }
    }
    if let Some((_, p)) = best {
        network.set_params(&p)?;
    }
    Ok(curve)
}
