//! The three network families, output encodings and the model file.

mod elman;
mod encoding;
mod ffnn;
mod file;
mod narx;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use elman::{elman_backward, elman_forward, ElmanModel, ElmanTrace, SequenceMode, DEFAULT_CONTEXT_INIT};
pub use encoding::{argmax, nearest_band, OutputEncoding, BAND_CENTERS};
pub use ffnn::{ffnn_forward, FfnnModel};
pub use file::{load_model, save_model, TrainMeta, TrainedModel, FORMAT_VERSION};
pub use narx::{narx_forward, NarxDelays, NarxMode, NarxModel};

use crate::error::{Error, Result};
use crate::nn::{derive_seed, Network};

const INIT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ffnn,
    Elman,
    Narx,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Ffnn, Family::Elman, Family::Narx];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ffnn => "ffnn",
            Family::Elman => "elman",
            Family::Narx => "narx",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Family::Ffnn => "FFNN",
            Family::Elman => "Elman",
            Family::Narx => "NARX",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ffnn" => Ok(Family::Ffnn),
            "elman" => Ok(Family::Elman),
            "narx" => Ok(Family::Narx),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }
}

/// Architecture choices for a fresh network. Options for other families are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub family: Family,
    pub hidden: usize,
    pub elman_mode: SequenceMode,
    pub context_init: f64,
    pub narx_mode: NarxMode,
    pub narx_delays: NarxDelays,
}

impl ArchConfig {
    pub fn new(family: Family, hidden: usize) -> Self {
        ArchConfig {
            family,
            hidden,
            elman_mode: SequenceMode::default(),
            context_init: DEFAULT_CONTEXT_INIT,
            narx_mode: NarxMode::default(),
            narx_delays: NarxDelays::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkModel {
    Ffnn(FfnnModel),
    Elman(ElmanModel),
    Narx(NarxModel),
}

impl NetworkModel {
    /// Glorot-initialized network for `features` inputs and `outputs` outputs.
    pub fn init(arch: &ArchConfig, features: usize, outputs: usize, seed: u64) -> Result<Self> {
        if arch.hidden == 0 || features == 0 || outputs == 0 {
            return Err(Error::InvalidConfig("network widths must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INIT_STREAM));
        Ok(match arch.family {
            Family::Ffnn => NetworkModel::Ffnn(FfnnModel::glorot(features, arch.hidden, outputs, &mut rng)),
            Family::Elman => NetworkModel::Elman(ElmanModel::glorot(
                features,
                arch.hidden,
                outputs,
                arch.elman_mode,
                arch.context_init,
                &mut rng,
            )),
            Family::Narx => NetworkModel::Narx(NarxModel::glorot(
                features,
                arch.hidden,
                outputs,
                arch.narx_delays,
                arch.narx_mode,
                &mut rng,
            )?),
        })
    }

    pub fn family(&self) -> Family {
        match self {
            NetworkModel::Ffnn(_) => Family::Ffnn,
            NetworkModel::Elman(_) => Family::Elman,
            NetworkModel::Narx(_) => Family::Narx,
        }
    }

    pub fn hidden_width(&self) -> usize {
        match self {
            NetworkModel::Ffnn(m) => m.hidden_width(),
            NetworkModel::Elman(m) => m.hidden_width(),
            NetworkModel::Narx(m) => m.core.hidden_width(),
        }
    }

    /// Width of the feature vector the network expects before any delay taps.
    pub fn feature_width(&self) -> usize {
        match self {
            NetworkModel::Ffnn(m) => m.input_width(),
            NetworkModel::Elman(m) => m.features(),
            NetworkModel::Narx(m) => m.features(),
        }
    }

    /// Whether prediction needs the true targets of the batch (NARX stream mode).
    pub fn needs_targets(&self) -> bool {
        matches!(self, NetworkModel::Narx(m) if m.mode == NarxMode::Stream)
    }

    fn inner(&self) -> &dyn Network {
        match self {
            NetworkModel::Ffnn(m) => m,
            NetworkModel::Elman(m) => m,
            NetworkModel::Narx(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Network {
        match self {
            NetworkModel::Ffnn(m) => m,
            NetworkModel::Elman(m) => m,
            NetworkModel::Narx(m) => m,
        }
    }
}

impl Network for NetworkModel {
    fn param_count(&self) -> usize {
        self.inner().param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.inner().params()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        self.inner_mut().set_params(flat)
    }

    fn output_width(&self) -> usize {
        self.inner().output_width()
    }

    fn prepare(&self, features: &[Vec<f64>], targets: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
        self.inner().prepare(features, targets)
    }

    fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.inner().forward(input)
    }

    fn loss_grad(&self, input: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.inner().loss_grad(input, target)
    }
}
