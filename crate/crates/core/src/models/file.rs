//! Versioned JSON model file.
//!
//! ```text
//! {version, family, feature_spec, output_encoding, normalizer,
//!  layers[], recurrent{}, delays{}, train_meta{}}
//! ```
//!
//! Sections that do not apply to a family are written as `{}`. Floats are
//! written in the shortest form that parses back to the same `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::elman::{ElmanModel, SequenceMode};
use super::encoding::OutputEncoding;
use super::ffnn::FfnnModel;
use super::narx::{NarxDelays, NarxMode, NarxModel};
use super::{Family, NetworkModel};
use crate::data::{AnemiaLabel, CbcRecord};
use crate::error::{Error, Result};
use crate::nn::{LayerParams, Matrix, Network, TrainConfig};
use crate::preprocess::{FeatureSpec, Normalizer};

pub const FORMAT_VERSION: &str = "1.0";
const SUPPORTED_MAJOR: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub config: TrainConfig,
    pub epochs_run: usize,
    pub final_loss: Option<f64>,
    /// Normalizer fitted on train and test together rather than train alone.
    #[serde(default)]
    pub joint_scaling: bool,
}

/// A trained network with everything needed to apply it to raw records.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: NetworkModel,
    pub feature_spec: FeatureSpec,
    pub encoding: OutputEncoding,
    pub normalizer: Normalizer,
    pub meta: TrainMeta,
}

impl TrainedModel {
    pub fn new(
        network: NetworkModel,
        feature_spec: FeatureSpec,
        encoding: OutputEncoding,
        normalizer: Normalizer,
        meta: TrainMeta,
    ) -> Result<Self> {
        let m = TrainedModel {
            network,
            feature_spec,
            encoding,
            normalizer,
            meta,
        };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        let f = self.feature_spec.len();
        let checks = [
            ("normalizer width", f, self.normalizer.width()),
            ("network feature width", f, self.network.feature_width()),
            ("network output width", self.encoding.width(), self.network.output_width()),
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
        Ok(())
    }

    pub fn family(&self) -> Family {
        self.network.family()
    }

    /// Encoded and normalized feature vectors.
    pub fn features_of(&self, records: &[CbcRecord]) -> Result<Vec<Vec<f64>>> {
        records
            .iter()
            .map(|r| self.normalizer.apply(&self.feature_spec.encode(r)))
            .collect()
    }

    /// Teacher-forcing target for a label. A label the encoding cannot express
    /// (a healthy record fed to a subtype network) contributes a zero tap.
    pub fn tap_target(&self, label: AnemiaLabel) -> Vec<f64> {
        self.encoding
            .target_for(label)
            .unwrap_or_else(|_| vec![0.0; self.encoding.width()])
    }

    /// Raw outputs on already normalized inputs.
    pub fn predict_normalized(
        &self,
        inputs: &[Vec<f64>],
        targets: Option<&[Vec<f64>]>,
    ) -> Result<Vec<Vec<f64>>> {
        let prepared = self.network.prepare(inputs, targets)?;
        prepared.iter().map(|x| self.network.forward(x)).collect()
    }

    /// Raw outputs for records. `labels` feeds the output taps of a
    /// stream-mode NARX network and is otherwise ignored.
    pub fn predict_raw(
        &self,
        records: &[CbcRecord],
        labels: Option<&[AnemiaLabel]>,
    ) -> Result<Vec<Vec<f64>>> {
        let inputs = self.features_of(records)?;
        let targets: Option<Vec<Vec<f64>>> =
            labels.map(|ls| ls.iter().map(|&l| self.tap_target(l)).collect());
        self.predict_normalized(&inputs, targets.as_deref())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::CorruptModel("missing `version`".into()))?;
        let major: u32 = version
            .split('.')
            .next()
            .and_then(|m| m.parse().ok())
            .ok_or_else(|| Error::CorruptModel(format!("unreadable version `{version}`")))?;
        if major != SUPPORTED_MAJOR {
            return Err(Error::UnsupportedVersion {
                found: version.to_string(),
                supported: SUPPORTED_MAJOR,
            });
        }
        let family: Family = value
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::CorruptModel("missing `family`".into()))?
            .parse()?;
        let doc: ModelDoc = serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
        Self::from_doc(family, doc).map_err(|e| match e {
            Error::CorruptModel(_) | Error::UnknownFamily(_) => e,
            other => Error::CorruptModel(other.to_string()),
        })
    }

    fn to_doc(&self) -> ModelDoc {
        let (layers, recurrent, delays) = match &self.network {
            NetworkModel::Ffnn(m) => (
                vec![m.hidden.clone(), m.output.clone()],
                RecurrentSection::default(),
                DelaySection::default(),
            ),
            NetworkModel::Elman(m) => (
                vec![m.input.clone(), m.output.clone()],
                RecurrentSection {
                    weights: Some(m.recurrent.clone()),
                    context_init: Some(m.context_init.clone()),
                    mode: Some(m.mode),
                },
                DelaySection::default(),
            ),
            NetworkModel::Narx(m) => (
                vec![m.core.hidden.clone(), m.core.output.clone()],
                RecurrentSection::default(),
                DelaySection {
                    input_delays: Some(m.delays.input_delays),
                    output_delays: Some(m.delays.output_delays),
                    mode: Some(m.mode),
                },
            ),
        };
        ModelDoc {
            version: FORMAT_VERSION.to_string(),
            family: self.family().as_str().to_string(),
            feature_spec: self.feature_spec.clone(),
            output_encoding: self.encoding,
            normalizer: self.normalizer.clone(),
            layers,
            recurrent,
            delays,
            train_meta: self.meta.clone(),
        }
    }

    fn from_doc(family: Family, doc: ModelDoc) -> Result<Self> {
        let [hidden, output]: [LayerParams; 2] = doc
            .layers
            .try_into()
            .map_err(|l: Vec<LayerParams>| Error::CorruptModel(format!("expected 2 layers, found {}", l.len())))?;
        let features = doc.feature_spec.len();
        let missing = |what: &str| Error::CorruptModel(format!("{family} model is missing `{what}`"));
        let network = match family {
            Family::Ffnn => NetworkModel::Ffnn(FfnnModel::new(hidden, output)?),
            Family::Elman => {
                let r = doc.recurrent;
                NetworkModel::Elman(ElmanModel::new(
                    hidden,
                    r.weights.ok_or_else(|| missing("recurrent.weights"))?,
                    output,
                    r.context_init.ok_or_else(|| missing("recurrent.context_init"))?,
                    r.mode.ok_or_else(|| missing("recurrent.mode"))?,
                    features,
                )?)
            }
            Family::Narx => {
                let d = doc.delays;
                let delays = NarxDelays {
                    input_delays: d.input_delays.ok_or_else(|| missing("delays.input_delays"))?,
                    output_delays: d.output_delays.ok_or_else(|| missing("delays.output_delays"))?,
                };
                let mode = d.mode.ok_or_else(|| missing("delays.mode"))?;
                NarxModel::new(FfnnModel::new(hidden, output)?, delays, mode, features).map(NetworkModel::Narx)?
            }
        };
        Self::new(network, doc.feature_spec, doc.output_encoding, doc.normalizer, doc.train_meta)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: String,
    family: String,
    feature_spec: FeatureSpec,
    output_encoding: OutputEncoding,
    normalizer: Normalizer,
    layers: Vec<LayerParams>,
    recurrent: RecurrentSection,
    delays: DelaySection,
    train_meta: TrainMeta,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecurrentSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context_init: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<SequenceMode>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DelaySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_delays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_delays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<NarxMode>,
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let mut text = model.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    TrainedModel::from_json(&fs::read_to_string(path)?)
}
