//! Feature selection, [-1, +1] normalization and dataset splitting.

mod features;
mod normalize;
mod split;

pub use features::{encode, Feature, FeatureSpec};
pub use normalize::Normalizer;
pub use split::{apportion, split_dataset, DatasetSplit, SplitFractions, SplitPreset};
