//! Patient records, labels, the rule oracle, CSV I/O and the synthetic generator.

mod csv_io;
mod record;
mod rules;
mod synth;

pub use csv_io::{
    format_sig6, load_csv, load_unlabeled_csv, read_labeled, read_unlabeled, save_csv,
    write_labeled, write_unlabeled, FEATURE_COLUMNS,
};
pub use record::{
    validate_record, validate_record_with, AnemiaLabel, Bound, CbcRecord, Gender, LabeledRecord,
    PlausibilityBounds,
};
pub use rules::{rule_label, rule_label_with, MixedIndexPolicy, ReferenceRanges};
pub use synth::{synth_generate, ClassMix, SynthConfig};

#[cfg(test)]
pub(crate) use record::sample_record;
