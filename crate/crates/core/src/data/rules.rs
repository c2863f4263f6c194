//! Clinical rule oracle for anemia typing from red-cell indices.
//!
//! Anemia is decided by hemoglobin against a gender-specific threshold. An
//! anemic record is then typed by MCV, MCH and MCHC: all three low is
//! microcytic, all three high is macrocytic, all three inside their reference
//! interval is normocytic. Records whose indices disagree are typed by MCV
//! alone unless [`MixedIndexPolicy::Strict`] is requested.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{validate_record, AnemiaLabel, CbcRecord, Gender};
use crate::error::{Error, Result};

/// Reference intervals used by the rule oracle and the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRanges {
    pub hgb_low_male: f64,
    pub hgb_low_female: f64,
    pub mcv_low: f64,
    pub mcv_high: f64,
    pub mch_low: f64,
    pub mch_high: f64,
    pub mchc_low: f64,
    pub mchc_high: f64,
}

impl Default for ReferenceRanges {
    fn default() -> Self {
        ReferenceRanges {
            hgb_low_male: 13.0,
            hgb_low_female: 12.0,
            mcv_low: 80.0,
            mcv_high: 100.0,
            mch_low: 27.0,
            mch_high: 33.0,
            mchc_low: 32.0,
            mchc_high: 36.0,
        }
    }
}

impl ReferenceRanges {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.hgb_low_male,
            self.hgb_low_female,
            self.mcv_low,
            self.mcv_high,
            self.mch_low,
            self.mch_high,
            self.mchc_low,
            self.mchc_high,
        ];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidConfig(
                "reference ranges must be finite and positive".into(),
            ));
        }
        for (name, lo, hi) in [
            ("mcv", self.mcv_low, self.mcv_high),
            ("mch", self.mch_low, self.mch_high),
            ("mchc", self.mchc_low, self.mchc_high),
        ] {
            if lo >= hi {
                return Err(Error::InvalidConfig(format!(
                    "{name} reference low {lo} must be below high {hi}"
                )));
            }
        }
        Ok(())
    }

    pub fn hgb_threshold(&self, gender: Gender) -> f64 {
        match gender {
            Gender::Male => self.hgb_low_male,
            Gender::Female => self.hgb_low_female,
        }
    }

    /// Reads a JSON override file and validates it.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ranges: ReferenceRanges = serde_json::from_str(&text)?;
        ranges.validate()?;
        Ok(ranges)
    }
}

/// How to type an anemic record whose three indices point different ways.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MixedIndexPolicy {
    #[default]
    McvDecides,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Band {
    Low,
    Within,
    High,
}

fn band(value: f64, low: f64, high: f64) -> Band {
    if value < low {
        Band::Low
    } else if value > high {
        Band::High
    } else {
        Band::Within
    }
}

/// Labels a record under the default MCV-decides policy.
pub fn rule_label(record: &CbcRecord, ranges: &ReferenceRanges) -> Result<AnemiaLabel> {
    rule_label_with(record, ranges, MixedIndexPolicy::McvDecides)
}

pub fn rule_label_with(
    record: &CbcRecord,
    ranges: &ReferenceRanges,
    policy: MixedIndexPolicy,
) -> Result<AnemiaLabel> {
    validate_record(record)?;
    if record.hgb >= ranges.hgb_threshold(record.gender) {
        return Ok(AnemiaLabel::NonAnemic);
    }
    let mcv = band(record.mcv, ranges.mcv_low, ranges.mcv_high);
    let mch = band(record.mch, ranges.mch_low, ranges.mch_high);
    let mchc = band(record.mchc, ranges.mchc_low, ranges.mchc_high);
    let from_band = |b| match b {
        Band::Low => AnemiaLabel::Microcytic,
        Band::Within => AnemiaLabel::Normocytic,
        Band::High => AnemiaLabel::Macrocytic,
    };
    if mcv == mch && mch == mchc {
        return Ok(from_band(mcv));
    }
    match policy {
        MixedIndexPolicy::McvDecides => Ok(from_band(mcv)),
        MixedIndexPolicy::Strict => Err(Error::Unclassifiable {
            mcv: record.mcv,
            mch: record.mch,
            mchc: record.mchc,
        }),
    }
}
