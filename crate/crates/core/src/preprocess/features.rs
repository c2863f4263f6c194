use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{CbcRecord, Gender};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Age,
    Gender,
    Rbc,
    Hgb,
    Hct,
    Mcv,
    Mch,
    Mchc,
    Wbc,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Age => "age",
            Feature::Gender => "gender",
            Feature::Rbc => "rbc",
            Feature::Hgb => "hgb",
            Feature::Hct => "hct",
            Feature::Mcv => "mcv",
            Feature::Mch => "mch",
            Feature::Mchc => "mchc",
            Feature::Wbc => "wbc",
        }
    }

    /// Raw numeric value; gender is encoded male → 0, female → 1.
    pub fn extract(self, r: &CbcRecord) -> f64 {
        match self {
            Feature::Age => r.age as f64,
            Feature::Gender => match r.gender {
                Gender::Male => 0.0,
                Gender::Female => 1.0,
            },
            Feature::Rbc => r.rbc,
            Feature::Hgb => r.hgb,
            Feature::Hct => r.hct,
            Feature::Mcv => r.mcv,
            Feature::Mch => r.mch,
            Feature::Mchc => r.mchc,
            Feature::Wbc => r.wbc,
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Feature::*;
        [Age, Gender, Rbc, Hgb, Hct, Mcv, Mch, Mchc, Wbc]
            .into_iter()
            .find(|f| f.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown feature `{s}`")))
    }
}

/// Ordered, duplicate-free selection of record fields fed to a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSpec(Vec<Feature>);

impl FeatureSpec {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidConfig("feature list is empty".into()));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(Error::InvalidConfig(format!("duplicate feature `{}`", f.name())));
            }
        }
        Ok(FeatureSpec(features))
    }

    /// All nine inputs: age, gender, RBC, HGB, HCT, MCV, MCH, MCHC, WBC.
    pub fn full9() -> Self {
        use Feature::*;
        FeatureSpec(vec![Age, Gender, Rbc, Hgb, Hct, Mcv, Mch, Mchc, Wbc])
    }

    /// The seven diagnosis inputs: age, gender, HGB, HCT, MCV, MCH, MCHC.
    pub fn paper7() -> Self {
        use Feature::*;
        FeatureSpec(vec![Age, Gender, Hgb, Hct, Mcv, Mch, Mchc])
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full9" => Ok(Self::full9()),
            "paper7" => Ok(Self::paper7()),
            other => Err(Error::InvalidConfig(format!(
                "unknown feature preset `{other}` (expected full9 or paper7)"
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn encode(&self, record: &CbcRecord) -> Vec<f64> {
        self.0.iter().map(|f| f.extract(record)).collect()
    }
}

impl TryFrom<Vec<Feature>> for FeatureSpec {
    type Error = Error;

    fn try_from(v: Vec<Feature>) -> Result<Self> {
        FeatureSpec::new(v)
    }
}

impl From<FeatureSpec> for Vec<Feature> {
    fn from(s: FeatureSpec) -> Self {
        s.0
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::full9() {
            return f.write_str("full9");
        }
        if *self == Self::paper7() {
            return f.write_str("paper7");
        }
        let names: Vec<_> = self.0.iter().map(|x| x.name()).collect();
        f.write_str(&names.join(","))
    }
}

pub fn encode(record: &CbcRecord, spec: &FeatureSpec) -> Vec<f64> {
    spec.encode(record)
}
