use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground truth or predicted outcome for one patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnemiaLabel {
    NonAnemic,
    Microcytic,
    Normocytic,
    Macrocytic,
}

impl AnemiaLabel {
    pub const ALL: [AnemiaLabel; 4] = [
        AnemiaLabel::NonAnemic,
        AnemiaLabel::Microcytic,
        AnemiaLabel::Normocytic,
        AnemiaLabel::Macrocytic,
    ];

    /// The three anemic subtypes, in class-index order.
    pub const SUBTYPES: [AnemiaLabel; 3] = [
        AnemiaLabel::Microcytic,
        AnemiaLabel::Normocytic,
        AnemiaLabel::Macrocytic,
    ];

    /// Binary diagnosis output: 0 for healthy, 1 for any anemia.
    pub fn diagnosis(self) -> u8 {
        match self {
            AnemiaLabel::NonAnemic => 0,
            _ => 1,
        }
    }

    pub fn is_anemic(self) -> bool {
        self.diagnosis() == 1
    }

    /// Index into the 4-way confusion matrix.
    pub fn index(self) -> usize {
        match self {
            AnemiaLabel::NonAnemic => 0,
            AnemiaLabel::Microcytic => 1,
            AnemiaLabel::Normocytic => 2,
            AnemiaLabel::Macrocytic => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Index among the three subtypes; `None` for `NonAnemic`.
    pub fn subtype_index(self) -> Option<usize> {
        self.index().checked_sub(1)
    }

    pub fn from_subtype_index(i: usize) -> Option<Self> {
        Self::SUBTYPES.get(i).copied()
    }

    pub fn token(self) -> &'static str {
        match self {
            AnemiaLabel::NonAnemic => "non_anemic",
            AnemiaLabel::Microcytic => "microcytic",
            AnemiaLabel::Normocytic => "normocytic",
            AnemiaLabel::Macrocytic => "macrocytic",
        }
    }
}

impl FromStr for AnemiaLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim().to_ascii_lowercase();
        AnemiaLabel::ALL
            .into_iter()
            .find(|l| l.token() == t)
            .ok_or_else(|| format!("unknown label `{}`", s.trim()))
    }
}

impl fmt::Display for AnemiaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One patient's complete-blood-count panel plus demographics.
///
/// Units: rbc 10^6/µL, hgb g/dL, hct %, mcv fL, mch pg, mchc g/dL, wbc 10^3/µL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbcRecord {
    pub age: u32,
    pub gender: Gender,
    pub rbc: f64,
    pub hgb: f64,
    pub hct: f64,
    pub mcv: f64,
    pub mch: f64,
    pub mchc: f64,
    pub wbc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub record: CbcRecord,
    pub label: AnemiaLabel,
}

/// Closed plausibility interval for one analyte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub min: f64,
    pub max: f64,
}

impl Bound {
    pub const fn new(min: f64, max: f64) -> Self {
        Bound { min, max }
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Bounds outside of which a value is treated as a data-entry error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityBounds {
    pub max_age: u32,
    pub rbc: Bound,
    pub hgb: Bound,
    pub mcv: Bound,
    pub mch: Bound,
    pub mchc: Bound,
    pub wbc: Bound,
}

impl Default for PlausibilityBounds {
    fn default() -> Self {
        PlausibilityBounds {
            max_age: 120,
            rbc: Bound::new(1.0, 8.0),
            hgb: Bound::new(3.0, 22.0),
            mcv: Bound::new(50.0, 150.0),
            mch: Bound::new(15.0, 45.0),
            mchc: Bound::new(25.0, 42.0),
            wbc: Bound::new(1.0, 50.0),
        }
    }
}

impl CbcRecord {
    pub fn analytes(&self) -> [(&'static str, f64); 7] {
        [
            ("rbc", self.rbc),
            ("hgb", self.hgb),
            ("hct", self.hct),
            ("mcv", self.mcv),
            ("mch", self.mch),
            ("mchc", self.mchc),
            ("wbc", self.wbc),
        ]
    }

    /// Every violated bound, in field order. Empty means the record is valid.
    pub fn violations(&self, bounds: &PlausibilityBounds) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.age > bounds.max_age {
            out.push(Violation {
                field: "age",
                message: format!("age out of [0,{}]", bounds.max_age),
            });
        }
        for (field, value) in self.analytes() {
            if !value.is_finite() {
                out.push(Violation {
                    field,
                    message: format!("{field} must be finite"),
                });
                continue;
            }
            if value <= 0.0 {
                out.push(Violation {
                    field,
                    message: format!("{field} must be positive"),
                });
                continue;
            }
            let bound = match field {
                "rbc" => Some(bounds.rbc),
                "hgb" => Some(bounds.hgb),
                "mcv" => Some(bounds.mcv),
                "mch" => Some(bounds.mch),
                "mchc" => Some(bounds.mchc),
                "wbc" => Some(bounds.wbc),
                _ => None,
            };
            if field == "hct" && value >= 100.0 {
                out.push(Violation {
                    field,
                    message: "hct out of (0,100)".to_string(),
                });
            }
            if let Some(b) = bound {
                if !b.contains(value) {
                    out.push(Violation {
                        field,
                        message: format!("{field} out of [{},{}]", b.min, b.max),
                    });
                }
            }
        }
        out
    }
}

/// Checks a record against the default plausibility bounds.
pub fn validate_record(record: &CbcRecord) -> Result<()> {
    validate_record_with(record, &PlausibilityBounds::default())
}

pub fn validate_record_with(record: &CbcRecord, bounds: &PlausibilityBounds) -> Result<()> {
    let v = record.violations(bounds);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidRecord(v))
    }
}

#[cfg(test)]
pub(crate) fn sample_record() -> CbcRecord {
    CbcRecord {
        age: 40,
        gender: Gender::Female,
        rbc: 4.5,
        hgb: 13.5,
        hct: 40.0,
        mcv: 90.0,
        mch: 30.0,
        mchc: 34.0,
        wbc: 7.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_range_record_is_valid() {
        assert!(validate_record(&sample_record()).is_ok());
    }

    #[test]
    fn hct_above_hundred_is_reported() {
        let r = CbcRecord {
            hct: 105.0,
            ..sample_record()
        };
        let v = r.violations(&PlausibilityBounds::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "hct out of (0,100)");
    }

    #[test]
    fn negative_hgb_is_reported() {
        let r = CbcRecord {
            hgb: -1.0,
            ..sample_record()
        };
        let v = r.violations(&PlausibilityBounds::default());
        assert_eq!(v[0].field, "hgb");
        assert_eq!(v[0].message, "hgb must be positive");
    }

    #[test]
    fn all_violations_are_returned() {
        let r = CbcRecord {
            age: 130,
            hgb: -1.0,
            hct: 105.0,
            mcv: f64::NAN,
            wbc: 80.0,
            ..sample_record()
        };
        let fields: Vec<_> = r
            .violations(&PlausibilityBounds::default())
            .iter()
            .map(|v| v.field)
            .collect();
        assert_eq!(fields, ["age", "hgb", "hct", "mcv", "wbc"]);
        assert!(matches!(validate_record(&r), Err(Error::InvalidRecord(v)) if v.len() == 5));
    }

    #[test]
    fn label_tokens_are_case_insensitive() {
        assert_eq!("MicroCytic".parse::<AnemiaLabel>().unwrap(), AnemiaLabel::Microcytic);
        assert_eq!("NON_ANEMIC".parse::<AnemiaLabel>().unwrap(), AnemiaLabel::NonAnemic);
        assert!("anemic".parse::<AnemiaLabel>().is_err());
    }

    #[test]
    fn diagnosis_mapping() {
        assert_eq!(AnemiaLabel::NonAnemic.diagnosis(), 0);
        for l in AnemiaLabel::SUBTYPES {
            assert_eq!(l.diagnosis(), 1);
            assert_eq!(AnemiaLabel::from_subtype_index(l.subtype_index().unwrap()), Some(l));
        }
    }
}
