use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::AnemiaLabel;
use crate::error::{Error, Result};

/// How labels map onto network targets and back.
///
/// `Binary` is the diagnosis encoding (0 healthy, 1 anemic). The two
/// classification encodings cover the three subtypes only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputEncoding {
    Binary,
    #[serde(rename = "onehot3")]
    OneHot3,
    #[serde(rename = "banded1")]
    Banded1,
}

/// Band centers for the single-output subtype encoding.
pub const BAND_CENTERS: [f64; 3] = [1.0 / 6.0, 0.5, 5.0 / 6.0];

impl OutputEncoding {
    pub fn width(self) -> usize {
        match self {
            OutputEncoding::Binary | OutputEncoding::Banded1 => 1,
            OutputEncoding::OneHot3 => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutputEncoding::Binary => "binary",
            OutputEncoding::OneHot3 => "onehot3",
            OutputEncoding::Banded1 => "banded1",
        }
    }

    pub fn is_subtype(self) -> bool {
        !matches!(self, OutputEncoding::Binary)
    }

    /// Target vector for a label. Subtype encodings reject `NonAnemic`.
    pub fn target_for(self, label: AnemiaLabel) -> Result<Vec<f64>> {
        match self {
            OutputEncoding::Binary => Ok(vec![if label.is_anemic() { 1.0 } else { 0.0 }]),
            OutputEncoding::OneHot3 | OutputEncoding::Banded1 => {
                let k = label.subtype_index().ok_or_else(|| {
                    Error::Contract(format!("{} encoding has no target for non-anemic records", self.as_str()))
                })?;
                Ok(match self {
                    OutputEncoding::OneHot3 => {
                        let mut t = vec![0.0; 3];
                        t[k] = 1.0;
                        t
                    }
                    _ => vec![BAND_CENTERS[k]],
                })
            }
        }
    }

    /// Subtype from classifier outputs.
    pub fn decode_subtype(self, output: &[f64]) -> Result<AnemiaLabel> {
        if output.len() != self.width() {
            return Err(Error::DimensionMismatch {
                context: "classifier output",
                expected: self.width(),
                found: output.len(),
            });
        }
        let k = match self {
            OutputEncoding::Binary => {
                return Err(Error::Contract("binary encoding does not decode to a subtype".into()))
            }
            OutputEncoding::OneHot3 => argmax(output),
            OutputEncoding::Banded1 => nearest_band(output[0]),
        };
        Ok(AnemiaLabel::from_subtype_index(k).expect("subtype index below 3"))
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Index of the nearest band center; the lower band wins an exact tie.
pub fn nearest_band(y: f64) -> usize {
    let mut best = 0;
    for (i, c) in BAND_CENTERS.iter().enumerate().skip(1) {
        if (y - c).abs() < (y - BAND_CENTERS[best]).abs() {
            best = i;
        }
    }
    best
}

impl fmt::Display for OutputEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutputEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(OutputEncoding::Binary),
            "onehot3" => Ok(OutputEncoding::OneHot3),
            "banded1" => Ok(OutputEncoding::Banded1),
            other => Err(Error::InvalidConfig(format!("unknown output encoding `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AnemiaLabel::*;

    #[test]
    fn onehot_argmax_and_ties() {
        let e = OutputEncoding::OneHot3;
        assert_eq!(e.decode_subtype(&[0.9, 0.2, 0.1]).unwrap(), Microcytic);
        assert_eq!(e.decode_subtype(&[0.1, 0.7, 0.7]).unwrap(), Normocytic);
        assert_eq!(e.decode_subtype(&[0.4, 0.4, 0.4]).unwrap(), Microcytic);
    }

    #[test]
    fn banded_nearest_center() {
        let e = OutputEncoding::Banded1;
        assert_eq!(e.decode_subtype(&[0.49]).unwrap(), Normocytic);
        assert_eq!(e.decode_subtype(&[0.05]).unwrap(), Microcytic);
        assert_eq!(e.decode_subtype(&[0.95]).unwrap(), Macrocytic);
    }

    #[test]
    fn targets() {
        assert_eq!(OutputEncoding::Binary.target_for(NonAnemic).unwrap(), vec![0.0]);
        assert_eq!(OutputEncoding::Binary.target_for(Normocytic).unwrap(), vec![1.0]);
        assert_eq!(OutputEncoding::OneHot3.target_for(Macrocytic).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(OutputEncoding::Banded1.target_for(Microcytic).unwrap(), vec![1.0 / 6.0]);
        assert!(OutputEncoding::OneHot3.target_for(NonAnemic).is_err());
    }

    #[test]
    fn tokens_round_trip() {
        for e in [OutputEncoding::Binary, OutputEncoding::OneHot3, OutputEncoding::Banded1] {
            assert_eq!(e.as_str().parse::<OutputEncoding>().unwrap(), e);
            let j = serde_json::to_string(&e).unwrap();
            assert_eq!(j, format!("\"{}\"", e.as_str()));
        }
    }
}
