use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AnemiaLabel, LabeledRecord};
use crate::error::{Error, Result};

/// Largest-remainder apportionment of `total` seats over non-negative weights.
///
/// Remaining seats go to the largest fractional parts; ties favor the lower index.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut seats: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = seats.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let frac = |i: usize| quotas[i] - seats[i] as f64;
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        seats[i] += 1;
    }
    seats
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl SplitFractions {
    /// 40% training, 40% testing, 20% validation.
    pub const PAPER: SplitFractions = SplitFractions {
        train: 0.4,
        test: 0.4,
        validation: 0.2,
    };

    /// 147 training and 83 test records out of 230, no validation part.
    pub const PAPER_MATERIALS: SplitFractions = SplitFractions {
        train: 147.0 / 230.0,
        test: 83.0 / 230.0,
        validation: 0.0,
    };

    /// Every record goes to training.
    pub const ALL_TRAIN: SplitFractions = SplitFractions {
        train: 1.0,
        test: 0.0,
        validation: 0.0,
    };

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.test, self.validation]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be non-negative, got {a:?}"
            )));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Named split presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPreset {
    /// 40/40/20.
    Paper,
    /// 147/83/0 (out of 230).
    PaperMaterials,
}

impl SplitPreset {
    pub fn fractions(self) -> SplitFractions {
        match self {
            SplitPreset::Paper => SplitFractions::PAPER,
            SplitPreset::PaperMaterials => SplitFractions::PAPER_MATERIALS,
        }
    }
}

impl FromStr for SplitPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SplitPreset::Paper),
            "paper-materials" => Ok(SplitPreset::PaperMaterials),
            other => Err(Error::InvalidConfig(format!(
                "unknown split preset `{other}` (expected paper or paper-materials)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledRecord>,
    pub test: Vec<LabeledRecord>,
    pub validation: Vec<LabeledRecord>,
    pub fractions: SplitFractions,
    pub seed: u64,
    pub stratified: bool,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.test.len(), self.validation.len())
    }
}

/// Assigns every (class, part) cell either the floor of its quota or one more,
/// such that each class total and each global part size are met exactly.
fn stratified_counts(class_sizes: &[usize], fractions: &[f64; 3], totals: &[usize]) -> Vec<[usize; 3]> {
    let mut cells: Vec<[usize; 3]> = Vec::with_capacity(class_sizes.len());
    let mut fracs: Vec<[f64; 3]> = Vec::with_capacity(class_sizes.len());
    for &n in class_sizes {
        let mut c = [0usize; 3];
        let mut f = [0f64; 3];
        for p in 0..3 {
            let q = n as f64 * fractions[p];
            c[p] = (q + 1e-9).floor() as usize;
            f[p] = q - c[p] as f64;
        }
        cells.push(c);
        fracs.push(f);
    }
    let mut part_need: Vec<usize> = (0..3)
        .map(|p| totals[p] - cells.iter().map(|c| c[p]).sum::<usize>())
        .collect();
    let class_need: Vec<usize> = class_sizes
        .iter()
        .zip(&cells)
        .map(|(&n, c)| n - c.iter().sum::<usize>())
        .collect();

    // Classes with the most outstanding seats first, each taking the parts with
    // the largest remaining demand. This greedy order finds a 0/1 assignment
    // whenever one exists.
    let mut class_order: Vec<usize> = (0..class_sizes.len()).collect();
    class_order.sort_by(|&a, &b| class_need[b].cmp(&class_need[a]).then(a.cmp(&b)));
    for c in class_order {
        let mut parts: Vec<usize> = (0..3).filter(|&p| part_need[p] > 0).collect();
        parts.sort_by(|&a, &b| {
            part_need[b]
                .cmp(&part_need[a])
                .then(fracs[c][b].total_cmp(&fracs[c][a]))
                .then(a.cmp(&b))
        });
        debug_assert!(parts.len() >= class_need[c]);
        for &p in parts.iter().take(class_need[c]) {
            cells[c][p] += 1;
            part_need[p] -= 1;
        }
    }
    cells
}

/// Splits records into train/test/validation parts.
///
/// Part sizes follow largest-remainder rounding of `n · fraction`. In stratified
/// mode each class is apportioned separately, so every class's count in every
/// part is within one record of exact proportionality, and the part totals
/// still equal the unstratified sizes.
pub fn split_dataset(
    data: &[LabeledRecord],
    fractions: SplitFractions,
    seed: u64,
    stratified: bool,
) -> Result<DatasetSplit> {
    fractions.validate()?;
    let fr = fractions.as_array();
    let parts = fr.iter().filter(|f| **f > 0.0).count();
    if data.len() < parts {
        return Err(Error::InvalidConfig(format!(
            "cannot split {} records into {parts} parts",
            data.len()
        )));
    }
    let totals = apportion(data.len(), &fr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: [Vec<LabeledRecord>; 3] = Default::default();

    if stratified {
        let groups: Vec<Vec<LabeledRecord>> = AnemiaLabel::ALL
            .iter()
            .map(|&l| data.iter().filter(|r| r.label == l).copied().collect())
            .collect();
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let counts = stratified_counts(&sizes, &fr, &totals);
        for (mut group, count) in groups.into_iter().zip(counts) {
            group.shuffle(&mut rng);
            let mut rest = group.as_slice();
            for p in 0..3 {
                let (head, tail) = rest.split_at(count[p]);
                out[p].extend_from_slice(head);
                rest = tail;
            }
        }
        for part in out.iter_mut() {
            part.shuffle(&mut rng);
        }
    } else {
        let mut all = data.to_vec();
        all.shuffle(&mut rng);
        let mut rest = all.as_slice();
        for p in 0..3 {
            let (head, tail) = rest.split_at(totals[p]);
            out[p] = head.to_vec();
            rest = tail;
        }
    }
    let [train, test, validation] = out;
    Ok(DatasetSplit {
        train,
        test,
        validation,
        fractions,
        seed,
        stratified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, ClassMix, SynthConfig};
    use proptest::prelude::*;

    fn dataset(n: usize, seed: u64) -> Vec<LabeledRecord> {
        let mix = ClassMix::PAPER_TRAINING.scaled_to(n).unwrap();
        synth_generate(n, &mix, &SynthConfig::default(), seed).unwrap()
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(230, &[0.4, 0.4, 0.2]), vec![92, 92, 46]);
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(apportion(0, &[0.5, 0.5]), vec![0, 0]);
    }

    #[test]
    fn paper_split_sizes() {
        let d = dataset(230, 1);
        let s = split_dataset(&d, SplitFractions::PAPER, 5, false).unwrap();
        assert_eq!(s.sizes(), (92, 92, 46));
        let m = split_dataset(&d, SplitPreset::PaperMaterials.fractions(), 5, true).unwrap();
        assert_eq!(m.sizes(), (147, 83, 0));
    }

    #[test]
    fn too_few_records() {
        let d = dataset(2, 1);
        assert!(split_dataset(&d, SplitFractions::PAPER, 0, false).is_err());
        let bad = SplitFractions {
            train: 0.5,
            test: 0.4,
            validation: 0.2,
        };
        assert!(split_dataset(&dataset(20, 1), bad, 0, false).is_err());
    }

    #[test]
    fn empty_class_is_allowed_when_stratified() {
        let d: Vec<_> = dataset(60, 2)
            .into_iter()
            .filter(|r| r.label != AnemiaLabel::Macrocytic)
            .collect();
        let s = split_dataset(&d, SplitFractions::PAPER, 3, true).unwrap();
        assert_eq!(s.train.len() + s.test.len() + s.validation.len(), d.len());
    }

    #[test]
    fn same_seed_same_membership() {
        let d = dataset(100, 4);
        let a = split_dataset(&d, SplitFractions::PAPER, 9, true).unwrap();
        let b = split_dataset(&d, SplitFractions::PAPER, 9, true).unwrap();
        assert_eq!(a, b);
    }

    fn key(r: &LabeledRecord) -> String {
        format!("{:?}", r)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn stratified_is_a_balanced_partition(
            n in 3usize..150,
            data_seed in 0u64..1000,
            split_seed in 0u64..1000,
            a in 0.05f64..1.0,
            b in 0.05f64..1.0,
            c in 0.0f64..1.0,
        ) {
            let sum = a + b + c;
            let fr = SplitFractions { train: a / sum, test: b / sum, validation: 1.0 - a / sum - b / sum };
            let d = dataset(n, data_seed);
            let s = split_dataset(&d, fr, split_seed, true).unwrap();
            prop_assert_eq!(
                [s.train.len(), s.test.len(), s.validation.len()].to_vec(),
                apportion(n, &[fr.train, fr.test, fr.validation])
            );
            let mut all: Vec<String> = s.train.iter().chain(&s.test).chain(&s.validation).map(key).collect();
            let mut orig: Vec<String> = d.iter().map(key).collect();
            all.sort();
            orig.sort();
            prop_assert_eq!(all, orig);
            for l in AnemiaLabel::ALL {
                let nc = d.iter().filter(|r| r.label == l).count() as f64;
                for (part, f) in [(&s.train, fr.train), (&s.test, fr.test), (&s.validation, fr.validation)] {
                    let got = part.iter().filter(|r| r.label == l).count() as f64;
                    prop_assert!((got - nc * f).abs() <= 1.0 + 1e-9, "class {l}: {got} vs {}", nc * f);
                }
            }
        }
    }
}
