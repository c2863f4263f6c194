//! Seeded synthetic CBC generator whose labels agree with the rule oracle.
//!
//! MCV and MCHC are drawn inside the band that defines the requested class;
//! MCH, HCT and RBC are then derived from the red-cell identities
//! `MCH = MCV·MCHC/100`, `HCT = 100·HGB/MCHC` and `RBC = 10·HCT/MCV`, so the
//! panel is internally consistent. Every candidate is re-labelled with
//! [`rule_label`] and rejected unless it matches and clears each threshold by
//! the configured margin.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{AnemiaLabel, CbcRecord, Gender, LabeledRecord, PlausibilityBounds};
use super::rules::{rule_label, ReferenceRanges};
use crate::error::{Error, Result};
use crate::preprocess::apportion;

/// Width of the hemoglobin sampling band on each side of the threshold, g/dL.
const HGB_SPAN: f64 = 4.0;
const MAX_ATTEMPTS: usize = 10_000;

/// Requested number of records per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassMix {
    pub non_anemic: usize,
    pub microcytic: usize,
    pub normocytic: usize,
    pub macrocytic: usize,
}

impl ClassMix {
    /// Training-set composition reported for the hospital data: 26 microcytic,
    /// 40 normocytic, 39 macrocytic and 42 non-anemic.
    pub const PAPER_TRAINING: ClassMix = ClassMix {
        non_anemic: 42,
        microcytic: 26,
        normocytic: 40,
        macrocytic: 39,
    };

    pub fn get(&self, label: AnemiaLabel) -> usize {
        match label {
            AnemiaLabel::NonAnemic => self.non_anemic,
            AnemiaLabel::Microcytic => self.microcytic,
            AnemiaLabel::Normocytic => self.normocytic,
            AnemiaLabel::Macrocytic => self.macrocytic,
        }
    }

    pub fn total(&self) -> usize {
        AnemiaLabel::ALL.iter().map(|&l| self.get(l)).sum()
    }

    /// Parses `micro,normo,macro,non_anemic` signed counts, rejecting negatives.
    pub fn from_counts(micro: i64, normo: i64, macro_: i64, non: i64) -> Result<Self> {
        let check = |name: &str, v: i64| {
            usize::try_from(v)
                .map_err(|_| Error::InvalidConfig(format!("{name} count must be non-negative, got {v}")))
        };
        Ok(ClassMix {
            microcytic: check("microcytic", micro)?,
            normocytic: check("normocytic", normo)?,
            macrocytic: check("macrocytic", macro_)?,
            non_anemic: check("non_anemic", non)?,
        })
    }

    /// Rescales this mix to `total` records by largest-remainder rounding.
    pub fn scaled_to(&self, total: usize) -> Result<Self> {
        let sum = self.total();
        if sum == 0 {
            return Err(Error::InvalidConfig("cannot scale an empty class mix".into()));
        }
        let weights: Vec<f64> = AnemiaLabel::SUBTYPES
            .iter()
            .chain(std::iter::once(&AnemiaLabel::NonAnemic))
            .map(|&l| self.get(l) as f64 / sum as f64)
            .collect();
        let c = apportion(total, &weights);
        Ok(ClassMix {
            microcytic: c[0],
            normocytic: c[1],
            macrocytic: c[2],
            non_anemic: c[3],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub ranges: ReferenceRanges,
    /// Clearance from every threshold, as a fraction of the reference-range width.
    pub margin: f64,
    pub bounds: PlausibilityBounds,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            ranges: ReferenceRanges::default(),
            margin: 0.05,
            bounds: PlausibilityBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Band {
    Low,
    Within,
    High,
}

struct Interval {
    low: f64,
    high: f64,
    delta: f64,
}

impl Interval {
    fn new(low: f64, high: f64, margin: f64) -> Self {
        Interval {
            low,
            high,
            delta: margin * (high - low),
        }
    }

    fn width(&self) -> f64 {
        self.high - self.low
    }

    fn sample(&self, band: Band, rng: &mut impl Rng) -> f64 {
        let (a, b) = match band {
            Band::Low => (self.low - 0.8 * self.width(), self.low - self.delta),
            Band::Within => (self.low + self.delta, self.high - self.delta),
            Band::High => (self.high + self.delta, self.high + 0.6 * self.width()),
        };
        rng.gen_range(a..=b)
    }

    fn clears(&self, v: f64, band: Band) -> bool {
        match band {
            Band::Low => v < self.low && v <= self.low - self.delta,
            Band::Within => v >= self.low + self.delta && v <= self.high - self.delta,
            Band::High => v > self.high && v >= self.high + self.delta,
        }
    }
}

fn quantize(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn band_for(label: AnemiaLabel) -> Band {
    match label {
        AnemiaLabel::Microcytic => Band::Low,
        AnemiaLabel::Macrocytic => Band::High,
        AnemiaLabel::Normocytic | AnemiaLabel::NonAnemic => Band::Within,
    }
}

fn candidate(label: AnemiaLabel, cfg: &SynthConfig, rng: &mut impl Rng) -> Option<CbcRecord> {
    let r = &cfg.ranges;
    let mcv_i = Interval::new(r.mcv_low, r.mcv_high, cfg.margin);
    let mch_i = Interval::new(r.mch_low, r.mch_high, cfg.margin);
    let mchc_i = Interval::new(r.mchc_low, r.mchc_high, cfg.margin);
    let hgb_delta = cfg.margin * HGB_SPAN;

    let gender = if rng.gen_bool(0.5) { Gender::Male } else { Gender::Female };
    let age = rng.gen_range(18..=85);
    let threshold = r.hgb_threshold(gender);
    let hgb = if label.is_anemic() {
        rng.gen_range((threshold - 1.5 * HGB_SPAN)..=(threshold - hgb_delta))
    } else {
        rng.gen_range((threshold + hgb_delta)..=(threshold + HGB_SPAN))
    };
    let band = band_for(label);
    let mcv = mcv_i.sample(band, rng);
    let mchc = mchc_i.sample(band, rng);
    let mch = mcv * mchc / 100.0;
    let hct = 100.0 * hgb / mchc;
    let rbc = 10.0 * hct / mcv;
    let wbc = rng.gen_range(4.0..=11.0);

    let record = CbcRecord {
        age,
        gender,
        rbc: quantize(rbc, 2),
        hgb: quantize(hgb, 2),
        hct: quantize(hct, 2),
        mcv: quantize(mcv, 2),
        mch: quantize(mch, 2),
        mchc: quantize(mchc, 2),
        wbc: quantize(wbc, 2),
    };

    let hgb_clear = if label.is_anemic() {
        record.hgb < threshold && record.hgb <= threshold - hgb_delta
    } else {
        record.hgb >= threshold + hgb_delta
    };
    let indices_clear = mcv_i.clears(record.mcv, band)
        && mch_i.clears(record.mch, band)
        && mchc_i.clears(record.mchc, band);
    let valid = record.violations(&cfg.bounds).is_empty();
    (hgb_clear && indices_clear && valid).then_some(record)
}

/// Generates exactly `mix` records per class, shuffled, deterministic in `seed`.
pub fn synth_generate(
    n: usize,
    mix: &ClassMix,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<Vec<LabeledRecord>> {
    if mix.total() != n {
        return Err(Error::InvalidConfig(format!(
            "class counts sum to {}, expected n = {n}",
            mix.total()
        )));
    }
    if !(0.0..0.5).contains(&cfg.margin) {
        return Err(Error::InvalidConfig(format!(
            "margin must lie in [0, 0.5), got {}",
            cfg.margin
        )));
    }
    cfg.ranges.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<AnemiaLabel> = AnemiaLabel::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, mix.get(l)))
        .collect();
    labels.shuffle(&mut rng);

    let mut out = Vec::with_capacity(n);
    for label in labels {
        let record = (0..MAX_ATTEMPTS)
            .find_map(|_| {
                candidate(label, cfg, &mut rng)
                    .filter(|rec| matches!(rule_label(rec, &cfg.ranges), Ok(l) if l == label))
            })
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "could not generate a {label} record within {MAX_ATTEMPTS} attempts; check ranges and margin"
                ))
            })?;
        out.push(LabeledRecord { record, label });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(records: &[LabeledRecord], l: AnemiaLabel) -> usize {
        records.iter().filter(|r| r.label == l).count()
    }

    #[test]
    fn empty_request_gives_empty_list() {
        let out = synth_generate(0, &ClassMix::default(), &SynthConfig::default(), 1).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn training_composition_is_exact() {
        let mix = ClassMix::PAPER_TRAINING;
        let out = synth_generate(147, &mix, &SynthConfig::default(), 7).unwrap();
        assert_eq!(out.len(), 147);
        assert_eq!(count(&out, AnemiaLabel::Microcytic), 26);
        assert_eq!(count(&out, AnemiaLabel::Normocytic), 40);
        assert_eq!(count(&out, AnemiaLabel::Macrocytic), 39);
        assert_eq!(count(&out, AnemiaLabel::NonAnemic), 42);
    }

    #[test]
    fn oracle_agrees_on_every_record() {
        let cfg = SynthConfig::default();
        let out = synth_generate(400, &ClassMix::PAPER_TRAINING.scaled_to(400).unwrap(), &cfg, 3).unwrap();
        for r in &out {
            assert_eq!(rule_label(&r.record, &cfg.ranges).unwrap(), r.label);
        }
    }

    #[test]
    fn zero_margin_still_agrees() {
        let cfg = SynthConfig {
            margin: 0.0,
            ..Default::default()
        };
        let out = synth_generate(200, &ClassMix::PAPER_TRAINING.scaled_to(200).unwrap(), &cfg, 11).unwrap();
        assert!(out
            .iter()
            .all(|r| rule_label(&r.record, &cfg.ranges).unwrap() == r.label));
    }

    #[test]
    fn mismatched_total_and_negative_counts_are_rejected() {
        let mix = ClassMix::PAPER_TRAINING;
        assert!(synth_generate(146, &mix, &SynthConfig::default(), 0).is_err());
        assert!(ClassMix::from_counts(26, -1, 39, 42).is_err());
    }

    #[test]
    fn same_seed_same_output() {
        let mix = ClassMix::PAPER_TRAINING;
        let a = synth_generate(147, &mix, &SynthConfig::default(), 99).unwrap();
        let b = synth_generate(147, &mix, &SynthConfig::default(), 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaled_mix_for_230() {
        let m = ClassMix::PAPER_TRAINING.scaled_to(230).unwrap();
        assert_eq!(m.total(), 230);
        // quotas 40.68, 62.59, 61.02, 65.71 -> two extra seats to the largest remainders
        assert_eq!((m.microcytic, m.normocytic, m.macrocytic, m.non_anemic), (41, 62, 61, 66));
    }
}
