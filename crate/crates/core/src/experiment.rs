//! Training single stages and the three-family comparison.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AnemiaLabel, LabeledRecord};
use crate::error::{Error, Result};
use crate::metrics::{compare_report, ConfusionMatrix, EvalReport};
use crate::models::{
    ArchConfig, Family, NarxDelays, NarxMode, NetworkModel, OutputEncoding, SequenceMode, TrainMeta, TrainedModel,
};
use crate::nn::{gradient_check, train_loop, GradCheckReport, LossCurve, Network, Samples, TrainConfig};
use crate::pipeline::{run_pipeline_labeled, ModelPair, PipelineOptions};
use crate::preprocess::{split_dataset, DatasetSplit, FeatureSpec, Normalizer, SplitFractions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Binary healthy/anemic network trained on every record.
    Diagnosis,
    /// Subtype network trained on anemic records only.
    Classify,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Diagnosis => "diagnosis",
            Stage::Classify => "classify",
        }
    }

    pub fn accepts(self, label: AnemiaLabel) -> bool {
        match self {
            Stage::Diagnosis => true,
            Stage::Classify => label.is_anemic(),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagnosis" => Ok(Stage::Diagnosis),
            "classify" => Ok(Stage::Classify),
            other => Err(Error::InvalidConfig(format!("unknown stage `{other}`"))),
        }
    }
}

/// Everything `train_stage` needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    pub arch: ArchConfig,
    pub stage: Stage,
    /// Subtype encoding; the diagnosis stage always uses `Binary`.
    pub classify_encoding: OutputEncoding,
    pub feature_spec: FeatureSpec,
    pub train: TrainConfig,
    /// Fit the normalizer on train and test records together.
    pub joint_scaling: bool,
}

impl StageConfig {
    pub fn encoding(&self) -> OutputEncoding {
        match self.stage {
            Stage::Diagnosis => OutputEncoding::Binary,
            Stage::Classify => self.classify_encoding,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub model: TrainedModel,
    pub curve: LossCurve,
}

fn samples(
    records: &[LabeledRecord],
    spec: &FeatureSpec,
    norm: &Normalizer,
    encoding: OutputEncoding,
) -> Result<Samples> {
    let mut s = Samples::default();
    for r in records {
        s.inputs.push(norm.apply(&spec.encode(&r.record))?);
        s.targets.push(encoding.target_for(r.label)?);
    }
    Ok(s)
}

/// Trains one stage network. Records the stage cannot use (healthy records for
/// the classifier) are dropped from every part. `scaling_extra` joins the
/// normalizer fit only when joint scaling is on.
pub fn train_stage(
    config: &StageConfig,
    train: &[LabeledRecord],
    validation: &[LabeledRecord],
    scaling_extra: &[LabeledRecord],
) -> Result<StageOutcome> {
    config.train.validate()?;
    let keep = |rs: &[LabeledRecord]| -> Vec<LabeledRecord> {
        rs.iter().filter(|r| config.stage.accepts(r.label)).copied().collect()
    };
    let (train, validation) = (keep(train), keep(validation));
    if train.is_empty() {
        return Err(Error::EmptyInput("training records for this stage"));
    }
    let spec = &config.feature_spec;
    let mut fit_rows: Vec<Vec<f64>> = train.iter().map(|r| spec.encode(&r.record)).collect();
    if config.joint_scaling {
        fit_rows.extend(keep(scaling_extra).iter().map(|r| spec.encode(&r.record)));
    }
    let normalizer = Normalizer::fit(&fit_rows)?;
    let encoding = config.encoding();
    let train_s = samples(&train, spec, &normalizer, encoding)?;
    let val_s = samples(&validation, spec, &normalizer, encoding)?;

    let arch = ArchConfig {
        hidden: config.train.hidden_size,
        ..config.arch
    };
    let mut network = NetworkModel::init(&arch, spec.len(), encoding.width(), config.train.seed)?;
    let curve = train_loop(
        &mut network,
        &train_s,
        (!val_s.is_empty()).then_some(&val_s),
        &config.train,
    )?;
    let meta = TrainMeta {
        seed: config.train.seed,
        config: config.train,
        epochs_run: curve.epochs(),
        final_loss: curve.train.last().copied(),
        joint_scaling: config.joint_scaling,
    };
    let model = TrainedModel::new(network, spec.clone(), encoding, normalizer, meta)?;
    Ok(StageOutcome { model, curve })
}

/// Confusion matrix of a diagnosis network against the binary truth.
pub fn diagnosis_confusion(model: &TrainedModel, records: &[LabeledRecord], threshold: f64) -> Result<ConfusionMatrix> {
    let recs: Vec<_> = records.iter().map(|r| r.record).collect();
    let labels: Vec<_> = records.iter().map(|r| r.label).collect();
    let raw = model.predict_raw(&recs, Some(&labels))?;
    ConfusionMatrix::from_pairs(
        2,
        raw.iter()
            .zip(&labels)
            .map(|(y, l)| (l.diagnosis() as usize, (y[0] >= threshold) as usize)),
    )
}

/// Confusion matrix of a subtype network on anemic records, 3 × 3.
pub fn classify_confusion(model: &TrainedModel, records: &[LabeledRecord]) -> Result<ConfusionMatrix> {
    let anemic: Vec<_> = records.iter().filter(|r| r.label.is_anemic()).copied().collect();
    let recs: Vec<_> = anemic.iter().map(|r| r.record).collect();
    let labels: Vec<_> = anemic.iter().map(|r| r.label).collect();
    let raw = model.predict_raw(&recs, Some(&labels))?;
    let mut cm = ConfusionMatrix::new(3);
    for (y, l) in raw.iter().zip(&labels) {
        let p = model.encoding.decode_subtype(y)?;
        cm.record(
            l.subtype_index().expect("anemic label"),
            p.subtype_index().expect("decoded subtype"),
        )?;
    }
    Ok(cm)
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub families: Vec<Family>,
    /// Architecture options; the family field is replaced per run.
    pub arch: ArchConfig,
    pub classify_encoding: OutputEncoding,
    pub feature_spec: FeatureSpec,
    pub train: TrainConfig,
    pub split: SplitFractions,
    pub stratified: bool,
    pub joint_scaling: bool,
    pub threshold: f64,
    /// Train the families on separate threads.
    pub parallel: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            families: Family::ALL.to_vec(),
            arch: ArchConfig::new(Family::Ffnn, TrainConfig::default().hidden_size),
            classify_encoding: OutputEncoding::OneHot3,
            feature_spec: FeatureSpec::full9(),
            train: TrainConfig::default(),
            split: SplitFractions::PAPER,
            stratified: true,
            joint_scaling: false,
            threshold: 0.5,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FamilyRun {
    pub family: Family,
    pub diagnosis: StageOutcome,
    pub classifier: StageOutcome,
    /// Test-set diagnosis matrix, 2 × 2.
    pub diagnosis_cm: ConfusionMatrix,
    /// Test-set matrix of the full pipeline, 4 × 4 over label indices.
    pub pipeline_cm: ConfusionMatrix,
    pub classifier_invocations: usize,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub split: DatasetSplit,
    pub runs: Vec<FamilyRun>,
}

fn run_family(family: Family, cfg: &CompareConfig, split: &DatasetSplit) -> Result<FamilyRun> {
    let stage_cfg = |stage| StageConfig {
        arch: ArchConfig { family, ..cfg.arch },
        stage,
        classify_encoding: cfg.classify_encoding,
        feature_spec: cfg.feature_spec.clone(),
        train: cfg.train,
        joint_scaling: cfg.joint_scaling,
    };
    let diagnosis = train_stage(&stage_cfg(Stage::Diagnosis), &split.train, &split.validation, &split.test)?;
    let classifier = train_stage(&stage_cfg(Stage::Classify), &split.train, &split.validation, &split.test)?;
    let diagnosis_cm = diagnosis_confusion(&diagnosis.model, &split.test, cfg.threshold)?;
    let pair = ModelPair::new(diagnosis.model.clone(), classifier.model.clone())?;
    let opts = PipelineOptions {
        threshold: cfg.threshold,
        ..Default::default()
    };
    let out = run_pipeline_labeled(&pair, &split.test, &opts)?;
    let pipeline_cm = ConfusionMatrix::from_labels(
        out.reports
            .iter()
            .zip(&split.test)
            .map(|(rep, truth)| (truth.label, rep.label().unwrap_or(AnemiaLabel::NonAnemic))),
    );
    Ok(FamilyRun {
        family,
        diagnosis,
        classifier,
        diagnosis_cm,
        pipeline_cm,
        classifier_invocations: out.classifier_invocations,
    })
}

/// Splits the data, then trains and evaluates both stages of every family.
///
/// Every family uses the same seed, so a run matches a standalone `train_stage`
/// with that seed. Threaded and sequential execution give identical results.
pub fn compare(data: &[LabeledRecord], cfg: &CompareConfig, seed: u64) -> Result<CompareOutcome> {
    if cfg.families.is_empty() {
        return Err(Error::InvalidConfig("no model families to compare".into()));
    }
    let split = split_dataset(data, cfg.split, seed, cfg.stratified)?;
    if split.test.is_empty() {
        return Err(Error::InvalidConfig("comparison needs a non-empty test part".into()));
    }
    let cfg = CompareConfig {
        train: TrainConfig { seed, ..cfg.train },
        ..cfg.clone()
    };
    let results: Vec<Result<FamilyRun>> = if cfg.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = cfg
                .families
                .iter()
                .map(|&f| {
                    let (cfg, split) = (&cfg, &split);
                    s.spawn(move || run_family(f, cfg, split))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .collect()
        })
    } else {
        cfg.families.iter().map(|&f| run_family(f, &cfg, &split)).collect()
    };
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CompareOutcome { split, runs })
}

impl CompareOutcome {
    /// Test-set diagnosis table with "anemic" as the positive class.
    pub fn diagnosis_report(&self) -> Result<EvalReport> {
        let entries: Vec<_> = self
            .runs
            .iter()
            .map(|r| (r.family.display_name().to_string(), r.diagnosis_cm.clone()))
            .collect();
        Ok(compare_report(&entries)?.with_title("diagnosis (test set, positive = anemic)"))
    }

    /// Test-set four-way table of the full pipeline, macro-averaged.
    pub fn pipeline_report(&self) -> Result<EvalReport> {
        let entries: Vec<_> = self
            .runs
            .iter()
            .map(|r| (r.family.display_name().to_string(), r.pipeline_cm.clone()))
            .collect();
        Ok(compare_report(&entries)?.with_title("four-way pipeline (test set, macro average)"))
    }
}

/// Architectures covering every family and mode: FFNN, Elman in both sequence
/// modes and NARX in both delay modes.
pub fn gradcheck_variants(family: Family) -> Vec<ArchConfig> {
    let base = ArchConfig::new(family, 4);
    match family {
        Family::Ffnn => vec![base],
        Family::Elman => [SequenceMode::SingleStep, SequenceMode::FeatureSequence]
            .into_iter()
            .map(|elman_mode| ArchConfig { elman_mode, ..base })
            .collect(),
        Family::Narx => [NarxMode::PerRecord, NarxMode::Stream]
            .into_iter()
            .map(|narx_mode| ArchConfig { narx_mode, ..base })
            .collect(),
    }
}

pub fn variant_name(arch: &ArchConfig) -> String {
    match arch.family {
        Family::Ffnn => "ffnn".into(),
        Family::Elman => format!("elman/{}", serde_plain(&arch.elman_mode)),
        Family::Narx => format!("narx/{}", serde_plain(&arch.narx_mode)),
    }
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Finite-difference check of one seeded random configuration of `arch`.
///
/// Sizes are drawn small (2–5 features, 2–6 hidden units, 1–3 outputs, a batch
/// of 4), parameters uniformly from [-0.5, 0.5], inputs from [-1, 1] and
/// targets from [0, 1]. Wider parameter draws occasionally saturate a unit so
/// far that its gradient is near 1e-8, where the relative error stops being
/// informative.
/// For Elman the initial context is drawn from [0, 1]; for NARX the delay
/// orders from 0–2 (inputs) and 1–2 (outputs). The loss is the batch mean, so
/// stream-mode taps are exercised.
pub fn random_gradcheck(arch: &ArchConfig, seed: u64, epsilon: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = rng.gen_range(2..=5);
    let outputs = rng.gen_range(1..=3);
    let arch = ArchConfig {
        hidden: rng.gen_range(2..=6),
        context_init: rng.gen_range(0.0..=1.0),
        narx_delays: NarxDelays {
            input_delays: rng.gen_range(0..=2),
            output_delays: rng.gen_range(1..=2),
        },
        ..*arch
    };
    let mut net = NetworkModel::init(&arch, features, outputs, seed)?;
    let params: Vec<f64> = (0..net.param_count()).map(|_| rng.gen_range(-0.5..=0.5)).collect();
    net.set_params(&params)?;
    let batch = 4;
    let xs: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..features).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    let ts: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..outputs).map(|_| rng.gen_range(0.0..=1.0)).collect())
        .collect();
    let inputs = net.prepare(&xs, Some(&ts))?;
    let mut probe = net.clone();
    gradient_check(
        |p| {
            probe.set_params(p)?;
            probe.batch_loss_grad(&inputs, &ts)
        },
        &params,
        epsilon,
    )
}
