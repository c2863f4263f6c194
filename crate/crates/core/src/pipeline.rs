//! Two-stage flow: diagnose every record, classify only the positives, and
//! render patient reports.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{validate_record_with, AnemiaLabel, CbcRecord, LabeledRecord, PlausibilityBounds};
use crate::error::{Error, Result};
use crate::models::{OutputEncoding, TrainedModel};
use crate::preprocess::FeatureSpec;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisResult {
    /// 0 healthy, 1 anemic.
    pub verdict: u8,
    pub raw: f64,
    pub threshold: f64,
}

impl DiagnosisResult {
    /// A raw output exactly at the threshold counts as anemic.
    pub fn from_raw(raw: f64, threshold: f64) -> Self {
        DiagnosisResult {
            verdict: (raw >= threshold) as u8,
            raw,
            threshold,
        }
    }

    pub fn is_anemic(&self) -> bool {
        self.verdict == 1
    }
}

/// A diagnosis network (binary output) and a subtype network.
#[derive(Debug, Clone)]
pub struct ModelPair {
    pub diagnosis: TrainedModel,
    pub classifier: TrainedModel,
}

impl ModelPair {
    pub fn new(diagnosis: TrainedModel, classifier: TrainedModel) -> Result<Self> {
        if diagnosis.encoding != OutputEncoding::Binary {
            return Err(Error::Contract(format!(
                "diagnosis model must use the binary encoding, found {}",
                diagnosis.encoding
            )));
        }
        if !classifier.encoding.is_subtype() {
            return Err(Error::Contract("classifier model must use onehot3 or banded1".into()));
        }
        Ok(ModelPair {
            diagnosis,
            classifier,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub threshold: f64,
    /// Feature set the caller expects both models to use.
    pub expected_features: Option<FeatureSpec>,
    pub bounds: PlausibilityBounds,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            threshold: DEFAULT_THRESHOLD,
            expected_features: None,
            bounds: PlausibilityBounds::default(),
        }
    }
}

fn check_spec(model: &TrainedModel, expected: Option<&FeatureSpec>) -> Result<()> {
    match expected {
        Some(spec) if *spec != model.feature_spec => Err(Error::Contract(format!(
            "model was trained on features `{}` but `{spec}` was requested",
            model.feature_spec
        ))),
        _ => Ok(()),
    }
}

/// Diagnoses one record with a diagnosis network.
pub fn diagnose(model: &TrainedModel, record: &CbcRecord, opts: &PipelineOptions) -> Result<DiagnosisResult> {
    check_spec(model, opts.expected_features.as_ref())?;
    if model.encoding != OutputEncoding::Binary {
        return Err(Error::Contract("diagnosis needs a binary-encoded model".into()));
    }
    validate_record_with(record, &opts.bounds)?;
    let raw = model.predict_raw(std::slice::from_ref(record), None)?;
    Ok(DiagnosisResult::from_raw(raw[0][0], opts.threshold))
}

/// Subtype of a record already diagnosed as anemic.
pub fn classify(model: &TrainedModel, record: &CbcRecord, diagnosis: &DiagnosisResult) -> Result<AnemiaLabel> {
    if !diagnosis.is_anemic() {
        return Err(Error::Contract("classify called on a record diagnosed healthy".into()));
    }
    let raw = model.predict_raw(std::slice::from_ref(record), None)?;
    model.encoding.decode_subtype(&raw[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawOutputs {
    pub diagnosis: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientReport {
    /// Zero-based input row.
    pub id: usize,
    pub verdict: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<AnemiaLabel>,
    pub raw: RawOutputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PatientReport {
    /// Four-way label, or `None` for a failed record.
    pub fn label(&self) -> Option<AnemiaLabel> {
        match self.verdict? {
            0 => Some(AnemiaLabel::NonAnemic),
            _ => self.subtype,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub reports: Vec<PatientReport>,
    /// Number of records the subtype network was evaluated on.
    pub classifier_invocations: usize,
}

/// Runs both stages over unlabeled records.
pub fn run_pipeline(pair: &ModelPair, records: &[CbcRecord], opts: &PipelineOptions) -> Result<PipelineOutput> {
    run(pair, records, None, opts)
}

/// As [`run_pipeline`], with the true labels available as teacher taps for
/// stream-mode NARX networks. The labels never influence other families.
pub fn run_pipeline_labeled(
    pair: &ModelPair,
    records: &[LabeledRecord],
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    let recs: Vec<CbcRecord> = records.iter().map(|r| r.record).collect();
    let labels: Vec<AnemiaLabel> = records.iter().map(|r| r.label).collect();
    run(pair, &recs, Some(&labels), opts)
}

fn run(
    pair: &ModelPair,
    records: &[CbcRecord],
    labels: Option<&[AnemiaLabel]>,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    check_spec(&pair.diagnosis, opts.expected_features.as_ref())?;
    check_spec(&pair.classifier, opts.expected_features.as_ref())?;
    for m in [&pair.diagnosis, &pair.classifier] {
        if m.network.needs_targets() && labels.is_none() {
            return Err(Error::Contract(
                "a stream-mode NARX model needs labeled records; use a per-record model for prediction".into(),
            ));
        }
    }

    let mut reports: Vec<PatientReport> = records
        .iter()
        .enumerate()
        .map(|(id, r)| PatientReport {
            id,
            verdict: None,
            subtype: None,
            raw: RawOutputs {
                diagnosis: None,
                classify: None,
            },
            error: validate_record_with(r, &opts.bounds).err().map(|e| e.to_string()),
        })
        .collect();

    let valid: Vec<usize> = (0..records.len()).filter(|&i| reports[i].error.is_none()).collect();
    let pick = |idx: &[usize]| -> (Vec<CbcRecord>, Option<Vec<AnemiaLabel>>) {
        (
            idx.iter().map(|&i| records[i]).collect(),
            labels.map(|ls| idx.iter().map(|&i| ls[i]).collect()),
        )
    };

    let (recs, labs) = pick(&valid);
    let raw_diag = pair.diagnosis.predict_raw(&recs, labs.as_deref())?;
    let mut positives = Vec::new();
    for (&i, y) in valid.iter().zip(&raw_diag) {
        let d = DiagnosisResult::from_raw(y[0], opts.threshold);
        reports[i].verdict = Some(d.verdict);
        reports[i].raw.diagnosis = Some(d.raw);
        if d.is_anemic() {
            positives.push(i);
        }
    }

    let (recs, labs) = pick(&positives);
    let raw_cls = if positives.is_empty() {
        Vec::new()
    } else {
        pair.classifier.predict_raw(&recs, labs.as_deref())?
    };
    for (&i, y) in positives.iter().zip(&raw_cls) {
        reports[i].subtype = Some(pair.classifier.encoding.decode_subtype(y)?);
        reports[i].raw.classify = Some(y.clone());
    }
    Ok(PipelineOutput {
        reports,
        classifier_invocations: raw_cls.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}` (expected text, json or csv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model_files: Vec<String>,
    pub threshold: f64,
    /// RFC 3339 timestamp, `null` in deterministic mode.
    pub created: Option<String>,
}

impl ReportMeta {
    pub fn new(model_files: Vec<String>, threshold: f64, deterministic: bool) -> Self {
        ReportMeta {
            model_files,
            threshold,
            created: (!deterministic).then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub meta: ReportMeta,
    pub patients: Vec<PatientReport>,
}

fn verdict_word(r: &PatientReport) -> &'static str {
    match r.verdict {
        Some(0) => "NON-ANEMIC",
        Some(_) => "ANEMIC",
        None => "ERROR",
    }
}

/// Renders reports. Text is one line per patient after a metadata header.
pub fn emit_reports(doc: &ReportDocument, format: ReportFormat) -> Result<String> {
    let mut s = String::new();
    match format {
        ReportFormat::Text => {
            let _ = writeln!(
                s,
                "# models: {} | threshold: {} | created: {}",
                doc.meta.model_files.join(", "),
                doc.meta.threshold,
                doc.meta.created.as_deref().unwrap_or("-")
            );
            for r in &doc.patients {
                let _ = match (&r.error, r.raw.diagnosis, r.subtype) {
                    (Some(e), _, _) => writeln!(s, "#{}: ERROR ({e})", r.id),
                    (None, Some(p), Some(sub)) => writeln!(s, "#{}: ANEMIC, {sub} (p={p:.2})", r.id),
                    (None, Some(p), None) => writeln!(s, "#{}: {} (p={p:.2})", r.id, verdict_word(r)),
                    (None, None, _) => writeln!(s, "#{}: {}", r.id, verdict_word(r)),
                };
            }
        }
        ReportFormat::Json => {
            s = serde_json::to_string_pretty(doc)?;
            s.push('\n');
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["id", "verdict", "subtype", "raw_diagnosis"])?;
            for r in &doc.patients {
                w.write_record([
                    r.id.to_string(),
                    r.verdict.map(|v| v.to_string()).unwrap_or_default(),
                    r.subtype.map(|l| l.token().to_string()).unwrap_or_default(),
                    r.raw.diagnosis.map(|p| format!("{p:?}")).unwrap_or_default(),
                ])?;
            }
            s = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
                .expect("csv writer emits utf-8");
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_record;
    use crate::models::{ArchConfig, Family, NetworkModel, TrainMeta};
    use crate::nn::{LayerParams, Network, TrainConfig};
    use crate::models::FfnnModel;
    use crate::preprocess::Normalizer;

    fn meta() -> TrainMeta {
        TrainMeta {
            seed: 0,
            config: TrainConfig::default(),
            epochs_run: 0,
            final_loss: None,
            joint_scaling: false,
        }
    }

    /// Output is σ(b) everywhere: a constant network.
    fn constant(encoding: OutputEncoding, bias: &[f64]) -> TrainedModel {
        let mut out = LayerParams::zeros(encoding.width(), 2);
        out.biases.copy_from_slice(bias);
        let net = FfnnModel::new(LayerParams::zeros(2, 9), out).unwrap();
        let rows = vec![vec![0.0; 9], vec![1.0; 9]];
        TrainedModel::new(
            NetworkModel::Ffnn(net),
            FeatureSpec::full9(),
            encoding,
            Normalizer::fit(&rows).unwrap(),
            meta(),
        )
        .unwrap()
    }

    fn pair(diag_bias: f64) -> ModelPair {
        ModelPair::new(
            constant(OutputEncoding::Binary, &[diag_bias]),
            constant(OutputEncoding::OneHot3, &[2.0, 0.0, -1.0]),
        )
        .unwrap()
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(DiagnosisResult::from_raw(0.5, 0.5).verdict, 1);
        assert_eq!(DiagnosisResult::from_raw(0.1, 0.5).verdict, 0);
        let d = diagnose(&pair(0.0).diagnosis, &sample_record(), &PipelineOptions::default()).unwrap();
        assert_eq!((d.raw, d.verdict), (0.5, 1));
    }

    #[test]
    fn healthy_batch_never_reaches_classifier() {
        let p = pair(-3.0);
        let recs = vec![sample_record(); 5];
        let out = run_pipeline(&p, &recs, &PipelineOptions::default()).unwrap();
        assert_eq!(out.classifier_invocations, 0);
        assert!(out.reports.iter().all(|r| r.verdict == Some(0) && r.subtype.is_none()));
    }

    #[test]
    fn invalid_rows_are_isolated() {
        let p = pair(3.0);
        let mut bad = sample_record();
        bad.hct = 105.0;
        let recs = vec![sample_record(), bad, sample_record()];
        let out = run_pipeline(&p, &recs, &PipelineOptions::default()).unwrap();
        assert_eq!(out.reports.len(), 3);
        assert_eq!(out.classifier_invocations, 2);
        assert!(out.reports[1].error.as_deref().unwrap().contains("hct out of (0,100)"));
        assert_eq!(out.reports[0].subtype, Some(AnemiaLabel::Microcytic));
        assert_eq!(out.reports[2].id, 2);
    }

    #[test]
    fn classify_refuses_healthy_verdict() {
        let p = pair(0.0);
        let healthy = DiagnosisResult::from_raw(0.2, 0.5);
        assert!(matches!(
            classify(&p.classifier, &sample_record(), &healthy),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn feature_spec_mismatch_is_refused() {
        let opts = PipelineOptions {
            expected_features: Some(FeatureSpec::paper7()),
            ..Default::default()
        };
        assert!(diagnose(&pair(0.0).diagnosis, &sample_record(), &opts).is_err());
        assert!(run_pipeline(&pair(0.0), &[sample_record()], &opts).is_err());
    }

    #[test]
    fn stream_narx_needs_labels() {
        let mut arch = ArchConfig::new(Family::Narx, 3);
        arch.narx_mode = crate::models::NarxMode::Stream;
        let net = NetworkModel::init(&arch, 9, 1, 0).unwrap();
        let rows = vec![vec![0.0; 9], vec![1.0; 9]];
        let diag = TrainedModel::new(
            net,
            FeatureSpec::full9(),
            OutputEncoding::Binary,
            Normalizer::fit(&rows).unwrap(),
            meta(),
        )
        .unwrap();
        let p = ModelPair::new(diag, constant(OutputEncoding::OneHot3, &[0.0; 3])).unwrap();
        assert!(matches!(
            run_pipeline(&p, &[sample_record()], &PipelineOptions::default()),
            Err(Error::Contract(_))
        ));
        let labeled = [LabeledRecord {
            record: sample_record(),
            label: AnemiaLabel::NonAnemic,
        }];
        assert!(run_pipeline_labeled(&p, &labeled, &PipelineOptions::default()).is_ok());
        assert!(p.diagnosis.network.param_count() > 0);
    }

    fn document(deterministic: bool) -> ReportDocument {
        let out = run_pipeline(&pair(-2.4), &[sample_record()], &PipelineOptions::default()).unwrap();
        ReportDocument {
            meta: ReportMeta::new(vec!["d.json".into(), "c.json".into()], 0.5, deterministic),
            patients: out.reports,
        }
    }

    #[test]
    fn text_line_shape() {
        let text = emit_reports(&document(true), ReportFormat::Text).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "#0: NON-ANEMIC (p=0.08)");
    }

    #[test]
    fn json_round_trip_and_empty_document() {
        let doc = document(false);
        assert!(doc.meta.created.is_some());
        let text = emit_reports(&doc, ReportFormat::Json).unwrap();
        let back: ReportDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back, doc);

        let empty = ReportDocument {
            meta: ReportMeta::new(vec![], 0.5, true),
            patients: vec![],
        };
        let v: serde_json::Value = serde_json::from_str(&emit_reports(&empty, ReportFormat::Json).unwrap()).unwrap();
        assert_eq!(v["meta"]["created"], serde_json::Value::Null);
        assert_eq!(v["patients"], serde_json::json!([]));
        assert_eq!(emit_reports(&empty, ReportFormat::Csv).unwrap(), "id,verdict,subtype,raw_diagnosis\n");
        assert_eq!(emit_reports(&empty, ReportFormat::Text).unwrap().lines().count(), 1);
    }

    #[test]
    fn unknown_format_token() {
        assert!("xml".parse::<ReportFormat>().is_err());
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
    }
}
