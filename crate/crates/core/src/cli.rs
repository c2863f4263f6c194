//! Command-line front end. Exit codes: 0 success, 2 usage, 3 data, 4 numeric failure.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{load_csv, load_unlabeled_csv, save_csv, synth_generate, write_labeled, ClassMix, ReferenceRanges, SynthConfig};
use crate::error::{Error, ErrorClass, Result};
use crate::experiment::{
    classify_confusion, compare, diagnosis_confusion, gradcheck_variants, random_gradcheck, train_stage,
    variant_name, CompareConfig, Stage, StageConfig,
};
use crate::metrics::{compare_report, EvalReport};
use crate::models::{
    load_model, save_model, ArchConfig, Family, NarxDelays, NarxMode, OutputEncoding, SequenceMode,
    DEFAULT_CONTEXT_INIT,
};
use crate::nn::{TrainConfig, UpdateMode};
use crate::pipeline::{emit_reports, run_pipeline, ModelPair, PipelineOptions, ReportDocument, ReportFormat, ReportMeta};
use crate::preprocess::{split_dataset, FeatureSpec, SplitFractions, SplitPreset};

#[derive(Debug, Parser)]
#[command(name = "hemanet", version, about = "Anemia diagnosis and subtype classification with FFNN, Elman and NARX networks")]
pub struct Cli {
    /// Seed for data generation, splitting, initialization and shuffling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Feature preset: full9 or paper7. Training defaults to full9; for
    /// predict and eval it is checked against the model files.
    #[arg(long, global = true, value_parser = parse_features)]
    pub features: Option<FeatureSpec>,

    /// Output format for reports and tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Suppress timestamps so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// JSON file overriding the reference ranges used by the rule oracle.
    #[arg(long, global = true, env = "HEMANET_RANGES")]
    pub ranges: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic CBC dataset.
    Synth(SynthArgs),
    /// Train a diagnosis or subtype network.
    Train(TrainArgs),
    /// Evaluate model files on a labeled dataset.
    Eval(EvalArgs),
    /// Produce patient reports for an unlabeled CSV.
    Predict(PredictArgs),
    /// Finite-difference gradient check on random configurations.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate all three families on one split.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of records.
    #[arg(short = 'n', long)]
    pub n: usize,
    /// Class counts `microcytic,normocytic,macrocytic,non_anemic`. Defaults to
    /// the 26:40:39:42 mix scaled to n.
    #[arg(long, allow_hyphen_values = true)]
    pub mix: Option<String>,
    /// Threshold clearance as a fraction of each reference-range width.
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Output CSV; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    /// 40% train, 40% test, 20% validation.
    Paper,
    /// 147/230 train, 83/230 test, no validation.
    PaperMaterials,
    /// Every record is used for training.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingChoice {
    Onehot3,
    Banded1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpdateChoice {
    FullBatch,
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ElmanChoice {
    SingleStep,
    FeatureSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NarxChoice {
    PerRecord,
    Stream,
}

/// Options shared by `train` and `compare`.
#[derive(Debug, Clone, Args)]
pub struct ModelOptions {
    /// Hidden layer width.
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, value_enum, default_value_t = UpdateChoice::FullBatch)]
    pub update: UpdateChoice,
    /// Stop after this many epochs without validation improvement and keep the best weights.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Subtype output encoding.
    #[arg(long, value_enum, default_value_t = EncodingChoice::Onehot3)]
    pub encoding: EncodingChoice,
    #[arg(long, value_enum, default_value_t = ElmanChoice::SingleStep)]
    pub elman_mode: ElmanChoice,
    /// Initial Elman context value per hidden unit.
    #[arg(long, default_value_t = DEFAULT_CONTEXT_INIT)]
    pub context_init: f64,
    #[arg(long, value_enum, default_value_t = NarxChoice::PerRecord)]
    pub narx_mode: NarxChoice,
    /// NARX input delay order.
    #[arg(long, default_value_t = 1)]
    pub input_delays: usize,
    /// NARX output delay order.
    #[arg(long, default_value_t = 1)]
    pub output_delays: usize,
    #[arg(long, value_enum, default_value_t = SplitChoice::Paper)]
    pub split: SplitChoice,
    /// Split without per-class stratification.
    #[arg(long)]
    pub no_stratify: bool,
    /// Fit the normalizer on train and test records together.
    #[arg(long)]
    pub joint_scaling: bool,
}

impl ModelOptions {
    fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let c = TrainConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            epochs: self.epochs,
            update_mode: match self.update {
                UpdateChoice::FullBatch => UpdateMode::FullBatch,
                UpdateChoice::PerSample => UpdateMode::PerSample,
            },
            hidden_size: self.hidden,
            seed,
            patience: self.patience,
        };
        c.validate()?;
        Ok(c)
    }

    fn arch(&self, family: Family) -> ArchConfig {
        ArchConfig {
            family,
            hidden: self.hidden,
            elman_mode: match self.elman_mode {
                ElmanChoice::SingleStep => SequenceMode::SingleStep,
                ElmanChoice::FeatureSequence => SequenceMode::FeatureSequence,
            },
            context_init: self.context_init,
            narx_mode: match self.narx_mode {
                NarxChoice::PerRecord => NarxMode::PerRecord,
                NarxChoice::Stream => NarxMode::Stream,
            },
            narx_delays: NarxDelays {
                input_delays: self.input_delays,
                output_delays: self.output_delays,
            },
        }
    }

    fn encoding(&self) -> OutputEncoding {
        match self.encoding {
            EncodingChoice::Onehot3 => OutputEncoding::OneHot3,
            EncodingChoice::Banded1 => OutputEncoding::Banded1,
        }
    }

    fn fractions(&self) -> SplitFractions {
        match self.split {
            SplitChoice::Paper => SplitPreset::Paper.fractions(),
            SplitChoice::PaperMaterials => SplitPreset::PaperMaterials.fractions(),
            SplitChoice::All => SplitFractions::ALL_TRAIN,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// ffnn, elman or narx.
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    /// diagnosis or classify.
    #[arg(long, value_parser = parse_stage, default_value = "diagnosis")]
    pub stage: Stage,
    #[command(flatten)]
    pub model: ModelOptions,
    /// Model file to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Loss curve CSV to write.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model files; one table row each, in the given order.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Labeled CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Diagnosis threshold.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Diagnosis model file.
    #[arg(long)]
    pub diagnosis: PathBuf,
    /// Subtype model file.
    #[arg(long)]
    pub classifier: PathBuf,
    /// CSV of records; any label column is ignored.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Report file; stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// ffnn, elman, narx or all. Elman and NARX are checked in both modes.
    #[arg(long, default_value = "all")]
    pub family: String,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Random configurations per variant.
    #[arg(long, default_value_t = 20)]
    pub configs: u64,
    /// Pass bound on the maximum relative error; defaults to max(1e-4, epsilon).
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Labeled CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelOptions,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Train the families one after another instead of in parallel.
    #[arg(long)]
    pub sequential: bool,
    /// Directory for reports, loss curves and model files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_features(s: &str) -> std::result::Result<FeatureSpec, String> {
    FeatureSpec::preset(s).map_err(|e| e.to_string())
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_stage(s: &str) -> std::result::Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mix(s: &str) -> Result<ClassMix> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::InvalidConfig(format!(
            "--mix needs four counts `microcytic,normocytic,macrocytic,non_anemic`, got `{s}`"
        )));
    }
    let mut v = [0i64; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("--mix entry `{p}` is not an integer")))?;
    }
    ClassMix::from_counts(v[0], v[1], v[2], v[3])
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn table(report: &EvalReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Text => report.to_text(),
        Format::Json => report.to_json()? + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["name", "accuracy", "precision", "recall", "f1", "n"])?;
            for m in &report.models {
                w.write_record([
                    m.name.clone(),
                    format!("{:?}", m.accuracy),
                    format!("{:?}", m.precision),
                    format!("{:?}", m.recall),
                    format!("{:?}", m.f1),
                    m.n.to_string(),
                ])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf-8")
        }
    })
}

fn ranges(cli: &Cli) -> Result<ReferenceRanges> {
    match &cli.ranges {
        Some(p) => ReferenceRanges::from_json_file(p),
        None => Ok(ReferenceRanges::default()),
    }
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let mix = match &a.mix {
        Some(s) => parse_mix(s)?,
        None => ClassMix::PAPER_TRAINING.scaled_to(a.n)?,
    };
    let config = SynthConfig {
        ranges: ranges(cli)?,
        margin: a.margin,
        ..SynthConfig::default()
    };
    let data = synth_generate(a.n, &mix, &config, cli.seed)?;
    match &a.out {
        Some(p) => save_csv(&data, p),
        None => write_labeled(&data, std::io::stdout().lock()),
    }
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let data = load_csv(&a.data)?;
    let config = StageConfig {
        arch: a.model.arch(a.family),
        stage: a.stage,
        classify_encoding: a.model.encoding(),
        feature_spec: cli.features.clone().unwrap_or_else(FeatureSpec::full9),
        train: a.model.train_config(cli.seed)?,
        joint_scaling: a.model.joint_scaling,
    };
    let split = split_dataset(&data, a.model.fractions(), cli.seed, !a.model.no_stratify)?;
    let out = train_stage(&config, &split.train, &split.validation, &split.test)?;
    save_model(&out.model, &a.out)?;
    if let Some(p) = &a.curve {
        fs::write(p, out.curve.to_csv())?;
    }
    let first = out.curve.train.first().copied().unwrap_or(f64::NAN);
    let last = out.curve.train.last().copied().unwrap_or(f64::NAN);
    let summary = match cli.format {
        Format::Json => {
            serde_json::to_string_pretty(&serde_json::json!({
                "family": a.family.as_str(),
                "stage": a.stage.as_str(),
                "hidden": a.model.hidden,
                "epochs_run": out.curve.epochs(),
                "initial_loss": first,
                "final_loss": last,
                "train_records": split.train.len(),
                "model": a.out.display().to_string(),
            }))? + "\n"
        }
        _ => format!(
            "trained {} {} (hidden {}) on {} records: {} epochs, loss {:.6} -> {:.6}\n",
            a.family,
            a.stage,
            a.model.hidden,
            split.train.len(),
            out.curve.epochs(),
            first,
            last
        ),
    };
    write_output(None, &summary)
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let data = load_csv(&a.data)?;
    let mut entries = Vec::new();
    for path in &a.models {
        let model = load_model(path)?;
        if let Some(spec) = &cli.features {
            if *spec != model.feature_spec {
                return Err(Error::Contract(format!(
                    "{} was trained on features `{}`, not `{spec}`",
                    path.display(),
                    model.feature_spec
                )));
            }
        }
        let cm = if model.encoding.is_subtype() {
            classify_confusion(&model, &data)?
        } else {
            diagnosis_confusion(&model, &data, a.threshold)?
        };
        let name = format!(
            "{} ({})",
            model.family().display_name(),
            path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
        );
        entries.push((name, cm));
    }
    write_output(None, &table(&compare_report(&entries)?, cli.format)?)
}

fn cmd_predict(cli: &Cli, a: &PredictArgs) -> Result<()> {
    let pair = ModelPair::new(load_model(&a.diagnosis)?, load_model(&a.classifier)?)?;
    let records = load_unlabeled_csv(&a.data)?;
    let opts = PipelineOptions {
        threshold: a.threshold,
        expected_features: cli.features.clone(),
        ..Default::default()
    };
    let out = run_pipeline(&pair, &records, &opts)?;
    let doc = ReportDocument {
        meta: ReportMeta::new(
            vec![a.diagnosis.display().to_string(), a.classifier.display().to_string()],
            a.threshold,
            cli.deterministic,
        ),
        patients: out.reports,
    };
    write_output(a.out.as_deref(), &emit_reports(&doc, cli.format.into())?)
}

fn cmd_gradcheck(cli: &Cli, a: &GradcheckArgs) -> Result<bool> {
    let families = if a.family == "all" {
        Family::ALL.to_vec()
    } else {
        vec![a.family.parse()?]
    };
    let tolerance = a.tolerance.unwrap_or(a.epsilon.max(1e-4));
    let mut rows = Vec::new();
    let mut all_pass = true;
    for f in families {
        for arch in gradcheck_variants(f) {
            let mut worst = 0.0f64;
            for i in 0..a.configs {
                let r = random_gradcheck(&arch, cli.seed.wrapping_add(i), a.epsilon)?;
                worst = worst.max(r.max_relative_error);
            }
            let pass = worst < tolerance;
            all_pass &= pass;
            rows.push((variant_name(&arch), worst, pass));
        }
    }
    let text = match cli.format {
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(n, w, p)| serde_json::json!({"variant": n, "max_relative_error": w, "pass": p}))
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({
                "epsilon": a.epsilon,
                "tolerance": tolerance,
                "configs": a.configs,
                "variants": v,
            }))? + "\n"
        }
        _ => {
            let mut s = String::new();
            for (n, w, p) in &rows {
                s.push_str(&format!(
                    "{n:<24} max relative error {w:.3e}  {}\n",
                    if *p { "PASS" } else { "FAIL" }
                ));
            }
            s
        }
    };
    write_output(None, &text)?;
    Ok(all_pass)
}

fn cmd_compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    let data = load_csv(&a.data)?;
    let cfg = CompareConfig {
        families: Family::ALL.to_vec(),
        arch: a.model.arch(Family::Ffnn),
        classify_encoding: a.model.encoding(),
        feature_spec: cli.features.clone().unwrap_or_else(FeatureSpec::full9),
        train: a.model.train_config(cli.seed)?,
        split: a.model.fractions(),
        stratified: !a.model.no_stratify,
        joint_scaling: a.model.joint_scaling,
        threshold: a.threshold,
        parallel: !a.sequential,
    };
    let outcome = compare(&data, &cfg, cli.seed)?;
    let diag = outcome.diagnosis_report()?;
    let pipe = outcome.pipeline_report()?;
    let report = match cli.format {
        Format::Json => {
            serde_json::to_string_pretty(&serde_json::json!({
                "seed": cli.seed,
                "split": outcome.split.sizes(),
                "diagnosis": diag,
                "pipeline": pipe,
            }))? + "\n"
        }
        f => {
            let (tr, te, va) = outcome.split.sizes();
            format!(
                "seed {} | split train {tr} / test {te} / validation {va}\n\n{}\n{}",
                cli.seed,
                table(&diag, f)?,
                table(&pipe, f)?
            )
        }
    };
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        let ext = match cli.format {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "txt",
        };
        fs::write(dir.join(format!("report.{ext}")), &report)?;
        for run in &outcome.runs {
            for (stage, out) in [(Stage::Diagnosis, &run.diagnosis), (Stage::Classify, &run.classifier)] {
                let stem = format!("{}_{}", run.family, stage);
                fs::write(dir.join(format!("{stem}_curve.csv")), out.curve.to_csv())?;
                save_model(&out.model, dir.join(format!("{stem}.json")))?;
            }
        }
    }
    write_output(None, &report)
}

/// Runs the parsed command. `Ok(false)` means a check ran and failed.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a).map(|_| true),
        Command::Train(a) => cmd_train(cli, a).map(|_| true),
        Command::Eval(a) => cmd_eval(cli, a).map(|_| true),
        Command::Predict(a) => cmd_predict(cli, a).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(cli, a),
        Command::Compare(a) => cmd_compare(cli, a).map(|_| true),
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(true) => 0,
        Ok(false) => 4,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.class())
        }
    }
}
