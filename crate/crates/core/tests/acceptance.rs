//! Acceptance suite: nine criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always print:
//! `cargo test -p hemanet --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hemanet::data::{rule_label, save_csv, synth_generate, AnemiaLabel, ClassMix, LabeledRecord, ReferenceRanges, SynthConfig};
use hemanet::experiment::{compare, gradcheck_variants, variant_name, CompareConfig};
use hemanet::metrics::{f1_score, ConfusionMatrix};
use hemanet::models::{
    elman_forward, ffnn_forward, load_model, narx_forward, save_model, ArchConfig, ElmanModel, Family, FfnnModel,
    NarxDelays, NarxMode, NarxModel, NetworkModel, OutputEncoding, TrainMeta, TrainedModel,
};
use hemanet::nn::{Network, TrainConfig};
use hemanet::pipeline::{run_pipeline_labeled, ModelPair, PipelineOptions};
use hemanet::preprocess::{split_dataset, FeatureSpec, Normalizer, SplitFractions, SplitPreset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: impl Into<String>, bad: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(bad.into())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
}

/// Mean over samples of the per-sample mean squared error, from forward passes only.
fn forward_loss(net: &NetworkModel, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (x, t) in inputs.iter().zip(targets) {
        let y = net.forward(x).unwrap();
        total += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    }
    total / inputs.len() as f64
}

/// 1. Analytic gradients against central differences of the forward loss.
fn gradients() -> Outcome {
    let start = Instant::now();
    let eps = 1e-5;
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for family in Family::ALL {
        for base in gradcheck_variants(family) {
            for seed in 0..20u64 {
                let mut r = rng(1000 + seed);
                let (f, h, o) = (r.gen_range(2..=5), r.gen_range(2..=6), r.gen_range(1..=3));
                let arch = ArchConfig {
                    hidden: h,
                    context_init: r.gen_range(0.0..=1.0),
                    narx_delays: NarxDelays {
                        input_delays: r.gen_range(0..=2),
                        output_delays: r.gen_range(1..=2),
                    },
                    ..base
                };
                let mut net = NetworkModel::init(&arch, f, o, seed).unwrap();
                let params = uniform(&mut r, net.param_count(), -0.5, 0.5);
                net.set_params(&params).unwrap();
                let xs: Vec<Vec<f64>> = (0..4).map(|_| uniform(&mut r, f, -1.0, 1.0)).collect();
                let ts: Vec<Vec<f64>> = (0..4).map(|_| uniform(&mut r, o, 0.0, 1.0)).collect();
                let inputs = net.prepare(&xs, Some(&ts)).unwrap();
                let (_, analytic) = net.batch_loss_grad(&inputs, &ts).unwrap();

                let mut probe = net.clone();
                let mut p = params.clone();
                let mut max_err: f64 = 0.0;
                for i in 0..p.len() {
                    p[i] = params[i] + eps;
                    probe.set_params(&p).unwrap();
                    let plus = forward_loss(&probe, &inputs, &ts);
                    p[i] = params[i] - eps;
                    probe.set_params(&p).unwrap();
                    let minus = forward_loss(&probe, &inputs, &ts);
                    p[i] = params[i];
                    let numeric = (plus - minus) / (2.0 * eps);
                    let a = analytic[i];
                    let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                    max_err = max_err.max(err);
                }
                let e = worst.entry(variant_name(&base)).or_default();
                *e = e.max(max_err);
            }
        }
    }
    let elapsed = start.elapsed();
    let overall = worst.values().cloned().fold(0.0, f64::max);
    let detail = worst
        .iter()
        .map(|(k, v)| format!("{k} {v:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        overall < 1e-4 && elapsed < Duration::from_secs(30),
        format!("max rel err {overall:.2e} over 5 variants x 20 configs in {elapsed:.2?} ({detail})"),
        format!("max rel err {overall:.2e}, time {elapsed:.2?} ({detail})"),
    )
}

/// Table layout: all 230 records truly positive, `tp` of them recovered.
fn table_matrix(tp: u64) -> ConfusionMatrix {
    ConfusionMatrix::from_counts(&[vec![0, 0], vec![230 - tp, tp]]).unwrap()
}

/// 2. Accuracy and F1 arithmetic of the comparison tables.
fn metric_reproduction() -> Outcome {
    let mut problems = Vec::new();
    for (tp, want) in [(201, 0.8739), (209, 0.9087), (215, 0.9348)] {
        let acc = table_matrix(tp).accuracy().unwrap();
        if (acc - want).abs() > 5e-5 {
            problems.push(format!("accuracy {tp}/230 = {acc}"));
        }
    }
    for (r, want) in [(0.9087, 0.9522), (0.9348, 0.9663), (0.8739, 0.9323)] {
        let f1 = f1_score(1.0, r);
        if (f1 - want).abs() > 5e-4 {
            problems.push(format!("F1(1, {r}) = {f1}"));
        }
    }
    for tp in [201u64, 209, 215] {
        let prf = table_matrix(tp).precision_recall_f1(1).unwrap();
        let r = tp as f64 / 230.0;
        if prf.precision != 1.0 || prf.recall != r || (prf.f1 - 2.0 * r / (1.0 + r)).abs() > 1e-15 {
            problems.push(format!("P/R/F1 of {tp}/230 = {prf:?}"));
        }
    }
    let ffnn = f1_score(1.0, 0.8739);
    check(
        problems.is_empty(),
        format!("accuracies 0.8739/0.9087/0.9348, F1 0.9522/0.9663, FFNN F1 computed {ffnn:.4} vs printed 0.9323"),
        problems.join("; "),
    )
}

fn acceptance_data(seed: u64) -> Vec<LabeledRecord> {
    let mix = ClassMix::PAPER_TRAINING.scaled_to(230).unwrap();
    synth_generate(230, &mix, &SynthConfig::default(), seed).unwrap()
}

/// 3. Both stages of every family learn the synthetic task.
fn end_to_end() -> Outcome {
    let start = Instant::now();
    let data = acceptance_data(2024);
    let cfg = CompareConfig::default();
    assert_eq!(cfg.train, TrainConfig::default());
    let out = compare(&data, &cfg, 2024).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut ok = elapsed < Duration::from_secs(60) && out.split.sizes() == (92, 92, 46);
    let mut parts = Vec::new();
    for run in &out.runs {
        // recount from raw outputs, independently of the library's matrices
        let test = &out.split.test;
        let diag = &run.diagnosis.model;
        let recs: Vec<_> = test.iter().map(|r| r.record).collect();
        let labels: Vec<_> = test.iter().map(|r| r.label).collect();
        let raw = diag.predict_raw(&recs, Some(&labels)).unwrap();
        let diag_hits = raw
            .iter()
            .zip(test)
            .filter(|(y, r)| (y[0] >= 0.5) == r.label.is_anemic())
            .count();
        let pair = ModelPair::new(run.diagnosis.model.clone(), run.classifier.model.clone()).unwrap();
        let reports = run_pipeline_labeled(&pair, test, &PipelineOptions::default()).unwrap().reports;
        let four_hits = reports
            .iter()
            .zip(test)
            .filter(|(rep, r)| rep.label() == Some(r.label))
            .count();
        let n = test.len() as f64;
        let (da, fa) = (diag_hits as f64 / n, four_hits as f64 / n);
        let decreased = run.diagnosis.curve.train.last() < run.diagnosis.curve.train.first();
        ok &= da >= 0.90 && fa >= 0.80 && decreased;
        ok &= run.diagnosis_cm.accuracy().unwrap() == da && run.pipeline_cm.accuracy().unwrap() == fa;
        ok &= run.diagnosis.curve.epochs() <= 2000;
        parts.push(format!("{} diag {:.3} 4-way {:.3}", run.family.display_name(), da, fa));
    }
    let msg = format!("{} in {elapsed:.2?}", parts.join(", "));
    check(ok, msg.clone(), msg)
}

/// 4. Elman and NARX reduce to the FFNN.
fn reductions() -> Outcome {
    let mut r = rng(44);
    let mut worst_elman: f64 = 0.0;
    let mut worst_narx: f64 = 0.0;
    let ffnn = FfnnModel::glorot(9, 50, 3, &mut r);
    let elman = ElmanModel::from_ffnn(&ffnn, 0.0);
    let core = FfnnModel::glorot(9 + 3, 50, 3, &mut r);
    let narx = NarxModel::new(
        core.clone(),
        NarxDelays {
            input_delays: 0,
            output_delays: 1,
        },
        NarxMode::PerRecord,
        9,
    )
    .unwrap();
    for _ in 0..100 {
        let x = uniform(&mut r, 9, -1.5, 1.5);
        let a = ffnn_forward(&ffnn, &x).unwrap();
        let b = elman_forward(&elman, &x).unwrap();
        worst_elman = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(worst_elman, f64::max);
        let mut padded = x.clone();
        padded.extend([0.0; 3]);
        let c = ffnn_forward(&core, &padded).unwrap();
        let d = narx_forward(&narx, &[x], None).unwrap();
        worst_narx = c.iter().zip(&d[0]).map(|(p, q)| (p - q).abs()).fold(worst_narx, f64::max);
    }
    let msg = format!("max |diff| Elman {worst_elman:.1e}, NARX {worst_narx:.1e} over 100 inputs");
    check(worst_elman <= 1e-12 && worst_narx <= 1e-12, msg.clone(), msg)
}

/// 5. Generated labels agree with the rule oracle.
fn oracle_agreement() -> Outcome {
    let ranges = ReferenceRanges::default();
    let mix = ClassMix::PAPER_TRAINING.scaled_to(1000).unwrap();
    let mut total = 0;
    let mut disagreements = 0;
    for seed in 0..10 {
        for r in synth_generate(1000, &mix, &SynthConfig::default(), seed).unwrap() {
            total += 1;
            if rule_label(&r.record, &ranges).ok() != Some(r.label) {
                disagreements += 1;
            }
        }
    }
    let msg = format!("{disagreements} disagreements in {total} records over 10 seeds");
    check(total == 10_000 && disagreements == 0, msg.clone(), msg)
}

fn run_compare(bin: &str, data: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let o = Command::new(bin)
        .args(["compare", "--seed", "5", "--deterministic", "--epochs", "200", "--data"])
        .arg(data)
        .arg("--out-dir")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(String::from_utf8_lossy(&o.stderr).into_owned());
    }
    Ok(o.stdout)
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// 6. Two `compare` runs are byte-identical.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data.csv");
    save_csv(&acceptance_data(5), &data).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_hemanet");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out_a = run_compare(bin, &data, &a)?;
    let out_b = run_compare(bin, &data, &b)?;
    let (fa, fb) = (dir_contents(&a), dir_contents(&b));
    let curves = fa.keys().filter(|k| k.ends_with("_curve.csv")).count();
    let msg = format!("stdout {} bytes, {} files ({curves} curves)", out_a.len(), fa.len());
    check(out_a == out_b && fa == fb && curves == 6, msg.clone(), format!("outputs differ: {msg}"))
}

/// 7. Normalizer extremes and round trip.
fn normalization() -> Outcome {
    let mut r = rng(7);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..9).map(|j| r.gen_range(0.0..=10.0f64) * (j + 1) as f64).collect())
        .collect();
    let norm = Normalizer::fit(&rows).unwrap();
    let mut extremes_exact = true;
    for j in 0..9 {
        let col: Vec<f64> = rows.iter().map(|x| x[j]).collect();
        let (lo_i, _) = col.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let (hi_i, _) = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        extremes_exact &= norm.apply(&rows[lo_i]).unwrap()[j] == -1.0;
        extremes_exact &= norm.apply(&rows[hi_i]).unwrap()[j] == 1.0;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..9).map(|j| r.gen_range(-20.0..=120.0) * (j + 1) as f64 / 10.0).collect();
        let back = norm.invert(&norm.apply(&x).unwrap()).unwrap();
        worst = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    let msg = format!("extremes exact: {extremes_exact}, max invert∘apply error {worst:.1e} on 1000 vectors");
    check(extremes_exact && worst <= 1e-12, msg.clone(), msg)
}

/// 8. Saved and reloaded models predict bit-identically.
fn serialization() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = rng(8);
    let mut mismatches = 0;
    for family in Family::ALL {
        let net = NetworkModel::init(&ArchConfig::new(family, 50), 9, 3, 8).unwrap();
        let rows: Vec<Vec<f64>> = (0..10).map(|_| uniform(&mut r, 9, 0.0, 100.0)).collect();
        let model = TrainedModel::new(
            net,
            FeatureSpec::full9(),
            OutputEncoding::OneHot3,
            Normalizer::fit(&rows).unwrap(),
            TrainMeta {
                seed: 8,
                config: TrainConfig::default(),
                epochs_run: 0,
                final_loss: None,
                joint_scaling: false,
            },
        )
        .unwrap();
        let path = tmp.path().join(format!("{family}.json"));
        save_model(&model, &path).map_err(|e| e.to_string())?;
        let back = load_model(&path).map_err(|e| e.to_string())?;
        let inputs: Vec<Vec<f64>> = (0..100).map(|_| uniform(&mut r, 9, -1.2, 1.2)).collect();
        let a = model.predict_normalized(&inputs, None).unwrap();
        let b = back.predict_normalized(&inputs, None).unwrap();
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            if x.to_bits() != y.to_bits() {
                mismatches += 1;
            }
        }
    }
    let msg = format!("{mismatches} differing outputs over 3 families x 100 inputs");
    check(mismatches == 0, msg.clone(), msg)
}

/// 9. Split sizes and stratification.
fn split_arithmetic() -> Outcome {
    let data = acceptance_data(9);
    let paper = split_dataset(&data, SplitFractions::PAPER, 9, true).unwrap();
    let materials = split_dataset(&data, SplitPreset::PaperMaterials.fractions(), 9, true).unwrap();
    let unstrat = split_dataset(&data, SplitFractions::PAPER, 9, false).unwrap();

    let fr = [0.4, 0.4, 0.2];
    let mut max_dev: f64 = 0.0;
    let parts = [&paper.train, &paper.test, &paper.validation];
    for label in AnemiaLabel::ALL {
        let n = data.iter().filter(|r| r.label == label).count() as f64;
        for (p, part) in parts.iter().enumerate() {
            let c = part.iter().filter(|r| r.label == label).count() as f64;
            max_dev = max_dev.max((c - n * fr[p]).abs());
        }
    }
    let key = |v: &[LabeledRecord]| {
        let mut k: Vec<String> = v.iter().map(|r| format!("{r:?}")).collect();
        k.sort();
        k
    };
    let joined: Vec<LabeledRecord> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    let partition = key(&joined) == key(&data);
    let msg = format!(
        "paper {:?}, unstratified {:?}, paper-materials {:?}, max per-class deviation {max_dev:.2}, partition {partition}",
        paper.sizes(),
        unstrat.sizes(),
        materials.sizes()
    );
    check(
        paper.sizes() == (92, 92, 46)
            && unstrat.sizes() == (92, 92, 46)
            && materials.sizes() == (147, 83, 0)
            && max_dev <= 1.0
            && partition,
        msg.clone(),
        msg,
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 gradient correctness", gradients),
        ("2 metric reproduction", metric_reproduction),
        ("3 end-to-end learning", end_to_end),
        ("4 reduction invariants", reductions),
        ("5 oracle agreement", oracle_agreement),
        ("6 determinism", determinism),
        ("7 normalization", normalization),
        ("8 serialization", serialization),
        ("9 split arithmetic", split_arithmetic),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(msg) => println!("PASS  {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
