//! The five pipeline commands: extract, train, eval, synth, bench.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hhiss::data::{FeatureDataset, N_CLASSES};
use hhiss::error::{Error, Result};
use hhiss::features;
use hhiss::losses::cross_entropy;
use hhiss::metrics::{self, MetricsReport};
use hhiss::net::Checkpoint;
use hhiss::synthgen::{self, SyntheticSpec};
use hhiss::trainer::{self, RoundTrace, TrainConfig};

use crate::config::{fingerprint, manifest_path_for, BenchConfig, RunManifest};

/// Training method roster: the proposed approach plus its ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Erm,
    Irm,
    ErmPrune,
    Sparsetrain,
    Kd,
    Hhiss,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Irm => "irm",
            Method::ErmPrune => "erm-prune",
            Method::Sparsetrain => "sparsetrain",
            Method::Kd => "kd",
            Method::Hhiss => "hhiss",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "erm" => Ok(Method::Erm),
            "irm" => Ok(Method::Irm),
            "erm-prune" => Ok(Method::ErmPrune),
            "sparsetrain" => Ok(Method::Sparsetrain),
            "kd" => Ok(Method::Kd),
            "hhiss" => Ok(Method::Hhiss),
            other => Err(Error::Data(format!("unknown method {other:?}"))),
        }
    }
}

/// Train with one method; hhiss also returns its per-round trace.
fn run_method(
    method: Method,
    dataset: &FeatureDataset,
    cfg: &TrainConfig,
) -> Result<(hhiss::net::NetworkParams, Vec<RoundTrace>)> {
    match method {
        Method::Erm => Ok((trainer::train_erm(dataset, cfg)?, Vec::new())),
        Method::Irm => Ok((trainer::train_irm_stage1(dataset, cfg)?, Vec::new())),
        Method::ErmPrune => Ok((trainer::baseline_erm_pruning(dataset, cfg)?, Vec::new())),
        Method::Sparsetrain => Ok((trainer::baseline_sparsetrain(dataset, cfg)?, Vec::new())),
        Method::Kd => Ok((trainer::baseline_kd(dataset, cfg)?, Vec::new())),
        Method::Hhiss => {
            let (params, traces) = trainer::hhiss_train(dataset, cfg)?;
            Ok((params, traces))
        }
    }
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

/// Feature extraction over a directory of raw session directories (each
/// holding a `session.json` manifest plus per-channel sample files).
/// Per-session failures are logged and skipped; the run only fails when no
/// session survives.
pub fn cmd_extract(raw_dir: &Path, out: &Path) -> Result<()> {
    let mut session_dirs: Vec<PathBuf> = Vec::new();
    if raw_dir.join("session.json").is_file() {
        session_dirs.push(raw_dir.to_path_buf());
    } else {
        for entry in std::fs::read_dir(raw_dir)? {
            let path = entry?.path();
            if path.is_dir() && path.join("session.json").is_file() {
                session_dirs.push(path);
            }
        }
        session_dirs.sort();
    }
    if session_dirs.is_empty() {
        return Err(Error::Empty(format!(
            "{}: no session directories found",
            raw_dir.display()
        )));
    }

    let mut sessions = Vec::new();
    let mut failures = 0usize;
    for dir in &session_dirs {
        match features::load_session(dir) {
            Ok(s) => sessions.push(s),
            Err(e) => {
                failures += 1;
                eprintln!("session {}: {e} (skipped)", dir.display());
            }
        }
    }
    if sessions.is_empty() {
        return Err(Error::Data(format!(
            "all {failures} sessions failed to load"
        )));
    }

    let name = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "features".into());
    let outcome = features::extract_sessions(&sessions, &name)?;
    outcome.dataset.save(out)?;
    for subject in &outcome.dropped_subjects {
        eprintln!("subject {subject}: fewer than {} calm windows, dropped", features::BASELINE_WINDOWS);
    }

    RunManifest {
        command: "extract".into(),
        seed: 0,
        method: None,
        train_config: None,
        synth_spec: None,
        registry_hash: Some(outcome.dataset.registry_hash.clone()),
        inputs: session_dirs.iter().map(|p| p.display().to_string()).collect(),
        outputs: vec![out.display().to_string()],
    }
    .write(&manifest_path_for(out, false))?;

    println!(
        "extracted {} windows from {} sessions ({} windows dropped, {} subjects dropped) -> {}",
        outcome.dataset.n_rows(),
        sessions.len(),
        outcome.dropped_windows,
        outcome.dropped_subjects.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Train one method on a feature file: writes a checkpoint, a trace log
/// (per round for hhiss, one summary line otherwise), and the run manifest.
pub fn cmd_train(
    features_path: &Path,
    method: Method,
    cfg: &TrainConfig,
    out: &Path,
    trace_path: Option<&Path>,
) -> Result<()> {
    cfg.validate()?;
    let dataset = FeatureDataset::load(features_path)?;
    let (params, mut traces) = run_method(method, &dataset, cfg)?;

    if traces.is_empty() {
        // Single-phase methods get one post-hoc summary line.
        let (logits, _) = params.forward_eval(&dataset.features)?;
        let ce = cross_entropy(&logits, &dataset.labels)?;
        traces.push(RoundTrace {
            round: 0,
            retention: 1.0 - params.zero_weight_fraction(),
            inner_epochs: 0,
            reached_threshold: false,
            validation_ba: None,
            cross_entropy: ce.loss,
            penalty: 0.0,
            soft_label: 0.0,
            total_loss: ce.loss,
        });
    }
    let trace_out = trace_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("trace.jsonl"));
    trainer::write_trace_log(&trace_out, &traces)?;

    let checkpoint = Checkpoint {
        params,
        adam: None,
        registry_hash: Some(dataset.registry_hash.clone()),
        config_fingerprint: Some(fingerprint(cfg)),
    };
    checkpoint.save(out)?;

    RunManifest {
        command: "train".into(),
        seed: cfg.seed,
        method: Some(method.name().into()),
        train_config: Some(cfg.clone()),
        synth_spec: None,
        registry_hash: Some(dataset.registry_hash.clone()),
        inputs: vec![features_path.display().to_string()],
        outputs: vec![out.display().to_string(), trace_out.display().to_string()],
    }
    .write(&manifest_path_for(out, false))?;

    let last = traces.last().expect("at least one trace line");
    println!(
        "trained {} on {} rows / {} subjects: retention {:.4}, final loss {:.6} -> {}",
        method.name(),
        dataset.n_rows(),
        dataset.unique_subjects().len(),
        last.retention,
        last.total_loss,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

/// One `tag=path` evaluation input.
#[derive(Debug, Clone)]
pub struct TaggedPath {
    pub tag: String,
    pub path: PathBuf,
}

impl std::str::FromStr for TaggedPath {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (tag, path) = s
            .split_once('=')
            .ok_or_else(|| format!("expected tag=path, got {s:?}"))?;
        if tag.is_empty() {
            return Err(format!("empty tag in {s:?}"));
        }
        Ok(TaggedPath {
            tag: tag.to_string(),
            path: PathBuf::from(path),
        })
    }
}

/// Evaluate a checkpoint on tagged feature files and print a results
/// table. Refuses any dataset whose feature registry differs from the one
/// the checkpoint was trained on.
pub fn cmd_eval(
    checkpoint_path: &Path,
    data: &[TaggedPath],
    ood_tags: Option<&[String]>,
    saliency_out: Option<&Path>,
    report_out: Option<&Path>,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("no evaluation datasets given".into()));
    }
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let expected_hash = checkpoint.registry_hash.clone();

    let mut reports: Vec<MetricsReport> = Vec::new();
    let mut saliency = serde_json::Map::new();
    for td in data {
        let dataset = FeatureDataset::load(&td.path)?;
        if let Some(expected) = &expected_hash {
            if &dataset.registry_hash != expected {
                return Err(Error::HashMismatch {
                    expected: expected.clone(),
                    found: dataset.registry_hash.clone(),
                });
            }
        }
        let (logits, _) = checkpoint.params.forward_eval(&dataset.features)?;
        reports.push(metrics::evaluate_logits(
            &logits,
            &dataset.labels,
            N_CLASSES,
            &td.tag,
        )?);
        if saliency_out.is_some() {
            let map = metrics::saliency_map(&checkpoint.params, &dataset.features, false)?;
            let n = map.nrows() as f64;
            let mean: Vec<f64> = (0..map.ncols())
                .map(|j| map.column(j).sum() / n)
                .collect();
            saliency.insert(
                td.tag.clone(),
                serde_json::json!({
                    "feature_names": dataset.feature_names,
                    "mean_abs_gradient": mean,
                }),
            );
        }
    }

    // Out-of-distribution tags: explicit list, else any tag starting "ood".
    let owned_default: Vec<String>;
    let ood: Vec<&str> = match ood_tags {
        Some(tags) => tags.iter().map(String::as_str).collect(),
        None => {
            owned_default = reports
                .iter()
                .filter(|r| r.dataset_tag.starts_with("ood"))
                .map(|r| r.dataset_tag.clone())
                .collect();
            owned_default.iter().map(String::as_str).collect()
        }
    };

    let label = checkpoint_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let table = if ood.is_empty() {
        metrics::render_results_table(&[(label, reports.clone())], &[])
    } else {
        metrics::render_results_table(&[(label, reports.clone())], &ood)
    };
    print!("{table}");

    if let Some(path) = saliency_out {
        let json = serde_json::to_string_pretty(&serde_json::Value::Object(saliency))
            .map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, json)?;
    }
    if let Some(path) = report_out {
        std::fs::write(path, &table)?;
        RunManifest {
            command: "eval".into(),
            seed: 0,
            method: None,
            train_config: None,
            synth_spec: None,
            registry_hash: expected_hash,
            inputs: std::iter::once(checkpoint_path.display().to_string())
                .chain(data.iter().map(|t| t.path.display().to_string()))
                .collect(),
            outputs: vec![path.display().to_string()],
        }
        .write(&manifest_path_for(path, false))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// Generate the synthetic domain-shift benchmark: train and held-out
/// feature files plus provenance, with the analytic ceiling printed.
pub fn cmd_synth(spec: &SyntheticSpec, out_dir: &Path) -> Result<()> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let (train, ood) = synthgen::generate_domains(spec)?;
    let train_path = out_dir.join("train.csv");
    let ood_path = out_dir.join("ood.csv");
    train.save(&train_path)?;
    ood.save(&ood_path)?;

    RunManifest {
        command: "synth".into(),
        seed: spec.seed,
        method: None,
        train_config: None,
        synth_spec: Some(spec.clone()),
        registry_hash: Some(train.registry_hash.clone()),
        inputs: Vec::new(),
        outputs: vec![
            train_path.display().to_string(),
            ood_path.display().to_string(),
        ],
    }
    .write(&manifest_path_for(out_dir, true))?;

    println!(
        "wrote {} train rows ({} subjects) and {} held-out rows ({} subjects) -> {}",
        train.n_rows(),
        spec.n_subjects,
        ood.n_rows(),
        spec.n_ood_subjects,
        out_dir.display()
    );
    println!(
        "analytic oracle balanced accuracy: {:.6}",
        synthgen::bayes_oracle_accuracy(spec)
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

/// End-to-end benchmark: for each seed, generate the synthetic shift,
/// train every requested method, and score held-out balanced accuracy.
/// Prints per-seed rows, means, and pass/fail verdicts against the margins;
/// the exit code stays 0 — the verdict lives in the report.
pub fn cmd_bench(bench: &BenchConfig, out: Option<&Path>) -> Result<()> {
    if bench.seeds.is_empty() {
        return Err(Error::Empty("bench needs at least one seed".into()));
    }
    if bench.methods.is_empty() {
        return Err(Error::Empty("bench needs at least one method".into()));
    }
    let methods: Vec<Method> = bench
        .methods
        .iter()
        .map(|m| Method::from_name(m))
        .collect::<Result<_>>()?;
    bench.train.validate()?;
    bench.synth.validate()?;

    let oracle = synthgen::bayes_oracle_accuracy(&bench.synth);
    let mut rows: Vec<(Method, Vec<f64>)> =
        methods.iter().map(|&m| (m, Vec::new())).collect();
    for &seed in &bench.seeds {
        let mut spec = bench.synth.clone();
        spec.seed = seed;
        let (train_ds, ood_ds) = synthgen::generate_domains(&spec)?;
        let mut cfg = bench.train.clone();
        cfg.seed = seed;
        for (method, scores) in rows.iter_mut() {
            let (params, _) = run_method(*method, &train_ds, &cfg)?;
            let (logits, _) = params.forward_eval(&ood_ds.features)?;
            let report =
                metrics::evaluate_logits(&logits, &ood_ds.labels, N_CLASSES, "ood")?;
            scores.push(report.balanced_accuracy);
        }
    }

    let mut text = String::new();
    let mut header = String::from("method");
    for seed in &bench.seeds {
        write!(header, "  seed{seed}").expect("string write");
    }
    writeln!(text, "{header}    mean").expect("string write");
    let mean_of = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for (method, scores) in &rows {
        let mut line = format!("{:<11}", method.name());
        for s in scores {
            write!(line, " {s:7.4}").expect("string write");
        }
        write!(line, " {:7.4}", mean_of(scores)).expect("string write");
        writeln!(text, "{line}").expect("string write");
    }
    writeln!(text, "analytic oracle balanced accuracy: {oracle:.4}").expect("string write");

    let find = |m: Method| {
        rows.iter()
            .find(|(method, _)| *method == m)
            .map(|(_, s)| mean_of(s))
    };
    if let (Some(hhiss_mean), Some(erm_mean)) = (find(Method::Hhiss), find(Method::Erm)) {
        let gap = hhiss_mean - erm_mean;
        let verdict = if gap >= bench.hhiss_margin { "PASS" } else { "FAIL" };
        writeln!(
            text,
            "{verdict}: hhiss - erm = {gap:+.4} (required >= {:+.4})",
            bench.hhiss_margin
        )
        .expect("string write");
    }
    let ceiling = oracle + bench.oracle_slack;
    let worst = rows
        .iter()
        .map(|(_, s)| mean_of(s))
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = if worst <= ceiling { "PASS" } else { "FAIL" };
    writeln!(
        text,
        "{verdict}: best mean {worst:.4} within oracle + slack {ceiling:.4}"
    )
    .expect("string write");

    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text)?;
        RunManifest {
            command: "bench".into(),
            seed: bench.seeds[0],
            method: None,
            train_config: Some(bench.train.clone()),
            synth_spec: Some(bench.synth.clone()),
            registry_hash: None,
            inputs: Vec::new(),
            outputs: vec![path.display().to_string()],
        }
        .write(&manifest_path_for(path, false))?;
    }
    Ok(())
}
