//! The subcommands, as plain functions over paths and values.

use std::path::{Path, PathBuf};

use slimrnn::cell::count_params;
use slimrnn::data::{build_vocab, ingest_csv, select_binary, IngestReport, LabeledDataset, Vocabulary};
use slimrnn::gradcheck::{check_module, GradReport, Target};
use slimrnn::sweep::{run_grid, Axis, SweepTable};
use slimrnn::train::{evaluate, Evaluation, Trainer};
use slimrnn::{ExperimentConfig, MetricsReport, Variant};

use crate::checkpoint::Checkpoint;
use crate::error::{CliError, CliResult};
use crate::manifest::{config_hash, fingerprint, now, DatasetFingerprint, RunManifest, MANIFEST_FILE};

pub const SEED_ENV: &str = "SLIMRNN_SEED";

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const INGEST_FILE: &str = "ingest.json";

/// Flag, then config file, then environment.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, env: Option<&str>) -> CliResult<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        Some(text) => text
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={text:?} is not an unsigned integer"))),
        None => Err(CliError::Usage(format!(
            "no seed: pass --seed, set \"seed\" in the config or export {SEED_ENV}"
        ))),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

pub fn load_config(path: &Path, seed_flag: Option<u64>) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = ExperimentConfig::from_json(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    config.seed = Some(resolve_seed(seed_flag, config.seed, env_seed().as_deref())?);
    config.validate()?;
    Ok(config)
}

pub struct Prepared {
    pub vocabulary: Vocabulary,
    pub dataset: LabeledDataset,
    pub ingest: IngestReport,
    pub fingerprint: DatasetFingerprint,
}

/// Ingest, drop neutral rows, fit the vocabulary on what remains and
/// tokenize.
pub fn prepare(config: &ExperimentConfig, data: &Path) -> CliResult<Prepared> {
    let (records, ingest) = ingest_csv(data, &config.text_column, &config.label_column)?;
    let fingerprint = fingerprint(data, ingest.total_rows)?;
    let records = select_binary(records)?;
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let vocabulary = build_vocab(&texts, config.vocab_size)?;
    let dataset = LabeledDataset::from_records(&records, &vocabulary, config.maxlen)?;
    Ok(Prepared {
        vocabulary,
        dataset,
        ingest,
        fingerprint,
    })
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

pub struct TrainOutcome {
    pub report: MetricsReport,
    pub outputs: Vec<PathBuf>,
}

pub fn cmd_train(config_path: &Path, data: &Path, out: &Path, seed: Option<u64>) -> CliResult<TrainOutcome> {
    let started_at = now();
    let config = load_config(config_path, seed)?;
    let prepared = prepare(&config, data)?;
    let mut trainer = Trainer::from_dataset(&config, &prepared.dataset)?;
    trainer.run()?;
    let (model, mut report) = trainer.finish()?;
    report.manifest = Some(MANIFEST_FILE.to_string());

    ensure_dir(out)?;
    let files = [CHECKPOINT_FILE, METRICS_FILE, EPOCHS_FILE, INGEST_FILE, MANIFEST_FILE];
    let outputs: Vec<PathBuf> = files.iter().map(|f| out.join(f)).collect();
    Checkpoint::capture(&model, &prepared.vocabulary, &config).save(&outputs[0])?;
    write(&outputs[1], &report.to_json())?;
    write(&outputs[2], &report.epochs_csv())?;
    write(
        &outputs[3],
        &serde_json::to_string_pretty(&prepared.ingest).expect("ingest report serializes"),
    )?;
    let manifest = RunManifest {
        command: "train".into(),
        config_hash: config_hash(&config),
        seed: config.require_seed()?,
        dataset: prepared.fingerprint,
        started_at,
        finished_at: now(),
        outputs: files.iter().map(|f| f.to_string()).collect(),
    };
    write(&outputs[4], &manifest.to_json())?;
    Ok(TrainOutcome { report, outputs })
}

/// Evaluates a checkpoint on every positive and negative row of `data`.
pub fn cmd_eval(checkpoint: &Path, data: &Path, out: Option<&Path>) -> CliResult<Evaluation> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let model = ckpt.restore()?;
    let config = &ckpt.config;
    let (records, _) = ingest_csv(data, &config.text_column, &config.label_column)?;
    let records = select_binary(records)?;
    let dataset = LabeledDataset::from_records(&records, &ckpt.vocabulary, config.maxlen)?;
    let evaluation = evaluate(&model, &dataset)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write(
            &dir.join("eval.json"),
            &serde_json::to_string_pretty(&evaluation).expect("evaluation serializes"),
        )?;
    }
    Ok(evaluation)
}

pub fn parse_list(values: &str) -> Vec<String> {
    values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect()
}

pub fn cmd_sweep(
    config_path: &Path,
    data: &Path,
    axis: &str,
    values: &str,
    rows: Option<&str>,
    out: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<SweepTable> {
    let config = load_config(config_path, seed)?;
    let axis: Axis = axis.parse().map_err(|e: slimrnn::Error| CliError::Usage(e.to_string()))?;
    let values = parse_list(values);
    if values.is_empty() {
        return Err(CliError::Usage("--values needs at least one entry".into()));
    }
    let rows: Vec<Variant> = match rows {
        Some(list) => parse_list(list)
            .iter()
            .map(|v| v.parse::<Variant>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => vec![config.variant],
    };
    let prepared = prepare(&config, data)?;
    let table = run_grid(&config, &rows, axis, &values, &prepared.dataset)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write(&dir.join("sweep.json"), &table.to_json())?;
        write(&dir.join("sweep.tsv"), &table.render())?;
    }
    Ok(table)
}

/// Standalone tolerance for a target when `--tol` is not given.
pub fn default_tolerance(target: Target) -> f64 {
    match target {
        Target::Model(_) => 1e-4,
        _ => 1e-5,
    }
}

pub fn parse_scope(scope: &str) -> CliResult<Vec<Target>> {
    let key = scope.trim().to_ascii_lowercase();
    Ok(match key.as_str() {
        "all" => Target::all(),
        "cells" => Variant::ALL.iter().map(|&v| Target::Cell(v)).collect(),
        "embedding" => vec![Target::Embedding],
        "conv1d" | "conv" => vec![Target::Conv1d],
        "dense" => vec![Target::Dense],
        "bidirectional" => vec![Target::Bidirectional],
        "model" => vec![Target::Model(Variant::Lstm0)],
        _ => match key.strip_prefix("model:") {
            Some(v) => vec![Target::Model(v.parse().map_err(|e: slimrnn::Error| CliError::Usage(e.to_string()))?)],
            None => vec![Target::Cell(scope.parse().map_err(|_| {
                CliError::Usage(format!(
                    "unknown gradcheck scope {scope:?}; expected all, cells, LSTM0..LSTM6, embedding, \
                     conv1d, dense, bidirectional, model or model:LSTMk"
                ))
            })?)],
        },
    })
}

/// Runs every target in `scope` over seeds `0..seeds`. `tol` applies to
/// cells and single layers, `model_tol` to whole-model targets. Failing
/// targets are reported in the returned list, not as an error.
pub fn cmd_gradcheck(scope: &str, tol: Option<f64>, model_tol: Option<f64>, seeds: u64) -> CliResult<Vec<GradReport>> {
    for (flag, t) in [("--tol", tol), ("--model-tol", model_tol)] {
        if let Some(t) = t {
            if !(t > 0.0) {
                return Err(CliError::Usage(format!("{flag} must be positive, got {t}")));
            }
        }
    }
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..seeds).collect();
    Ok(parse_scope(scope)?
        .into_iter()
        .map(|target| {
            let given = if matches!(target, Target::Model(_)) { model_tol } else { tol };
            check_module(target, &seeds, given.unwrap_or_else(|| default_tolerance(target)))
        })
        .collect())
}

pub fn cmd_count_params(variant: &str, d: usize, n: usize) -> CliResult<usize> {
    let variant: Variant = variant.parse().map_err(|e: slimrnn::Error| CliError::Usage(e.to_string()))?;
    Ok(count_params(variant, d, n)?)
}
