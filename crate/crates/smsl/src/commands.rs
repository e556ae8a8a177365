//! The five subcommands as library functions.
//!
//! Each returns its in-memory result and writes its files; printing is left
//! to the binary.

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use smsl_core::infer::ensemble_similarity;
use smsl_core::train::{similarity_for, train, TrainConfig};
use smsl_core::{evaluate, LossKind, RetrievalReport, SimilarityMatrix};

use crate::checkpoint::{Checkpoint, Sidecar, FORMAT as CHECKPOINT_FORMAT};
use crate::config::{CompareEntry, ExperimentConfig};
use crate::dataset::{self, Manifest, SplitData};
use crate::error::{CliError, Result};
use crate::io::{self, MatrixFormat};
use crate::report;

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const HISTORY: &str = "history.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const SIMILARITY: &str = "similarity.bin";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn write_report(dir: &Path, r: &RetrievalReport) -> Result<()> {
    io::write_bytes(&dir.join(REPORT_JSON), report::to_json(r).as_bytes())?;
    io::write_bytes(&dir.join(REPORT_TXT), report::text_block(r).as_bytes())
}

/// Writes the dataset to `--out` or `paths.dataset`; `--seed` sets the
/// generator seed.
pub fn cmd_gen_data(cfg: &ExperimentConfig, ov: &Overrides) -> Result<(PathBuf, Manifest)> {
    let mut spec = cfg.synthetic.clone();
    if let Some(seed) = ov.seed {
        spec.seed = seed;
    }
    let dir = ov.out.clone().unwrap_or_else(|| cfg.paths.dataset.clone());
    let manifest = dataset::write_dataset(&dir, &spec, cfg.eval_items)?;
    info!(
        "wrote {} split(s) to {}",
        manifest.splits.len(),
        dir.display()
    );
    Ok((dir, manifest))
}

fn load_data(dir: &Path) -> Result<(Manifest, SplitData, SplitData)> {
    let manifest = dataset::read_manifest(dir)?;
    let train_split = dataset::read_train_split(dir, &manifest)?;
    let eval_split = dataset::read_eval_split(dir, &manifest)?;
    Ok((manifest, train_split, eval_split))
}

fn fit(
    cfg: &TrainConfig,
    data: &SplitData,
    eval: &SplitData,
) -> Result<(Checkpoint, RetrievalReport)> {
    let outcome = train(
        &data.video,
        &data.text,
        &data.relevancy,
        cfg,
        Some((&eval.video, &eval.text, &eval.relevancy)),
    )?;
    for w in &outcome.warnings {
        warn!("{w}");
    }
    let s = similarity_for(&outcome.params, &eval.video, &eval.text, false)?;
    let report = evaluate(&s, &eval.relevancy, cfg.relevance_threshold)?;
    let ckpt = Checkpoint {
        params: outcome.params,
        sidecar: Sidecar {
            format: CHECKPOINT_FORMAT.into(),
            video_shape: data.video.clip_shape(),
            train: cfg.clone(),
            history: outcome.history,
            warnings: outcome.warnings,
        },
    };
    Ok((ckpt, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub report: RetrievalReport,
}

/// Trains on the training split and evaluates on the held-out split (or the
/// training split if there is none). Writes the checkpoint and sidecar,
/// `history.json`, the final report and the evaluation similarity matrix.
pub fn cmd_train(cfg: &ExperimentConfig, ov: &Overrides) -> Result<TrainSummary> {
    let mut tcfg = cfg.train.clone();
    if let Some(seed) = ov.seed {
        tcfg.seed = seed;
    }
    let out = ov.out.clone().unwrap_or_else(|| cfg.paths.out.clone());
    let (_, data, eval) = load_data(&cfg.paths.dataset)?;
    info!("training {} for {} epochs", tcfg.loss, tcfg.total_epochs);
    let (ckpt, report) = fit(&tcfg, &data, &eval)?;

    let path = out.join(CHECKPOINT);
    ckpt.save(&path)?;
    io::write_bytes(
        &out.join(HISTORY),
        report::to_json(&ckpt.sidecar.history).as_bytes(),
    )?;
    write_report(&out, &report)?;
    let s = similarity_for(&ckpt.params, &eval.video, &eval.text, false)?;
    io::save_similarity(&out.join(SIMILARITY), &s)?;
    Ok(TrainSummary {
        checkpoint: path,
        report,
    })
}

/// Evaluates a checkpoint on a dataset's held-out split (training split if
/// there is none), with flip augmentation when `flip` is set. With `out`,
/// writes the report and the similarity matrix there.
pub fn cmd_eval(
    checkpoint: &Path,
    dataset_dir: &Path,
    flip: bool,
    threshold: f64,
    out: Option<&Path>,
) -> Result<RetrievalReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let manifest = dataset::read_manifest(dataset_dir)?;
    let data = dataset::read_eval_split(dataset_dir, &manifest)?;
    let s = similarity_for(&ckpt.params, &data.video, &data.text, flip)?;
    let report = evaluate(&s, &data.relevancy, threshold)?;
    if let Some(dir) = out {
        write_report(dir, &report)?;
        io::save_similarity(&dir.join(SIMILARITY), &s)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub label: String,
    pub loss: LossKind,
    pub margin: f64,
    pub relaxation: f64,
    pub report: RetrievalReport,
}

/// Trains every `compare` entry with the same data, seed and schedule and
/// writes `comparison.{txt,csv,json}`. Dataset paths are checked before any
/// training starts.
pub fn cmd_compare(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<CompareRow>> {
    if cfg.compare.is_empty() {
        return Err(CliError::Usage("compare needs at least one entry".into()));
    }
    for entry in &cfg.compare {
        if let Some(d) = entry.dataset.as_ref().filter(|d| **d != cfg.paths.dataset) {
            return Err(CliError::Usage(format!(
                "compare entry {:?} uses dataset {}, expected {}",
                entry.display_label(),
                d.display(),
                cfg.paths.dataset.display()
            )));
        }
    }
    let mut base = cfg.train.clone();
    if let Some(seed) = ov.seed {
        base.seed = seed;
    }
    let runs: Vec<(&CompareEntry, TrainConfig)> = cfg
        .compare
        .iter()
        .map(|e| {
            let tcfg = TrainConfig {
                loss: e.loss,
                loss_config: e.loss_config(&base.loss_config),
                ..base.clone()
            };
            tcfg.validate().map(|_| (e, tcfg))
        })
        .collect::<Result<_, _>>()?;

    let out = ov.out.clone().unwrap_or_else(|| cfg.paths.out.clone());
    let (_, data, eval) = load_data(&cfg.paths.dataset)?;
    let mut rows = Vec::with_capacity(runs.len());
    for (entry, tcfg) in runs {
        info!("compare: training {}", entry.display_label());
        let (_, report) = fit(&tcfg, &data, &eval)?;
        rows.push(CompareRow {
            label: entry.display_label(),
            loss: tcfg.loss,
            margin: tcfg.loss_config.margin,
            relaxation: tcfg.loss_config.relaxation,
            report,
        });
    }
    let table: Vec<report::Row> = rows
        .iter()
        .map(|r| report::row(&r.label, &r.report))
        .collect();
    io::write_bytes(
        &out.join("comparison.txt"),
        report::text_table(&table).as_bytes(),
    )?;
    io::write_bytes(
        &out.join("comparison.csv"),
        report::csv_table(&table).as_bytes(),
    )?;
    io::write_bytes(
        &out.join("comparison.json"),
        report::to_json(&rows).as_bytes(),
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleInput {
    pub path: PathBuf,
    pub report: RetrievalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleOutcome {
    pub inputs: Vec<EnsembleInput>,
    pub ensemble: RetrievalReport,
    /// Per-metric maximum over the individual reports.
    pub best_individual: RetrievalReport,
}

impl EnsembleOutcome {
    pub fn rows(&self) -> Vec<report::Row> {
        let mut rows: Vec<report::Row> = self
            .inputs
            .iter()
            .map(|i| report::row(&i.path.display().to_string(), &i.report))
            .collect();
        rows.push(report::row("Ensemble", &self.ensemble));
        rows.push(report::delta_row(
            "Δ",
            &self.ensemble,
            &self.best_individual,
        ));
        rows
    }
}

fn per_metric_max(reports: &[RetrievalReport]) -> RetrievalReport {
    let mut best = reports[0];
    for r in &reports[1..] {
        best.map_v2t = best.map_v2t.max(r.map_v2t);
        best.map_t2v = best.map_t2v.max(r.map_t2v);
        best.map_avg = best.map_avg.max(r.map_avg);
        best.ndcg_v2t = best.ndcg_v2t.max(r.ndcg_v2t);
        best.ndcg_t2v = best.ndcg_t2v.max(r.ndcg_t2v);
        best.ndcg_avg = best.ndcg_avg.max(r.ndcg_avg);
    }
    best
}

/// Sums similarity matrices, evaluates the sum and every input, and writes
/// `ensemble.{txt,json}` plus the summed matrix when `out` is given.
pub fn cmd_ensemble(
    inputs: &[PathBuf],
    relevancy: &Path,
    threshold: f64,
    out: Option<&Path>,
) -> Result<EnsembleOutcome> {
    if inputs.is_empty() {
        return Err(CliError::Usage(
            "ensemble needs at least one similarity matrix".into(),
        ));
    }
    let rel = io::load_relevancy(relevancy, MatrixFormat::from_path(relevancy))?;
    let matrices: Vec<SimilarityMatrix> = inputs
        .iter()
        .map(|p| io::load_similarity(p))
        .collect::<Result<_>>()?;
    let summed = ensemble_similarity(&matrices)?;
    let reports: Vec<RetrievalReport> = matrices
        .iter()
        .map(|s| evaluate(s, &rel, threshold))
        .collect::<Result<_, _>>()?;
    let outcome = EnsembleOutcome {
        inputs: inputs
            .iter()
            .zip(&reports)
            .map(|(p, r)| EnsembleInput {
                path: p.clone(),
                report: *r,
            })
            .collect(),
        ensemble: evaluate(&summed, &rel, threshold)?,
        best_individual: per_metric_max(&reports),
    };
    if let Some(dir) = out {
        io::write_bytes(
            &dir.join("ensemble.txt"),
            report::text_table(&outcome.rows()).as_bytes(),
        )?;
        io::write_bytes(
            &dir.join("ensemble.json"),
            report::to_json(&outcome).as_bytes(),
        )?;
        io::save_similarity(&dir.join(SIMILARITY), &summed)?;
    }
    Ok(outcome)
}
