//! On-disk dataset layout written by `gen-data`.
//!
//! ```text
//! <dir>/manifest.json          generator settings and split descriptions
//! <dir>/video_features.bin     N × (T·C·H·W) raw clips, SSL1
//! <dir>/text_features.bin      N × raw_dim raw text vectors, SSL1
//! <dir>/relevancy.bin          N × N relevancy, SSL1
//! <dir>/relevancy.csv          the same matrix as CSV
//! <dir>/items.csv              video_id,text_id,verb,noun
//! <dir>/eval/...               held-out split with the same files
//! ```
//!
//! The encoders are learned projections, so the features stored here are the
//! raw inputs themselves.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smsl_core::infer::RawVideoBatch;
use smsl_core::train::{SyntheticData, SyntheticSpec};
use smsl_core::{Matrix, RelevancyMatrix};

use crate::error::{CliError, Result};
use crate::io::{self, MatrixFormat};

pub const MANIFEST: &str = "manifest.json";
pub const VIDEO_FEATURES: &str = "video_features.bin";
pub const TEXT_FEATURES: &str = "text_features.bin";
pub const RELEVANCY_BIN: &str = "relevancy.bin";
pub const RELEVANCY_CSV: &str = "relevancy.csv";
pub const ITEMS: &str = "items.csv";
pub const FORMAT: &str = "smsl-dataset/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitInfo {
    pub split: Split,
    /// Relative to the dataset directory.
    pub dir: String,
    pub n_items: usize,
    pub video_shape: [usize; 4],
    pub text_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub synthetic: SyntheticSpec,
    pub splits: Vec<SplitInfo>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> Option<&SplitInfo> {
        self.splits.iter().find(|s| s.split == split)
    }
}

/// One split loaded back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub video: RawVideoBatch,
    pub text: Matrix,
    pub relevancy: RelevancyMatrix,
}

fn write_split(dir: &Path, data: &SyntheticData) -> Result<()> {
    let b = &data.bundle;
    io::write_matrix(
        &dir.join(VIDEO_FEATURES),
        b.video_features.matrix(),
        MatrixFormat::Binary,
    )?;
    io::write_matrix(
        &dir.join(TEXT_FEATURES),
        b.text_features.matrix(),
        MatrixFormat::Binary,
    )?;
    io::save_relevancy(&dir.join(RELEVANCY_BIN), &b.relevancy, MatrixFormat::Binary)?;
    io::save_relevancy(&dir.join(RELEVANCY_CSV), &b.relevancy, MatrixFormat::Csv)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let items = dir.join(ITEMS);
    let csv_err = |e: csv::Error| CliError::Parse {
        path: items.clone(),
        line: 0,
        message: e.to_string(),
    };
    w.write_record(["video_id", "text_id", "verb", "noun"])
        .map_err(csv_err)?;
    for i in 0..b.video_ids.len() {
        w.write_record([
            b.video_ids[i].as_str(),
            b.text_ids[i].as_str(),
            &data.verbs[i].to_string(),
            &data.nouns[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    io::write_bytes(&items, &bytes)
}

fn split_info(split: Split, dir: &str, spec: &SyntheticSpec) -> SplitInfo {
    SplitInfo {
        split,
        dir: dir.into(),
        n_items: spec.n_items,
        video_shape: spec.video_shape,
        text_dim: spec.raw_dim,
    }
}

/// Generates the training split (and a held-out split when `eval_items > 0`)
/// and writes them under `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, spec: &SyntheticSpec, eval_items: usize) -> Result<Manifest> {
    let train = smsl_core::train::generate_synthetic(spec)?;
    write_split(dir, &train)?;
    let mut splits = vec![split_info(Split::Train, ".", spec)];
    if eval_items > 0 {
        let held = spec.held_out(eval_items, spec.split + 1);
        write_split(
            &dir.join("eval"),
            &smsl_core::train::generate_synthetic(&held)?,
        )?;
        splits.push(split_info(Split::Eval, "eval", &held));
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        synthetic: spec.clone(),
        splits,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    io::write_bytes(&dir.join(MANIFEST), json.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let bytes = io::read_bytes(&path)?;
    let m: Manifest = serde_json::from_slice(&bytes).map_err(|e| CliError::json(&path, &e))?;
    if m.format != FORMAT {
        return Err(CliError::Parse {
            path,
            line: 0,
            message: format!("unsupported dataset format {:?}", m.format),
        });
    }
    Ok(m)
}

fn mismatch(path: &Path, what: &str, expected: usize, found: usize) -> CliError {
    CliError::DataMismatch(format!(
        "{}: {what} is {found}, manifest says {expected}",
        path.display()
    ))
}

pub fn read_split(dir: &Path, info: &SplitInfo) -> Result<SplitData> {
    let root: PathBuf = dir.join(&info.dir);
    let vpath = root.join(VIDEO_FEATURES);
    let video_flat = io::read_matrix(&vpath, MatrixFormat::Binary)?;
    let clip: usize = info.video_shape.iter().product();
    if video_flat.shape() != (info.n_items, clip) {
        return Err(mismatch(&vpath, "clip length", clip, video_flat.cols()));
    }
    let video = RawVideoBatch::from_flat(&video_flat, info.video_shape)?;
    let tpath = root.join(TEXT_FEATURES);
    let text = io::read_matrix(&tpath, MatrixFormat::Binary)?;
    if text.shape() != (info.n_items, info.text_dim) {
        return Err(mismatch(&tpath, "text shape", info.text_dim, text.cols()));
    }
    let rpath = root.join(RELEVANCY_BIN);
    let relevancy = io::load_relevancy(&rpath, MatrixFormat::Binary)?;
    if relevancy.shape() != (info.n_items, info.n_items) {
        return Err(mismatch(
            &rpath,
            "relevancy rows",
            info.n_items,
            relevancy.shape().0,
        ));
    }
    Ok(SplitData {
        video,
        text,
        relevancy,
    })
}

/// The requested split, falling back to the training split when the dataset
/// has no held-out split.
pub fn read_eval_split(dir: &Path, manifest: &Manifest) -> Result<SplitData> {
    let info = manifest
        .split(Split::Eval)
        .or_else(|| manifest.split(Split::Train))
        .ok_or_else(|| {
            CliError::DataMismatch(format!("{}: no splits in manifest", dir.display()))
        })?;
    read_split(dir, info)
}

pub fn read_train_split(dir: &Path, manifest: &Manifest) -> Result<SplitData> {
    let info = manifest
        .split(Split::Train)
        .ok_or_else(|| CliError::DataMismatch(format!("{}: no training split", dir.display())))?;
    read_split(dir, info)
}
