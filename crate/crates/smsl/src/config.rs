//! Experiment configuration: one JSON document per experiment.
//!
//! Every section and field is optional; missing entries take their defaults.
//! Unknown keys are rejected.
//!
//! ```json
//! {
//!   "synthetic": { "n_items": 256, "seed": 0, ... },
//!   "eval_items": 256,
//!   "train": { "loss": "sms", "loss_config": { "margin": 0.6, ... }, ... },
//!   "compare": [ { "loss": "mi_mm" }, { "loss": "sms", "relaxation": 0.0 } ],
//!   "paths": { "dataset": "data", "out": "runs" }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smsl_core::train::{SyntheticSpec, TrainConfig};
use smsl_core::{LossConfig, LossKind};

use crate::error::{CliError, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory written by `gen-data` and read by the other commands.
    pub dataset: PathBuf,
    /// Directory for checkpoints, reports and tables.
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            out: PathBuf::from("runs"),
        }
    }
}

/// One row of a loss comparison. Unset margin and relaxation fall back to
/// the per-loss defaults of [`LossConfig::for_kind`]; the remaining loss
/// settings come from `train.loss_config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareEntry {
    pub loss: LossKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
    /// Must equal `paths.dataset` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
}

impl CompareEntry {
    pub fn new(loss: LossKind) -> Self {
        Self {
            loss,
            label: None,
            margin: None,
            relaxation: None,
            dataset: None,
        }
    }

    pub fn display_label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let base = match self.loss {
            LossKind::MiMm => "MI-MM",
            LossKind::AdaptiveMiMm => "Adaptive MI-MM",
            LossKind::Ms => "MS",
            LossKind::MsLimit => "MS (limit)",
            LossKind::Sms => "SMS",
        };
        match (self.loss, self.relaxation) {
            (LossKind::Sms, Some(0.0)) => "SMS w/o τ".into(),
            (LossKind::Sms, Some(t)) => format!("SMS τ={t}"),
            _ => base.into(),
        }
    }

    pub fn loss_config(&self, base: &LossConfig) -> LossConfig {
        let defaults = LossConfig::for_kind(self.loss);
        LossConfig {
            margin: self.margin.unwrap_or(defaults.margin),
            relaxation: self.relaxation.unwrap_or(defaults.relaxation),
            ..*base
        }
    }
}

fn default_compare() -> Vec<CompareEntry> {
    vec![
        CompareEntry::new(LossKind::MiMm),
        CompareEntry::new(LossKind::AdaptiveMiMm),
        CompareEntry::new(LossKind::Sms),
        CompareEntry {
            relaxation: Some(0.0),
            ..CompareEntry::new(LossKind::Sms)
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synthetic: SyntheticSpec,
    /// Size of the held-out evaluation split written next to the training
    /// data; 0 evaluates on the training items.
    pub eval_items: usize,
    pub train: TrainConfig,
    pub compare: Vec<CompareEntry>,
    pub paths: Paths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            synthetic: SyntheticSpec::default(),
            eval_items: 256,
            train: TrainConfig::default(),
            compare: default_compare(),
            paths: Paths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.train.validate()?;
        if self.eval_items == 1 {
            return Err(CliError::Usage("eval_items must be 0 or at least 2".into()));
        }
        for entry in &self.compare {
            entry.loss_config(&self.train.loss_config).validate()?;
        }
        Ok(())
    }

    /// Parses and validates; syntax and schema errors report line and column.
    pub fn from_json(path: &Path, text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::json(path, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = io::read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|e| CliError::Parse {
            path: path.into(),
            line: 0,
            message: e.to_string(),
        })?;
        Self::from_json(path, &text)
    }

    /// The config at `path`, or the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
