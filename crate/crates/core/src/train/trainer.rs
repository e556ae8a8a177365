use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{EncoderGrads, EncoderParams};
use super::optim::{AdamW, OptimizerConfig};
use super::schedule::cosine_schedule;
use crate::data::{
    cosine_similarity, gather_batch_relevancy, l2_normalize, FeatureMatrix, RelevancyMatrix,
    SimilarityMatrix,
};
use crate::error::{Error, Result};
use crate::infer::{flip_augmented_similarity, RawVideoBatch};
use crate::losses::{backprop_to_embeddings, evaluate_loss, LossConfig, LossKind, LossResult};
use crate::matrix::Matrix;
use crate::metrics::{evaluate, RetrievalReport, DEFAULT_RELEVANCE_THRESHOLD};
use crate::mining::{mine_targets, MiningStrategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub loss_config: LossConfig,
    pub mining: MiningStrategy,
    pub lr: f64,
    /// Floor of the cosine decay.
    pub lr_end: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub batch_size: usize,
    pub embed_dim: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// mAP binarization threshold for the per-epoch evaluation.
    pub relevance_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Sms,
            loss_config: LossConfig::default(),
            mining: MiningStrategy::PairedBatch,
            lr: 2e-5,
            lr_end: 1e-6,
            warmup_epochs: 1,
            total_epochs: 100,
            batch_size: 32,
            embed_dim: 256,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        self.loss_config.validate()?;
        self.optimizer.validate()?;
        if !(self.lr.is_finite() && self.lr_end >= 0.0 && self.lr_end <= self.lr) {
            return bad("learning rates need 0 <= lr_end <= lr");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.total_epochs == 0 || self.warmup_epochs >= self.total_epochs {
            return bad("need 0 <= warmup_epochs < total_epochs");
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive");
        }
        if !(self.relevance_threshold > 0.0 && self.relevance_threshold <= 1.0) {
            return Err(Error::InvalidThreshold(self.relevance_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's batches of the summed batch loss.
    pub loss: f64,
    /// Mean over the epoch's batches of the per-triple loss.
    pub loss_per_triple: f64,
    pub lr: f64,
    pub report: RetrievalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub history: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

/// One mini-batch: raw inputs of the video and text sides and their relevancy block.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchInputs {
    pub video: Matrix,
    pub text: Matrix,
    pub relevancy: RelevancyMatrix,
}

/// Loss and parameter gradients on one batch.
pub fn batch_gradients(
    params: &EncoderParams,
    batch: &BatchInputs,
    kind: LossKind,
    loss_cfg: &LossConfig,
    mining: MiningStrategy,
) -> Result<(LossResult, EncoderGrads)> {
    let fv = FeatureMatrix::new(params.project_video(&batch.video)?)?;
    let ft = FeatureMatrix::new(params.project_text(&batch.text)?)?;
    let s = cosine_similarity(&l2_normalize(&fv)?, &l2_normalize(&ft)?)?;
    let targets = mine_targets(&batch.relevancy, Some(&s), mining, loss_cfg.threshold)?;
    let loss = evaluate_loss(
        kind,
        &s,
        &s.transpose(),
        &targets,
        &batch.relevancy,
        loss_cfg,
    )?;
    let (gv, gt) = backprop_to_embeddings(&loss.video_major_gradient(), &fv, &ft)?;
    let grads = params.gradients(&batch.video, &batch.text, &gv, &gt)?;
    Ok((loss, grads))
}

/// L2-normalized embeddings of both modalities.
pub fn encode_features(
    params: &EncoderParams,
    video: &RawVideoBatch,
    text: &Matrix,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let v = FeatureMatrix::new(params.project_video(&video.to_matrix())?)?;
    let t = FeatureMatrix::new(params.project_text(text)?)?;
    Ok((l2_normalize(&v)?, l2_normalize(&t)?))
}

/// Video-major similarity; with `flip`, the flip-augmented product of summed features.
pub fn similarity_for(
    params: &EncoderParams,
    video: &RawVideoBatch,
    text: &Matrix,
    flip: bool,
) -> Result<SimilarityMatrix> {
    if video.clip_len() != params.video_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.video_dim(),
            found: video.clip_len(),
        });
    }
    if text.cols() != params.text_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.text_dim(),
            found: text.cols(),
        });
    }
    if flip {
        flip_augmented_similarity(params, video, text)
    } else {
        let (v, t) = encode_features(params, video, text)?;
        cosine_similarity(&v, &t)
    }
}

fn batches_in_epoch(n: usize, batch_size: usize) -> usize {
    n / batch_size + usize::from(n % batch_size >= 2)
}

/// Trains from a seeded initialization. See [`train_from`].
pub fn train(
    video: &RawVideoBatch,
    text: &Matrix,
    relevancy: &RelevancyMatrix,
    cfg: &TrainConfig,
    eval: Option<(&RawVideoBatch, &Matrix, &RelevancyMatrix)>,
) -> Result<TrainOutcome> {
    train_from(None, video, text, relevancy, cfg, eval)
}

/// Mini-batch training with a fresh warmup + cosine schedule.
///
/// Each epoch shuffles the videos; with paired-batch mining each video is
/// paired with a text drawn uniformly from `{j | c_ij ≥ threshold}` (its own
/// text when that set is empty), otherwise with its own text. The batch
/// relevancy block is gathered before the loss is evaluated. After each epoch
/// the model is evaluated on `eval` (or the training data).
pub fn train_from(
    init: Option<EncoderParams>,
    video: &RawVideoBatch,
    text: &Matrix,
    relevancy: &RelevancyMatrix,
    cfg: &TrainConfig,
    eval: Option<(&RawVideoBatch, &Matrix, &RelevancyMatrix)>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = video.len();
    relevancy
        .matrix()
        .ensure_shape((n, text.rows()), "relevancy")?;
    if cfg.mining == MiningStrategy::PairedBatch && text.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: text.rows(),
        });
    }
    let mut warnings = Vec::new();
    if let Some(w) = cfg.loss_config.relaxation_warning(relevancy) {
        if cfg.loss == LossKind::Sms {
            warnings.push(w.to_string());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fresh = EncoderParams::init(video.clip_len(), text.cols(), cfg.embed_dim, &mut rng);
    let mut params = match init {
        Some(p) => {
            if (p.video_dim(), p.text_dim()) != (video.clip_len(), text.cols()) {
                return Err(Error::ShapeMismatch {
                    what: "warm-start parameters",
                    expected: (video.clip_len(), text.cols()),
                    found: (p.video_dim(), p.text_dim()),
                });
            }
            p
        }
        None => fresh,
    };
    let mut opt = AdamW::new(cfg.optimizer, &params.tensor_lens());

    let video_flat = video.to_matrix();
    let partners: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..text.rows())
                .filter(|&j| relevancy.get(i, j) >= cfg.loss_config.threshold)
                .collect()
        })
        .collect();

    let per_epoch = batches_in_epoch(n, cfg.batch_size);
    if per_epoch == 0 {
        return Err(Error::InvalidConfig(
            "dataset too small for one batch".into(),
        ));
    }
    let total_steps = per_epoch * cfg.total_epochs;
    let warmup_steps = per_epoch * cfg.warmup_epochs;

    let (ev_video, ev_text, ev_rel) = eval.unwrap_or((video, text, relevancy));
    let mut history = Vec::with_capacity(cfg.total_epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    let mut lr = 0.0;
    for epoch in 0..cfg.total_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut per_triple_sum, mut batches) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size).filter(|c| c.len() >= 2) {
            let texts: Vec<usize> = match cfg.mining {
                MiningStrategy::PairedBatch => chunk
                    .iter()
                    .map(|&i| *partners[i].choose(&mut rng).unwrap_or(&i))
                    .collect(),
                _ => chunk.to_vec(),
            };
            let batch = BatchInputs {
                video: video_flat.select_rows(chunk)?,
                text: text.select_rows(&texts)?,
                relevancy: gather_batch_relevancy(relevancy, chunk, &texts)?,
            };
            let (loss, grads) =
                batch_gradients(&params, &batch, cfg.loss, &cfg.loss_config, cfg.mining)?;
            let finite = loss.value.is_finite()
                && grads
                    .tensors()
                    .iter()
                    .all(|g| g.first_non_finite().is_none());
            if !finite {
                return Err(Error::DivergenceDetected { epoch, step });
            }
            lr = cosine_schedule(step, total_steps, warmup_steps, cfg.lr, cfg.lr_end)?;
            let g = grads.tensors().map(Matrix::as_slice);
            opt.step(lr, &mut params.slices_mut(), &g);
            loss_sum += loss.value;
            per_triple_sum += loss.mean_value();
            batches += 1;
            step += 1;
        }
        let s = similarity_for(&params, ev_video, ev_text, false).map_err(|e| match e {
            Error::ZeroRow { .. } | Error::NonFinite { .. } => {
                Error::DivergenceDetected { epoch, step }
            }
            other => other,
        })?;
        let report = evaluate(&s, ev_rel, cfg.relevance_threshold)?;
        history.push(EpochRecord {
            epoch: epoch + 1,
            loss: loss_sum / batches as f64,
            loss_per_triple: per_triple_sum / batches as f64,
            lr,
            report,
        });
    }
    Ok(TrainOutcome {
        params,
        history,
        warnings,
    })
}
