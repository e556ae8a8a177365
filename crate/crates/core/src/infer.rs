//! Inference-time augmentation and ensembling.
//!
//! Flip augmentation encodes each video batch twice, once as-is and once
//! with every frame mirrored along its width, and adds the two feature sets.
//! The text features of the two passes are added as well, and the summed
//! features are multiplied directly with no renormalization. When the text
//! encoder ignores the video input this only doubles the text features,
//! which does not change any ranking.

use alloc::vec::Vec;

use crate::data::{dot_similarity, FeatureMatrix, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `N×T×C×H×W` video clips in row-major order; the last axis is the frame width.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVideoBatch {
    n: usize,
    shape: [usize; 4],
    data: Vec<f64>,
}

impl RawVideoBatch {
    pub fn new(n: usize, shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let per_clip: usize = shape.iter().product();
        if shape[3] == 0 {
            return Err(Error::InvalidConfig(
                "frame width must be at least 1".into(),
            ));
        }
        if data.len() != n * per_clip {
            return Err(Error::DimensionMismatch {
                expected: n * per_clip,
                found: data.len(),
            });
        }
        if let Some(p) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: p / per_clip.max(1),
                col: p % per_clip.max(1),
            });
        }
        Ok(Self { n, shape, data })
    }

    /// One clip per row of `m`, each row reshaped to `shape`.
    pub fn from_flat(m: &Matrix, shape: [usize; 4]) -> Result<Self> {
        Self::new(m.rows(), shape, m.as_slice().to_vec())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `[T, C, H, W]`.
    pub fn clip_shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn clip_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Clips flattened to rows of an `N×(T·C·H·W)` matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.n, self.clip_len(), self.data.clone())
            .expect("length checked on construction")
    }

    pub fn select(&self, clips: &[usize]) -> Result<Self> {
        Ok(Self {
            n: clips.len(),
            shape: self.shape,
            data: self.to_matrix().select_rows(clips)?.into_vec(),
        })
    }
}

/// Mirrors every frame along its width (the last axis).
pub fn horizontal_flip(v: &RawVideoBatch) -> RawVideoBatch {
    let w = v.shape[3];
    let mut data = v.data.clone();
    data.chunks_exact_mut(w).for_each(<[f64]>::reverse);
    RawVideoBatch {
        n: v.n,
        shape: v.shape,
        data,
    }
}

/// A model mapping a video batch and a text batch to `(video features, text features)`.
pub trait DualEncoder {
    fn encode(&self, video: &RawVideoBatch, text: &Matrix) -> Result<(Matrix, Matrix)>;
}

impl<F> DualEncoder for F
where
    F: Fn(&RawVideoBatch, &Matrix) -> Result<(Matrix, Matrix)>,
{
    fn encode(&self, video: &RawVideoBatch, text: &Matrix) -> Result<(Matrix, Matrix)> {
        self(video, text)
    }
}

/// `(V_feat + V_feat_flip, T_feat + T_feat_flip)`.
pub fn flip_augmented_features<M: DualEncoder + ?Sized>(
    model: &M,
    video: &RawVideoBatch,
    text: &Matrix,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (v, t) = model.encode(video, text)?;
    let (vf, tf) = model.encode(&horizontal_flip(video), text)?;
    Ok((
        FeatureMatrix::new(v.add(&vf)?)?,
        FeatureMatrix::new(t.add(&tf)?)?,
    ))
}

/// Similarity of flip-augmented features: the plain product of the summed features.
pub fn flip_augmented_similarity<M: DualEncoder + ?Sized>(
    model: &M,
    video: &RawVideoBatch,
    text: &Matrix,
) -> Result<SimilarityMatrix> {
    let (v, t) = flip_augmented_features(model, video, text)?;
    dot_similarity(&v, &t)
}

/// Elementwise sum of the similarity matrices, in list order.
pub fn ensemble_similarity(matrices: &[SimilarityMatrix]) -> Result<SimilarityMatrix> {
    let (first, rest) = matrices.split_first().ok_or(Error::EmptyEnsemble)?;
    let mut acc = first.matrix().clone();
    for m in rest {
        acc.add_assign(m.matrix())?;
    }
    SimilarityMatrix::new(acc)
}
