//! Embeddings, soft relevancy labels and similarity matrices.
//!
//! Similarity between a video row `v_i` and a text row `t_j` is the dot
//! product of their L2-normalized embeddings, so `S[i][j] ∈ [-1, 1]`.
//! Training pushes matched pairs above mismatched ones by a margin scaled
//! by the relevancy matrix `C`, whose entries are soft labels in `[0, 1]`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};

const UNIT_NORM_TOL: f64 = 1e-6;
const ZERO_NORM: f64 = 1e-12;

/// N×D embedding rows, optionally L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Matrix,
    normalized: bool,
}

impl FeatureMatrix {
    /// Wraps raw (unnormalized) embeddings. Every entry must be finite.
    pub fn new(data: Matrix) -> Result<Self> {
        if let Some((row, col)) = data.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self {
            data,
            normalized: false,
        })
    }

    /// Wraps embeddings that are claimed to be unit-norm, checking the claim.
    pub fn from_normalized(data: Matrix) -> Result<Self> {
        let mut m = Self::new(data)?;
        for (row, r) in m.data.row_iter().enumerate() {
            if libm::fabs(norm(r) - 1.0) > UNIT_NORM_TOL {
                return Err(Error::NotNormalized { row });
            }
        }
        m.normalized = true;
        Ok(m)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn l2_normalize(&self) -> Result<Self> {
        l2_normalize(self)
    }
}

/// Divides each row by its Euclidean norm.
pub fn l2_normalize(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut out = m.data.clone();
    for index in 0..out.rows() {
        let row = out.row_mut(index);
        let n = norm(row);
        if n < ZERO_NORM {
            return Err(Error::ZeroRow { index });
        }
        row.iter_mut().for_each(|x| *x /= n);
    }
    Ok(FeatureMatrix {
        data: out,
        normalized: true,
    })
}

/// N_v×N_t similarity scores. Rows are anchors of the retrieval direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    data: Matrix,
}

impl SimilarityMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if let Some((row, col)) = data.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { data })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    /// The same scores seen from the other modality.
    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
        }
    }
}

/// `S = V·Tᵀ` on L2-normalized features.
pub fn cosine_similarity(v: &FeatureMatrix, t: &FeatureMatrix) -> Result<SimilarityMatrix> {
    for m in [v, t] {
        if !m.normalized {
            let row = (0..m.rows())
                .find(|&r| libm::fabs(norm(m.data.row(r)) - 1.0) > UNIT_NORM_TOL)
                .unwrap_or(0);
            return Err(Error::NotNormalized { row });
        }
    }
    dot_similarity(v, t)
}

/// Plain matrix product `V·Tᵀ`, with no normalization requirement.
pub fn dot_similarity(v: &FeatureMatrix, t: &FeatureMatrix) -> Result<SimilarityMatrix> {
    if v.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            found: t.dim(),
        });
    }
    SimilarityMatrix::new(v.data.matmul_transposed(&t.data)?)
}

/// Soft labels `c_ij ∈ [0, 1]` between video `i` and text `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevancyMatrix {
    data: Matrix,
    min_positive: Option<f64>,
}

impl RelevancyMatrix {
    /// Validates every entry strictly: values outside `[0, 1]` (or NaN) are rejected, never clamped.
    pub fn new(data: Matrix) -> Result<Self> {
        let mut min_positive: Option<f64> = None;
        for row in 0..data.rows() {
            for col in 0..data.cols() {
                let value = data[(row, col)];
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Range { row, col, value });
                }
                if value > 0.0 {
                    min_positive = Some(min_positive.map_or(value, |m| m.min(value)));
                }
            }
        }
        Ok(Self { data, min_positive })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    /// Smallest strictly positive entry, if any.
    pub fn min_positive(&self) -> Option<f64> {
        self.min_positive
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
            min_positive: self.min_positive,
        }
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_hard(&self) -> bool {
        self.data.as_slice().iter().all(|&c| c == 0.0 || c == 1.0)
    }
}

fn sorted_set(labels: &[u32]) -> Vec<u32> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

fn label_sets<L: AsRef<[u32]>>(labels: &[L], offset: usize) -> Result<Vec<Vec<u32>>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let s = sorted_set(l.as_ref());
            if s.is_empty() {
                Err(Error::EmptyLabelSet { index: offset + i })
            } else {
                Ok(s)
            }
        })
        .collect()
}

/// Synthetic relevancy from verb/noun class annotations:
/// `c_ij = ½·J(verbs_i, verbs_j) + ½·J(nouns_i, nouns_j)` with `J` the Jaccard overlap.
///
/// Side `a` indexes rows, side `b` columns. Empty label sets are reported by
/// item index (side `b` items are offset by the length of side `a`).
pub fn relevancy_from_labels<L: AsRef<[u32]>>(
    verbs_a: &[L],
    nouns_a: &[L],
    verbs_b: &[L],
    nouns_b: &[L],
) -> Result<RelevancyMatrix> {
    if verbs_a.len() != nouns_a.len() {
        return Err(Error::DimensionMismatch {
            expected: verbs_a.len(),
            found: nouns_a.len(),
        });
    }
    if verbs_b.len() != nouns_b.len() {
        return Err(Error::DimensionMismatch {
            expected: verbs_b.len(),
            found: nouns_b.len(),
        });
    }
    let va = label_sets(verbs_a, 0)?;
    let na = label_sets(nouns_a, 0)?;
    let vb = label_sets(verbs_b, verbs_a.len())?;
    let nb = label_sets(nouns_b, verbs_a.len())?;
    let m = Matrix::from_fn(va.len(), vb.len(), |i, j| {
        0.5 * jaccard(&va[i], &vb[j]) + 0.5 * jaccard(&na[i], &nb[j])
    });
    RelevancyMatrix::new(m)
}

/// Extracts the `B_v×B_t` block `[a][b] = full[video_indices[a]][text_indices[b]]`.
pub fn gather_batch_relevancy(
    full: &RelevancyMatrix,
    video_indices: &[usize],
    text_indices: &[usize],
) -> Result<RelevancyMatrix> {
    let (nv, nt) = full.shape();
    if let Some(&index) = video_indices.iter().find(|&&i| i >= nv) {
        return Err(Error::IndexOutOfRange { index, len: nv });
    }
    if let Some(&index) = text_indices.iter().find(|&&i| i >= nt) {
        return Err(Error::IndexOutOfRange { index, len: nt });
    }
    let m = Matrix::from_fn(video_indices.len(), text_indices.len(), |a, b| {
        full.get(video_indices[a], text_indices[b])
    });
    RelevancyMatrix::new(m)
}

/// The triple `{V, T, C}` plus stable row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub video_features: FeatureMatrix,
    pub text_features: FeatureMatrix,
    pub relevancy: RelevancyMatrix,
    pub video_ids: Vec<String>,
    pub text_ids: Vec<String>,
}

impl DatasetBundle {
    pub fn new(
        video_features: FeatureMatrix,
        text_features: FeatureMatrix,
        relevancy: RelevancyMatrix,
        video_ids: Vec<String>,
        text_ids: Vec<String>,
    ) -> Result<Self> {
        let expected = (video_features.rows(), text_features.rows());
        relevancy.matrix().ensure_shape(expected, "relevancy")?;
        if video_ids.len() != expected.0 {
            return Err(Error::DimensionMismatch {
                expected: expected.0,
                found: video_ids.len(),
            });
        }
        if text_ids.len() != expected.1 {
            return Err(Error::DimensionMismatch {
                expected: expected.1,
                found: text_ids.len(),
            });
        }
        Ok(Self {
            video_features,
            text_features,
            relevancy,
            video_ids,
            text_ids,
        })
    }
}
