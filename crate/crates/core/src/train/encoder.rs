use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::l2_normalize;
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::infer::{DualEncoder, RawVideoBatch};
use crate::matrix::Matrix;

/// Linear projections `x·W + b` from raw inputs to the shared embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub video_weight: Matrix,
    pub video_bias: Matrix,
    pub text_weight: Matrix,
    pub text_bias: Matrix,
}

/// Gradients with the same layout as [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub video_weight: Matrix,
    pub video_bias: Matrix,
    pub text_weight: Matrix,
    pub text_bias: Matrix,
}

fn column_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for row in m.row_iter() {
        for (o, x) in out.as_mut_slice().iter_mut().zip(row) {
            *o += x;
        }
    }
    out
}

fn project(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mut out = x.matmul(w)?;
    for r in 0..out.rows() {
        for (o, bias) in out.row_mut(r).iter_mut().zip(b.as_slice()) {
            *o += bias;
        }
    }
    Ok(out)
}

impl EncoderParams {
    /// Gaussian weights with standard deviation `1/√fan_in`, zero biases.
    pub fn init(video_dim: usize, text_dim: usize, embed_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut gauss = |rows: usize| {
            let scale = 1.0 / libm::sqrt(rows.max(1) as f64);
            Matrix::from_fn(rows, embed_dim, |_, _| {
                scale * rng.sample::<f64, _>(StandardNormal)
            })
        };
        let video_weight = gauss(video_dim);
        let text_weight = gauss(text_dim);
        Self {
            video_weight,
            video_bias: Matrix::zeros(1, embed_dim),
            text_weight,
            text_bias: Matrix::zeros(1, embed_dim),
        }
    }

    pub fn seeded(video_dim: usize, text_dim: usize, embed_dim: usize, seed: u64) -> Self {
        Self::init(
            video_dim,
            text_dim,
            embed_dim,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
    }

    /// Checks that the four tensors describe a consistent pair of projections.
    pub fn from_parts(
        video_weight: Matrix,
        video_bias: Matrix,
        text_weight: Matrix,
        text_bias: Matrix,
    ) -> Result<Self> {
        let d = video_weight.cols();
        video_bias.ensure_shape((1, d), "video bias")?;
        text_weight.ensure_shape((text_weight.rows(), d), "text weight")?;
        text_bias.ensure_shape((1, d), "text bias")?;
        let p = Self {
            video_weight,
            video_bias,
            text_weight,
            text_bias,
        };
        for m in p.tensors() {
            if let Some((row, col)) = m.first_non_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(p)
    }

    pub fn embed_dim(&self) -> usize {
        self.video_weight.cols()
    }

    pub fn video_dim(&self) -> usize {
        self.video_weight.rows()
    }

    pub fn text_dim(&self) -> usize {
        self.text_weight.rows()
    }

    pub fn tensors(&self) -> [&Matrix; 4] {
        [
            &self.video_weight,
            &self.video_bias,
            &self.text_weight,
            &self.text_bias,
        ]
    }

    pub(crate) fn tensor_lens(&self) -> Vec<usize> {
        self.tensors().iter().map(|m| m.as_slice().len()).collect()
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.video_weight.as_mut_slice(),
            self.video_bias.as_mut_slice(),
            self.text_weight.as_mut_slice(),
            self.text_bias.as_mut_slice(),
        ]
    }

    /// Unnormalized video embeddings, one row per clip.
    pub fn project_video(&self, x: &Matrix) -> Result<Matrix> {
        project(x, &self.video_weight, &self.video_bias)
    }

    pub fn project_text(&self, x: &Matrix) -> Result<Matrix> {
        project(x, &self.text_weight, &self.text_bias)
    }

    /// Parameter gradients given raw inputs and `∂L/∂(projected features)`.
    pub fn gradients(
        &self,
        video_in: &Matrix,
        text_in: &Matrix,
        grad_video: &Matrix,
        grad_text: &Matrix,
    ) -> Result<EncoderGrads> {
        Ok(EncoderGrads {
            video_weight: video_in.transposed_matmul(grad_video)?,
            video_bias: column_sums(grad_video),
            text_weight: text_in.transposed_matmul(grad_text)?,
            text_bias: column_sums(grad_text),
        })
    }
}

impl EncoderGrads {
    pub fn tensors(&self) -> [&Matrix; 4] {
        [
            &self.video_weight,
            &self.video_bias,
            &self.text_weight,
            &self.text_bias,
        ]
    }
}

/// Encodes and L2-normalizes both modalities.
impl DualEncoder for EncoderParams {
    fn encode(&self, video: &RawVideoBatch, text: &Matrix) -> Result<(Matrix, Matrix)> {
        let v = l2_normalize(&FeatureMatrix::new(
            self.project_video(&video.to_matrix())?,
        )?)?;
        let t = l2_normalize(&FeatureMatrix::new(self.project_text(text)?)?)?;
        Ok((v.into_matrix(), t.into_matrix()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_and_gradients() {
        let p = EncoderParams::from_parts(
            Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap(),
            Matrix::from_rows(&[[0.5, 0.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
            Matrix::zeros(1, 2),
        )
        .unwrap();
        let x = Matrix::from_rows(&[[1.0, 1.0], [2.0, 0.0]]).unwrap();
        assert_eq!(
            p.project_video(&x).unwrap().as_slice(),
            &[1.5, 2.0, 2.5, 0.0]
        );
        let g = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let xt = Matrix::from_rows(&[[1.0], [3.0]]).unwrap();
        let grads = p.gradients(&x, &xt, &g, &g).unwrap();
        assert_eq!(grads.video_weight.as_slice(), &[1.0, 2.0, 1.0, 0.0]);
        assert_eq!(grads.video_bias.as_slice(), &[1.0, 1.0]);
        assert_eq!(grads.text_weight.as_slice(), &[1.0, 3.0]);
    }

    #[test]
    fn inconsistent_parts_rejected() {
        assert!(EncoderParams::from_parts(
            Matrix::zeros(2, 3),
            Matrix::zeros(1, 2),
            Matrix::zeros(2, 3),
            Matrix::zeros(1, 3),
        )
        .is_err());
    }
}
