use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{relevancy_from_labels, DatasetBundle, FeatureMatrix};
use crate::error::{Error, Result};
use crate::infer::RawVideoBatch;
use crate::matrix::Matrix;

/// Parameters of the synthetic verb/noun retrieval task.
///
/// Every item gets one verb and one noun class. Its raw video clip is the sum
/// of a per-verb and a per-noun prototype clip plus Gaussian noise, and its
/// raw text is built the same way from separate text prototypes. Relevancy
/// between items is the label overlap, so it takes the values 0, ½ and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_items: usize,
    pub n_verb_classes: usize,
    pub n_noun_classes: usize,
    /// Dimensionality of the raw text vector.
    pub raw_dim: usize,
    /// `[T, C, H, W]` of each raw video clip.
    pub video_shape: [usize; 4],
    pub noise_sigma: f64,
    pub seed: u64,
    /// Items are drawn from a stream keyed by `(seed, split)`; prototypes only
    /// depend on `seed`, so different splits share the same classes.
    pub split: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_items: 256,
            n_verb_classes: 8,
            n_noun_classes: 12,
            raw_dim: 32,
            video_shape: [2, 1, 2, 8],
            noise_sigma: 0.5,
            seed: 0,
            split: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_items < 2 {
            return bad("n_items must be at least 2");
        }
        if self.n_verb_classes < 2 || self.n_noun_classes < 2 {
            return bad("class counts must be at least 2");
        }
        if self.raw_dim == 0 || self.video_shape.contains(&0) {
            return bad("raw dimensions must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        Ok(())
    }

    /// Same classes, different items.
    pub fn held_out(&self, n_items: usize, split: u64) -> Self {
        Self {
            n_items,
            split,
            ..self.clone()
        }
    }
}

/// A generated dataset: the bundle (raw inputs as features) plus the raw
/// tensors and class labels behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub bundle: DatasetBundle,
    pub video: RawVideoBatch,
    pub text: Matrix,
    pub verbs: Vec<u32>,
    pub nouns: Vec<u32>,
}

const SPLIT_KEY: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let clip: usize = spec.video_shape.iter().product();
    let mut proto_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut protos = |count: usize, dim: usize| {
        Matrix::from_fn(count, dim, |_, _| {
            proto_rng.sample::<f64, _>(StandardNormal)
        })
    };
    let video_verbs = protos(spec.n_verb_classes, clip);
    let video_nouns = protos(spec.n_noun_classes, clip);
    let text_verbs = protos(spec.n_verb_classes, spec.raw_dim);
    let text_nouns = protos(spec.n_noun_classes, spec.raw_dim);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ spec.split.wrapping_mul(SPLIT_KEY));
    let n = spec.n_items;
    let verbs: Vec<u32> = (0..n)
        .map(|_| rng.random_range(0..spec.n_verb_classes as u32))
        .collect();
    let nouns: Vec<u32> = (0..n)
        .map(|_| rng.random_range(0..spec.n_noun_classes as u32))
        .collect();

    let sigma = spec.noise_sigma;
    let mut compose = |verb_p: &Matrix, noun_p: &Matrix, dim: usize| {
        let mut m = Matrix::zeros(n, dim);
        for i in 0..n {
            let (v, u) = (verb_p.row(verbs[i] as usize), noun_p.row(nouns[i] as usize));
            for (k, x) in m.row_mut(i).iter_mut().enumerate() {
                let noise = if sigma > 0.0 {
                    sigma * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                *x = v[k] + u[k] + noise;
            }
        }
        m
    };
    let video_flat = compose(&video_verbs, &video_nouns, clip);
    let text = compose(&text_verbs, &text_nouns, spec.raw_dim);

    let verb_sets: Vec<[u32; 1]> = verbs.iter().map(|&v| [v]).collect();
    let noun_sets: Vec<[u32; 1]> = nouns.iter().map(|&u| [u]).collect();
    let relevancy = relevancy_from_labels(&verb_sets, &noun_sets, &verb_sets, &noun_sets)?;
    let video = RawVideoBatch::from_flat(&video_flat, spec.video_shape)?;
    let bundle = DatasetBundle::new(
        FeatureMatrix::new(video_flat)?,
        FeatureMatrix::new(text.clone())?,
        relevancy,
        (0..n)
            .map(|i| format!("video-{}-{i:05}", spec.split))
            .collect(),
        (0..n)
            .map(|i| format!("text-{}-{i:05}", spec.split))
            .collect(),
    )?;
    Ok(SyntheticData {
        bundle,
        video,
        text,
        verbs,
        nouns,
    })
}
