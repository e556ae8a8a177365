//! Seeded random instances for tests and benchmarks.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{DatasetBundle, FeatureMatrix, RelevancyMatrix};
use crate::matrix::Matrix;

/// `n` paired items with Gaussian `d`-dimensional features and relevancy drawn
/// from `{0, 0.25, 0.5, 1}`; the diagonal is at least 0.5 so each item is a
/// valid hard-mined pair.
pub fn random_bundle(n: usize, d: usize, seed: u64) -> DatasetBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| Matrix::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let v = gauss(&mut rng);
    let t = gauss(&mut rng);
    const LEVELS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];
    let c = Matrix::from_fn(n, n, |i, j| {
        let level = LEVELS[rng.random_range(0..LEVELS.len())];
        if i == j {
            level.max(0.5)
        } else {
            level
        }
    });
    let ids = |p: &str| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    DatasetBundle::new(
        FeatureMatrix::new(v).expect("finite"),
        FeatureMatrix::new(t).expect("finite"),
        RelevancyMatrix::new(c).expect("levels in range"),
        ids("v"),
        ids("t"),
    )
    .expect("consistent shapes")
}
