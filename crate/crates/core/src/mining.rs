//! Positive/negative partitions and (anchor, positive, negative) triples.
//!
//! Threshold mining follows the usual hard-mining rule for soft labels:
//! candidate `j` is a positive of anchor `i` iff `c_ij ≥ threshold`. This
//! admits partially matched pairs as positives, which is exactly the case
//! where a negative can be *more* relevant than the positive it is ranked
//! against (see [`pair_correlation`]).

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{RelevancyMatrix, SimilarityMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    VideoToText,
    TextToVideo,
}

impl Direction {
    /// Anchor and candidate counts for a relevancy/similarity matrix stored video-major.
    pub fn extents(self, video_major: (usize, usize)) -> (usize, usize) {
        match self {
            Direction::VideoToText => video_major,
            Direction::TextToVideo => (video_major.1, video_major.0),
        }
    }

    /// `c(anchor, candidate)` read from the video-major relevancy matrix.
    #[inline]
    pub fn relevancy(self, c: &RelevancyMatrix, anchor: usize, candidate: usize) -> f64 {
        match self {
            Direction::VideoToText => c.get(anchor, candidate),
            Direction::TextToVideo => c.get(candidate, anchor),
        }
    }
}

/// Per-anchor positive set `P_i` and negative set `N_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveSets {
    pub direction: Direction,
    pub threshold: f64,
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl PositiveSets {
    pub fn anchors(&self) -> usize {
        self.positives.len()
    }
}

pub fn build_positive_sets(
    relevancy: &RelevancyMatrix,
    threshold: f64,
    direction: Direction,
) -> Result<PositiveSets> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    let (anchors, candidates) = direction.extents(relevancy.shape());
    let mut positives = Vec::with_capacity(anchors);
    let mut negatives = Vec::with_capacity(anchors);
    for i in 0..anchors {
        let (p, n): (Vec<usize>, Vec<usize>) =
            (0..candidates).partition(|&j| direction.relevancy(relevancy, i, j) >= threshold);
        positives.push(p);
        negatives.push(n);
    }
    Ok(PositiveSets {
        direction,
        threshold,
        positives,
        negatives,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

impl Triplet {
    pub const fn new(anchor: usize, positive: usize, negative: usize) -> Self {
        Self {
            anchor,
            positive,
            negative,
        }
    }

    pub const fn swapped(self) -> Self {
        Self::new(self.anchor, self.negative, self.positive)
    }
}

/// Triples for one retrieval direction, ordered by anchor, then positive, then negative.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletSet {
    pub direction: Direction,
    pub triples: Vec<Triplet>,
}

impl TripletSet {
    pub fn new(direction: Direction, triples: Vec<Triplet>) -> Self {
        Self { direction, triples }
    }

    pub fn empty(direction: Direction) -> Self {
        Self::new(direction, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletStrategy {
    /// Every `(i, j ∈ P_i, k ∈ N_i)`.
    #[default]
    AllPairs,
    /// One triple per `(i, j)` using the negative with the largest `S_ik` (lowest index on ties).
    HardestNegative,
}

pub fn enumerate_triplets(
    sets: &PositiveSets,
    strategy: TripletStrategy,
    similarity: Option<&SimilarityMatrix>,
) -> Result<TripletSet> {
    let mut triples = Vec::new();
    match strategy {
        TripletStrategy::AllPairs => {
            for (i, (pos, neg)) in sets.positives.iter().zip(&sets.negatives).enumerate() {
                for &j in pos {
                    triples.extend(neg.iter().map(|&k| Triplet::new(i, j, k)));
                }
            }
        }
        TripletStrategy::HardestNegative => {
            let s = similarity.ok_or(Error::MissingSimilarity)?;
            s.matrix()
                .ensure_shape((sets.anchors(), s.shape().1), "similarity")?;
            for (i, (pos, neg)) in sets.positives.iter().zip(&sets.negatives).enumerate() {
                if let Some(&k0) = neg.first() {
                    if k0 >= s.shape().1 {
                        return Err(Error::IndexOutOfRange {
                            index: k0,
                            len: s.shape().1,
                        });
                    }
                }
                let hardest = neg
                    .iter()
                    .copied()
                    .fold(None::<usize>, |best, k| match best {
                        Some(b) if s.get(i, b) >= s.get(i, k) => Some(b),
                        _ => Some(k),
                    });
                if let Some(k) = hardest {
                    triples.extend(pos.iter().map(|&j| Triplet::new(i, j, k)));
                }
            }
        }
    }
    Ok(TripletSet::new(sets.direction, triples))
}

/// In-batch triples for `n` aligned pairs: the positive of anchor `i` is its
/// own partner `i`, and every other batch item `k ≠ i` is a negative regardless
/// of its relevancy. This is how a data loader that draws hard-mined pairs
/// feeds a margin loss.
pub fn paired_batch_triplets(n: usize, direction: Direction) -> TripletSet {
    let mut triples = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        triples.extend((0..n).filter(|&k| k != i).map(|k| Triplet::new(i, i, k)));
    }
    TripletSet::new(direction, triples)
}

/// How a batch is turned into triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiningStrategy {
    /// Aligned pairs: positive is the batch partner, all other items are negatives.
    #[default]
    PairedBatch,
    /// Threshold partition, every positive against every negative.
    AllPairs,
    /// Threshold partition, every positive against the hardest negative.
    HardestNegative,
}

/// Mined structure for one batch in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTargets {
    pub triplets_v2t: TripletSet,
    pub triplets_t2v: TripletSet,
    pub sets_v2t: PositiveSets,
    pub sets_t2v: PositiveSets,
}

fn paired_sets(n: usize, direction: Direction) -> PositiveSets {
    PositiveSets {
        direction,
        threshold: 0.0,
        positives: (0..n).map(|i| alloc::vec![i]).collect(),
        negatives: (0..n)
            .map(|i| (0..n).filter(|&k| k != i).collect())
            .collect(),
    }
}

/// Mines triples (and, for the multi-similarity loss, positive sets) for both directions.
///
/// `similarity` is the video-major batch similarity; it is only consulted by
/// [`MiningStrategy::HardestNegative`]. Paired-batch mining needs a square batch.
pub fn mine_targets(
    relevancy: &RelevancyMatrix,
    similarity: Option<&SimilarityMatrix>,
    strategy: MiningStrategy,
    threshold: f64,
) -> Result<BatchTargets> {
    match strategy {
        MiningStrategy::PairedBatch => {
            let (rows, cols) = relevancy.shape();
            if rows != cols {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: cols,
                });
            }
            Ok(BatchTargets {
                triplets_v2t: paired_batch_triplets(rows, Direction::VideoToText),
                triplets_t2v: paired_batch_triplets(rows, Direction::TextToVideo),
                sets_v2t: paired_sets(rows, Direction::VideoToText),
                sets_t2v: paired_sets(rows, Direction::TextToVideo),
            })
        }
        MiningStrategy::AllPairs | MiningStrategy::HardestNegative => {
            let strategy = if strategy == MiningStrategy::AllPairs {
                TripletStrategy::AllPairs
            } else {
                TripletStrategy::HardestNegative
            };
            let sets_v2t = build_positive_sets(relevancy, threshold, Direction::VideoToText)?;
            let sets_t2v = build_positive_sets(relevancy, threshold, Direction::TextToVideo)?;
            let s_t2v = similarity.map(SimilarityMatrix::transpose);
            Ok(BatchTargets {
                triplets_v2t: enumerate_triplets(&sets_v2t, strategy, similarity)?,
                triplets_t2v: enumerate_triplets(&sets_t2v, strategy, s_t2v.as_ref())?,
                sets_v2t,
                sets_t2v,
            })
        }
    }
}

/// `R = c_ij − c_ik` for one triple, read in the triple's direction.
pub fn pair_correlation(
    relevancy: &RelevancyMatrix,
    triplet: Triplet,
    direction: Direction,
) -> Result<f64> {
    let (anchors, candidates) = direction.extents(relevancy.shape());
    if triplet.anchor >= anchors {
        return Err(Error::IndexOutOfRange {
            index: triplet.anchor,
            len: anchors,
        });
    }
    for idx in [triplet.positive, triplet.negative] {
        if idx >= candidates {
            return Err(Error::IndexOutOfRange {
                index: idx,
                len: candidates,
            });
        }
    }
    Ok(
        direction.relevancy(relevancy, triplet.anchor, triplet.positive)
            - direction.relevancy(relevancy, triplet.anchor, triplet.negative),
    )
}
