//! Multi-instance retrieval metrics: mean average precision over binarized
//! relevancy and nDCG with the soft relevancy values as gains, in both
//! retrieval directions.
//!
//! Rankings order candidates by descending similarity, ties by ascending
//! index. Anchors without any relevant candidate are excluded from the mean
//! and counted in the report.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{RelevancyMatrix, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::mining::Direction;

/// Any strictly positive relevancy counts as relevant for mAP.
pub const DEFAULT_RELEVANCE_THRESHOLD: f64 = f64::MIN_POSITIVE;

/// Percentages in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub map_v2t: f64,
    pub map_t2v: f64,
    pub map_avg: f64,
    pub ndcg_v2t: f64,
    pub ndcg_t2v: f64,
    pub ndcg_avg: f64,
    pub skipped_anchors_v2t: usize,
    pub skipped_anchors_t2v: usize,
}

/// Candidate indices by descending score, ties by ascending index.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Average precision of `ranking` against the `relevant` candidates.
/// `None` when `relevant` is empty.
pub fn average_precision(ranking: &[usize], relevant: &[usize]) -> Option<f64> {
    let n = ranking
        .iter()
        .chain(relevant)
        .copied()
        .max()
        .map_or(0, |m| m + 1);
    let mut is_rel = vec![false; n];
    relevant.iter().for_each(|&r| is_rel[r] = true);
    let total = is_rel.iter().filter(|&&r| r).count();
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &item) in ranking.iter().enumerate() {
        if is_rel[item] {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

fn dcg(gains_in_rank_order: impl Iterator<Item = f64>) -> f64 {
    gains_in_rank_order
        .enumerate()
        .map(|(pos, g)| g / libm::log2(pos as f64 + 2.0))
        .sum()
}

/// Normalized DCG of `ranking` where `gains[c]` is the gain of candidate `c`.
/// `None` when no gain is positive.
pub fn ndcg(ranking: &[usize], gains: &[f64]) -> Option<f64> {
    if !gains.iter().any(|&g| g > 0.0) {
        return None;
    }
    let mut ideal = gains.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal.into_iter());
    Some(dcg(ranking.iter().map(|&c| gains[c])) / idcg)
}

struct DirectionScores {
    map: f64,
    ndcg: f64,
    skipped: usize,
}

fn score_direction(
    s: &SimilarityMatrix,
    relevancy: &RelevancyMatrix,
    direction: Direction,
    threshold: f64,
) -> DirectionScores {
    let (anchors, candidates) = s.shape();
    let (mut ap_sum, mut ap_n, mut ndcg_sum, mut ndcg_n) = (0.0, 0usize, 0.0, 0usize);
    let mut skipped = 0;
    for i in 0..anchors {
        let ranking = rank(s.matrix().row(i));
        let gains: Vec<f64> = (0..candidates)
            .map(|j| direction.relevancy(relevancy, i, j))
            .collect();
        let relevant: Vec<usize> = (0..candidates).filter(|&j| gains[j] >= threshold).collect();
        match average_precision(&ranking, &relevant) {
            Some(ap) => {
                ap_sum += ap;
                ap_n += 1;
            }
            None => skipped += 1,
        }
        if let Some(n) = ndcg(&ranking, &gains) {
            ndcg_sum += n;
            ndcg_n += 1;
        }
    }
    let mean = |sum: f64, n: usize| if n == 0 { 0.0 } else { 100.0 * sum / n as f64 };
    DirectionScores {
        map: mean(ap_sum, ap_n),
        ndcg: mean(ndcg_sum, ndcg_n),
        skipped,
    }
}

/// mAP and nDCG of video-major scores `s` against `relevancy`, both directions.
///
/// `relevance_threshold` binarizes relevancy for mAP (`c_ij ≥ threshold`);
/// nDCG always uses the soft values.
pub fn evaluate(
    s: &SimilarityMatrix,
    relevancy: &RelevancyMatrix,
    relevance_threshold: f64,
) -> Result<RetrievalReport> {
    relevancy.matrix().ensure_shape(s.shape(), "relevancy")?;
    if !(relevance_threshold > 0.0 && relevance_threshold <= 1.0) {
        return Err(Error::InvalidThreshold(relevance_threshold));
    }
    let v2t = score_direction(s, relevancy, Direction::VideoToText, relevance_threshold);
    let t2v = score_direction(
        &s.transpose(),
        relevancy,
        Direction::TextToVideo,
        relevance_threshold,
    );
    Ok(RetrievalReport {
        map_v2t: v2t.map,
        map_t2v: t2v.map,
        map_avg: (v2t.map + t2v.map) / 2.0,
        ndcg_v2t: v2t.ndcg,
        ndcg_t2v: t2v.ndcg,
        ndcg_avg: (v2t.ndcg + t2v.ndcg) / 2.0,
        skipped_anchors_v2t: v2t.skipped,
        skipped_anchors_t2v: t2v.skipped,
    })
}
