//! Margin-based and multi-similarity losses over soft relevancy labels.
//!
//! All losses consume similarity matrices and return the loss value together
//! with `∂L/∂S` for each retrieval direction; [`backprop_to_embeddings`]
//! carries that gradient through `S = V̂·T̂ᵀ` and the row normalization.
//!
//! The learning objective shared by the margin losses is
//! `S(v_i, t_j) − S(v_i, t_k) ≥ margin` for a positive `j` and a negative `k`.
//! They differ in how the margin is chosen:
//!
//! | loss | per-triple term |
//! |------|-----------------|
//! | MI-MM | `[γ − S_ij + S_ik]_+` |
//! | adaptive MI-MM | `[c_ij·γ − S_ij + S_ik]_+` |
//! | MS limit | `[γ − S_ij]_+ + [S_ik − γ]_+` |
//! | SMS | by the sign of `R = c_ij − c_ik`, see [`sms_term`] |
//!
//! Hinges use subgradient 0 at their kink. `R` is compared with zero
//! exactly: relevancy values come from files or label overlap, where equality
//! is meaningful, and a tolerance would silently move triples between branches.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, RelevancyMatrix, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::mining::{
    BatchTargets, Direction, PositiveSets, Triplet, TripletSet, DEFAULT_THRESHOLD,
};

/// Hyperparameters shared by every loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Margin γ.
    pub margin: f64,
    /// Relaxation τ of the equal-relevancy branch.
    pub relaxation: f64,
    /// Positive scale α of the multi-similarity loss.
    pub alpha: f64,
    /// Negative scale β of the multi-similarity loss.
    pub beta: f64,
    /// Relevancy threshold for positive-set mining.
    pub threshold: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            margin: 0.6,
            relaxation: 0.1,
            alpha: 2.0,
            beta: 50.0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Raised (as a warning, not an error) when τ reaches the smallest positive relevancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationWarning {
    pub relaxation: f64,
    pub min_positive: f64,
}

impl fmt::Display for RelaxationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "relaxation {} is not below the smallest positive relevancy {}",
            self.relaxation, self.min_positive
        )
    }
}

impl LossConfig {
    /// Default margin of each loss as tuned in the reference experiments.
    pub fn for_kind(kind: LossKind) -> Self {
        let margin = match kind {
            LossKind::MiMm => 0.2,
            LossKind::AdaptiveMiMm => 0.4,
            LossKind::Ms | LossKind::MsLimit => 0.5,
            LossKind::Sms => 0.6,
        };
        Self {
            margin,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.into()));
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(self.relaxation >= 0.0 && self.relaxation.is_finite()) {
            return bad("relaxation must be non-negative");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite())
        {
            return bad("scales alpha and beta must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidThreshold(self.threshold));
        }
        Ok(())
    }

    /// τ should stay below the smallest positive relevancy, but larger values are
    /// sometimes useful in practice, so this only warns.
    pub fn relaxation_warning(&self, relevancy: &RelevancyMatrix) -> Option<RelaxationWarning> {
        relevancy
            .min_positive()
            .filter(|&m| self.relaxation >= m)
            .map(|min_positive| RelaxationWarning {
                relaxation: self.relaxation,
                min_positive,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    MiMm,
    AdaptiveMiMm,
    Ms,
    MsLimit,
    Sms,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::MiMm,
        LossKind::AdaptiveMiMm,
        LossKind::Ms,
        LossKind::MsLimit,
        LossKind::Sms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::MiMm => "mi_mm",
            LossKind::AdaptiveMiMm => "adaptive_mi_mm",
            LossKind::Ms => "ms",
            LossKind::MsLimit => "ms_limit",
            LossKind::Sms => "sms",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown loss {s:?}")))
    }
}

/// Loss value and `∂L/∂S` for both directions.
///
/// `grad_s_v2t` has the video-major shape `N_v×N_t`, `grad_s_t2v` the
/// text-major shape `N_t×N_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad_s_v2t: Matrix,
    pub grad_s_t2v: Matrix,
    pub triple_count: usize,
}

impl LossResult {
    fn zero(video_major: (usize, usize)) -> Self {
        Self {
            value: 0.0,
            grad_s_v2t: Matrix::zeros(video_major.0, video_major.1),
            grad_s_t2v: Matrix::zeros(video_major.1, video_major.0),
            triple_count: 0,
        }
    }

    /// `value / triple_count`, or 0 with no triples.
    pub fn mean_value(&self) -> f64 {
        if self.triple_count == 0 {
            0.0
        } else {
            self.value / self.triple_count as f64
        }
    }

    /// Sums two results computed on the same batch.
    pub fn merge(mut self, other: &LossResult) -> Result<Self> {
        self.value += other.value;
        self.grad_s_v2t.add_assign(&other.grad_s_v2t)?;
        self.grad_s_t2v.add_assign(&other.grad_s_t2v)?;
        self.triple_count += other.triple_count;
        Ok(self)
    }

    /// Total gradient with respect to the video-major `S = V̂·T̂ᵀ`.
    pub fn video_major_gradient(&self) -> Matrix {
        let mut g = self.grad_s_v2t.clone();
        g.add_assign(&self.grad_s_t2v.transpose())
            .expect("gradient shapes are transposes of each other");
        g
    }

    fn grad_mut(&mut self, direction: Direction) -> &mut Matrix {
        match direction {
            Direction::VideoToText => &mut self.grad_s_v2t,
            Direction::TextToVideo => &mut self.grad_s_t2v,
        }
    }
}

/// One hinge term and its partial derivatives with respect to `S_ij` and `S_ik`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeTerm {
    pub value: f64,
    pub grad_pos: f64,
    pub grad_neg: f64,
}

impl HingeTerm {
    const ZERO: Self = Self {
        value: 0.0,
        grad_pos: 0.0,
        grad_neg: 0.0,
    };

    #[inline]
    fn ranked(required_gap: f64, s_hi: f64, s_lo: f64, hi_is_pos: bool) -> Self {
        let arg = required_gap - s_hi + s_lo;
        if arg > 0.0 {
            let (grad_pos, grad_neg) = if hi_is_pos { (-1.0, 1.0) } else { (1.0, -1.0) };
            Self {
                value: arg,
                grad_pos,
                grad_neg,
            }
        } else {
            Self::ZERO
        }
    }
}

/// `[margin − S_ij + S_ik]_+`.
#[inline]
pub fn margin_term(margin: f64, s_pos: f64, s_neg: f64) -> HingeTerm {
    HingeTerm::ranked(margin, s_pos, s_neg, true)
}

/// Symmetric multi-similarity term for one triple with correlation `r = c_ij − c_ik`.
///
/// * `r > 0`: `[r·γ − S_ij + S_ik]_+`, the positive must win by `r·γ`.
/// * `r < 0`: `[−r·γ + S_ij − S_ik]_+`, the negative must win by `−r·γ`.
/// * `r = 0`: `[|S_ij − S_ik| − τ]_+`, equally relevant pairs are pulled
///   together until they are within τ.
///
/// The two signed branches are evaluated as the same expression with the
/// roles of `j` and `k` exchanged, so swapping them gives a bit-identical value.
#[inline]
pub fn sms_term(r: f64, margin: f64, relaxation: f64, s_pos: f64, s_neg: f64) -> HingeTerm {
    if r > 0.0 {
        HingeTerm::ranked(r * margin, s_pos, s_neg, true)
    } else if r < 0.0 {
        HingeTerm::ranked(-r * margin, s_neg, s_pos, false)
    } else {
        let diff = s_pos - s_neg;
        let arg = libm::fabs(diff) - relaxation;
        if arg > 0.0 && diff != 0.0 {
            let sign = if diff > 0.0 { 1.0 } else { -1.0 };
            HingeTerm {
                value: arg,
                grad_pos: sign,
                grad_neg: -sign,
            }
        } else {
            HingeTerm::ZERO
        }
    }
}

fn check_pair_shapes(s_v2t: &SimilarityMatrix, s_t2v: &SimilarityMatrix) -> Result<(usize, usize)> {
    let shape = s_v2t.shape();
    s_t2v
        .matrix()
        .ensure_shape((shape.1, shape.0), "text-to-video similarity")?;
    Ok(shape)
}

fn check_triples(triples: &TripletSet, s: &SimilarityMatrix) -> Result<()> {
    let (rows, cols) = s.shape();
    for t in &triples.triples {
        if t.anchor >= rows {
            return Err(Error::IndexOutOfRange {
                index: t.anchor,
                len: rows,
            });
        }
        for idx in [t.positive, t.negative] {
            if idx >= cols {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    len: cols,
                });
            }
        }
    }
    Ok(())
}

/// Sums `term` over both triple sets, v2t first, in triple order.
///
/// `kinks`, when given, receives every argument at which the summed loss is
/// not differentiable (hinge arguments and, for equal relevancy, `S_ij − S_ik`).
fn bidirectional<F>(
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    triplets_v2t: &TripletSet,
    triplets_t2v: &TripletSet,
    mut kinks: Option<&mut Vec<f64>>,
    term: F,
) -> Result<LossResult>
where
    F: Fn(Direction, Triplet, f64, f64, Option<&mut Vec<f64>>) -> HingeTerm,
{
    let shape = check_pair_shapes(s_v2t, s_t2v)?;
    let mut out = LossResult::zero(shape);
    for (triples, s, dir) in [
        (triplets_v2t, s_v2t, Direction::VideoToText),
        (triplets_t2v, s_t2v, Direction::TextToVideo),
    ] {
        check_triples(triples, s)?;
        for &t in &triples.triples {
            let h = term(
                dir,
                t,
                s.get(t.anchor, t.positive),
                s.get(t.anchor, t.negative),
                kinks.as_deref_mut(),
            );
            out.value += h.value;
            let g = out.grad_mut(dir);
            g[(t.anchor, t.positive)] += h.grad_pos;
            g[(t.anchor, t.negative)] += h.grad_neg;
        }
        out.triple_count += triples.len();
    }
    Ok(out)
}

fn record(kinks: Option<&mut Vec<f64>>, values: &[f64]) {
    if let Some(k) = kinks {
        k.extend_from_slice(values);
    }
}

/// Bidirectional max-margin multi-instance loss:
/// `Σ_v2t [γ − S_ij + S_ik]_+ + Σ_t2v [γ − S_ij + S_ik]_+`.
pub fn mi_mm_loss(
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    triplets_v2t: &TripletSet,
    triplets_t2v: &TripletSet,
    cfg: &LossConfig,
) -> Result<LossResult> {
    mi_mm_impl(s_v2t, s_t2v, triplets_v2t, triplets_t2v, cfg, None)
}

fn mi_mm_impl(
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    triplets_v2t: &TripletSet,
    triplets_t2v: &TripletSet,
    cfg: &LossConfig,
    kinks: Option<&mut Vec<f64>>,
) -> Result<LossResult> {
    let margin = cfg.margin;
    bidirectional(
        s_v2t,
        s_t2v,
        triplets_v2t,
        triplets_t2v,
        kinks,
        |_, _, sp, sn, k| {
            record(k, &[margin - sp + sn]);
            margin_term(margin, sp, sn)
        },
    )
}

fn check_relevancy(relevancy: &RelevancyMatrix, s_v2t: &SimilarityMatrix) -> Result<()> {
    relevancy.matrix().ensure_shape(s_v2t.shape(), "relevancy")
}

/// MI-MM with the margin of each triple scaled by the positive pair's relevancy `c_ij`.
pub fn adaptive_mi_mm_loss(
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    triplets_v2t: &TripletSet,
    triplets_t2v: &TripletSet,
    relevancy: &RelevancyMatrix,
    cfg: &LossConfig,
) -> Result<LossResult> {
    adaptive_impl(
        s_v2t,
        s_t2v,
        triplets_v2t,
        triplets_t2v,
        relevancy,
        cfg,
        None,
    )
}

fn adaptive_impl(
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    triplets_v2t: &TripletSet,
    triplets_t2v: &TripletSet,
    relevancy: &RelevancyMatrix,
    cfg: &LossConfig,
    kinks: Option<&mut Vec<f64>>,
) -> Result<LossResult> {
    check_relevancy(relevancy, s_v2t)?;
    let margin = cfg.margin;
    bidirectional(
        s_v2t,
        s_t2v,
        triplets_v2t,
        triplets_t2v,
        kinks,
        |dir, t, sp, sn, k| {
            let m = dir.relevancy(relevancy, t.anchor, t.positive) * margin;
            record(k, &[m - sp + sn]);
            margin_term(m, sp, sn)
        },
    )
}

/// Symmetric multi-similarity loss, summed over both directions.
pub fn sms_loss(
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    triplets_v2t: &TripletSet,
    triplets_t2v: &TripletSet,
    relevancy: &RelevancyMatrix,
    cfg: &LossConfig,
) -> Result<LossResult> {
    sms_impl(
        s_v2t,
        s_t2v,
        triplets_v2t,
        triplets_t2v,
        relevancy,
        cfg,
        None,
    )
}

fn sms_impl(
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    triplets_v2t: &TripletSet,
    triplets_t2v: &TripletSet,
    relevancy: &RelevancyMatrix,
    cfg: &LossConfig,
    kinks: Option<&mut Vec<f64>>,
) -> Result<LossResult> {
    check_relevancy(relevancy, s_v2t)?;
    let (margin, tau) = (cfg.margin, cfg.relaxation);
    bidirectional(
        s_v2t,
        s_t2v,
        triplets_v2t,
        triplets_t2v,
        kinks,
        |dir, t, sp, sn, k| {
            let r = dir.relevancy(relevancy, t.anchor, t.positive)
                - dir.relevancy(relevancy, t.anchor, t.negative);
            if r > 0.0 {
                record(k, &[r * margin - sp + sn]);
            } else if r < 0.0 {
                record(k, &[-r * margin - sn + sp]);
            } else {
                record(k, &[libm::fabs(sp - sn) - tau, sp - sn]);
            }
            sms_term(r, margin, tau, sp, sn)
        },
    )
}

fn single_direction_result(direction: Direction, s: &SimilarityMatrix) -> LossResult {
    let video_major = match direction {
        Direction::VideoToText => s.shape(),
        Direction::TextToVideo => (s.shape().1, s.shape().0),
    };
    LossResult::zero(video_major)
}

/// `log(1 + Σ exp(x))` and the softmax weights `exp(x_j) / (1 + Σ exp(x))`,
/// shifted by `max(0, max x)` so that nothing overflows.
fn log1p_sum_exp(xs: &[f64]) -> (f64, Vec<f64>) {
    let shift = xs.iter().copied().fold(0.0f64, f64::max);
    let base = libm::exp(-shift);
    let exps: Vec<f64> = xs.iter().map(|&x| libm::exp(x - shift)).collect();
    let denom = base + exps.iter().sum::<f64>();
    let weights = exps.iter().map(|e| e / denom).collect();
    (shift + libm::log(denom), weights)
}

/// Multi-similarity loss for the direction of `sets`; `s` is anchors × candidates.
///
/// `(1/N)·Σ_i { (1/α)·log(1 + Σ_{j∈P_i} e^{−α(S_ij−γ)}) + (1/β)·log(1 + Σ_{k∈N_i} e^{β(S_ik−γ)}) }`
pub fn ms_loss(s: &SimilarityMatrix, sets: &PositiveSets, cfg: &LossConfig) -> Result<LossResult> {
    let (anchors, cols) = s.shape();
    if sets.anchors() != anchors || sets.negatives.len() != anchors {
        return Err(Error::DimensionMismatch {
            expected: anchors,
            found: sets.anchors(),
        });
    }
    let mut out = single_direction_result(sets.direction, s);
    if anchors == 0 {
        return Ok(out);
    }
    let scale = 1.0 / anchors as f64;
    let (alpha, beta, gamma) = (cfg.alpha, cfg.beta, cfg.margin);
    let mut value = 0.0;
    for i in 0..anchors {
        let (pos, neg) = (&sets.positives[i], &sets.negatives[i]);
        if let Some(&index) = pos.iter().chain(neg).find(|&&j| j >= cols) {
            return Err(Error::IndexOutOfRange { index, len: cols });
        }
        let xs: Vec<f64> = pos
            .iter()
            .map(|&j| -alpha * (s.get(i, j) - gamma))
            .collect();
        let ys: Vec<f64> = neg.iter().map(|&k| beta * (s.get(i, k) - gamma)).collect();
        let (lp, wp) = log1p_sum_exp(&xs);
        let (ln, wn) = log1p_sum_exp(&ys);
        value += lp / alpha + ln / beta;
        let g = out.grad_mut(sets.direction);
        for (&j, w) in pos.iter().zip(wp) {
            g[(i, j)] -= scale * w;
        }
        for (&k, w) in neg.iter().zip(wn) {
            g[(i, k)] += scale * w;
        }
        out.triple_count += pos.len() + neg.len();
    }
    out.value = scale * value;
    Ok(out)
}

/// Large-scale limit of the multi-similarity loss for the direction of `triplets`:
/// `Σ [γ − S_ij]_+ + [S_ik − γ]_+`.
pub fn ms_loss_limit(
    s: &SimilarityMatrix,
    triplets: &TripletSet,
    cfg: &LossConfig,
) -> Result<LossResult> {
    ms_limit_impl(s, triplets, cfg, None)
}

fn ms_limit_impl(
    s: &SimilarityMatrix,
    triplets: &TripletSet,
    cfg: &LossConfig,
    mut kinks: Option<&mut Vec<f64>>,
) -> Result<LossResult> {
    check_triples(triplets, s)?;
    let gamma = cfg.margin;
    let mut out = single_direction_result(triplets.direction, s);
    for t in &triplets.triples {
        let pos = gamma - s.get(t.anchor, t.positive);
        let neg = s.get(t.anchor, t.negative) - gamma;
        record(kinks.as_deref_mut(), &[pos, neg]);
        if pos > 0.0 {
            out.value += pos;
            out.grad_mut(triplets.direction)[(t.anchor, t.positive)] -= 1.0;
        }
        if neg > 0.0 {
            out.value += neg;
            out.grad_mut(triplets.direction)[(t.anchor, t.negative)] += 1.0;
        }
    }
    out.triple_count = triplets.len();
    Ok(out)
}

/// Evaluates any loss on both directions. Single-direction losses (MS and its
/// limit) are summed over the two directions.
pub fn evaluate_loss(
    kind: LossKind,
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    targets: &BatchTargets,
    relevancy: &RelevancyMatrix,
    cfg: &LossConfig,
) -> Result<LossResult> {
    evaluate_with_kinks(kind, s_v2t, s_t2v, targets, relevancy, cfg, None)
}

pub(crate) fn evaluate_with_kinks(
    kind: LossKind,
    s_v2t: &SimilarityMatrix,
    s_t2v: &SimilarityMatrix,
    targets: &BatchTargets,
    relevancy: &RelevancyMatrix,
    cfg: &LossConfig,
    mut kinks: Option<&mut Vec<f64>>,
) -> Result<LossResult> {
    let (tv, tt) = (&targets.triplets_v2t, &targets.triplets_t2v);
    match kind {
        LossKind::MiMm => mi_mm_impl(s_v2t, s_t2v, tv, tt, cfg, kinks),
        LossKind::AdaptiveMiMm => adaptive_impl(s_v2t, s_t2v, tv, tt, relevancy, cfg, kinks),
        LossKind::Sms => sms_impl(s_v2t, s_t2v, tv, tt, relevancy, cfg, kinks),
        LossKind::Ms => {
            check_pair_shapes(s_v2t, s_t2v)?;
            ms_loss(s_v2t, &targets.sets_v2t, cfg)?.merge(&ms_loss(s_t2v, &targets.sets_t2v, cfg)?)
        }
        LossKind::MsLimit => {
            check_pair_shapes(s_v2t, s_t2v)?;
            let a = ms_limit_impl(s_v2t, tv, cfg, kinks.as_deref_mut())?;
            a.merge(&ms_limit_impl(s_t2v, tt, cfg, kinks)?)
        }
    }
}

/// Chain rule from `∂L/∂S` (video-major) to the raw, pre-normalization features.
///
/// With `v̂ = v/‖v‖` and `S = V̂·T̂ᵀ`: `∂L/∂V̂ = G·T̂`, `∂L/∂T̂ = Gᵀ·V̂`, and each
/// row gradient `g` becomes `(g − (g·v̂)v̂)/‖v‖`.
pub fn backprop_to_embeddings(
    grad_s: &Matrix,
    v: &FeatureMatrix,
    t: &FeatureMatrix,
) -> Result<(Matrix, Matrix)> {
    grad_s.ensure_shape((v.rows(), t.rows()), "similarity gradient")?;
    if v.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            found: t.dim(),
        });
    }
    let vn = v.l2_normalize()?;
    let tn = t.l2_normalize()?;
    let mut grad_v = grad_s.matmul(tn.matrix())?;
    let mut grad_t = grad_s.transposed_matmul(vn.matrix())?;
    project_rows(&mut grad_v, v.matrix(), vn.matrix());
    project_rows(&mut grad_t, t.matrix(), tn.matrix());
    Ok((grad_v, grad_t))
}

fn project_rows(grad: &mut Matrix, raw: &Matrix, unit: &Matrix) {
    for r in 0..grad.rows() {
        let u = unit.row(r);
        let inv_norm = 1.0 / norm(raw.row(r));
        let g = grad.row_mut(r);
        let radial = dot(g, u);
        for (gi, ui) in g.iter_mut().zip(u) {
            *gi = (*gi - radial * ui) * inv_norm;
        }
    }
}
