//! Central-difference verification of the analytic loss gradients.

use alloc::vec::Vec;

use crate::data::{cosine_similarity, DatasetBundle, FeatureMatrix, RelevancyMatrix};
use crate::error::{Error, Result};
use crate::losses::{backprop_to_embeddings, evaluate_with_kinks, LossConfig, LossKind};
use crate::matrix::Matrix;
use crate::mining::{mine_targets, BatchTargets, MiningStrategy};

/// Outcome of [`finite_difference_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic − numeric| / max(1, |analytic|, |numeric|)` over checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation would cross a hinge kink.
    pub skipped: usize,
}

struct Evaluation {
    value: f64,
    kinks: Vec<f64>,
}

fn evaluate(
    kind: LossKind,
    v: &Matrix,
    t: &Matrix,
    targets: &BatchTargets,
    relevancy: &RelevancyMatrix,
    cfg: &LossConfig,
    gradient: bool,
) -> Result<(Evaluation, Option<(Matrix, Matrix)>)> {
    let vf = FeatureMatrix::new(v.clone())?;
    let tf = FeatureMatrix::new(t.clone())?;
    let s = cosine_similarity(&vf.l2_normalize()?, &tf.l2_normalize()?)?;
    let mut kinks = Vec::new();
    let r = evaluate_with_kinks(
        kind,
        &s,
        &s.transpose(),
        targets,
        relevancy,
        cfg,
        Some(&mut kinks),
    )?;
    let grads = if gradient {
        Some(backprop_to_embeddings(&r.video_major_gradient(), &vf, &tf)?)
    } else {
        None
    };
    Ok((
        Evaluation {
            value: r.value,
            kinks,
        },
        grads,
    ))
}

/// Compares the analytic gradient of `kind` with respect to the raw bundle
/// features against central differences of step `step`.
///
/// Triples are mined once at the unperturbed point. A coordinate is skipped
/// when some non-differentiable argument that depends on it lies within
/// `10·step` of its kink.
pub fn finite_difference_check(
    kind: LossKind,
    bundle: &DatasetBundle,
    cfg: &LossConfig,
    mining: MiningStrategy,
    step: f64,
) -> Result<GradCheck> {
    if !(1e-8..=1e-4).contains(&step) {
        return Err(Error::InvalidConfig(
            "finite-difference step must lie in [1e-8, 1e-4]".into(),
        ));
    }
    let relevancy = &bundle.relevancy;
    let v0 = bundle.video_features.matrix().clone();
    let t0 = bundle.text_features.matrix().clone();
    let s0 = cosine_similarity(
        &bundle.video_features.l2_normalize()?,
        &bundle.text_features.l2_normalize()?,
    )?;
    let targets = mine_targets(relevancy, Some(&s0), mining, cfg.threshold)?;
    let (base, grads) = evaluate(kind, &v0, &t0, &targets, relevancy, cfg, true)?;
    let (grad_v, grad_t) = grads.expect("gradient requested");

    let guard = 10.0 * step;
    let mut report = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for video_side in [true, false] {
        let (point, analytic) = if video_side {
            (&v0, &grad_v)
        } else {
            (&t0, &grad_t)
        };
        for idx in 0..point.as_slice().len() {
            let shifted = |delta: f64| {
                let mut m = point.clone();
                m.as_mut_slice()[idx] += delta;
                if video_side {
                    evaluate(kind, &m, &t0, &targets, relevancy, cfg, false)
                } else {
                    evaluate(kind, &v0, &m, &targets, relevancy, cfg, false)
                }
                .map(|(e, _)| e)
            };
            let plus = shifted(step)?;
            let minus = shifted(-step)?;
            let near_kink = base.kinks.iter().enumerate().any(|(i, &k0)| {
                let depends = plus.kinks[i] != k0 || minus.kinks[i] != k0;
                depends && libm::fabs(k0) < guard
            });
            if near_kink {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus.value - minus.value) / (2.0 * step);
            let a = analytic.as_slice()[idx];
            let err = libm::fabs(a - numeric) / libm::fabs(a).max(libm::fabs(numeric)).max(1.0);
            report.max_rel_error = report.max_rel_error.max(err);
            report.checked += 1;
        }
    }
    Ok(report)
}
