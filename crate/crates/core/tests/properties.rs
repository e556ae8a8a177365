use proptest::prelude::*;
use smsl_core::fixtures::random_bundle;
use smsl_core::infer::ensemble_similarity;
use smsl_core::losses::{evaluate_loss, margin_term, sms_term};
use smsl_core::mining::{mine_targets, pair_correlation};
use smsl_core::{
    cosine_similarity, gather_batch_relevancy, l2_normalize, relevancy_from_labels, DatasetBundle,
    Direction, FeatureMatrix, LossConfig, LossKind, Matrix, MiningStrategy, RelevancyMatrix,
    SimilarityMatrix, Triplet,
};

fn features(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0f64..5.0, rows * cols)
        .prop_filter("rows must be non-zero", move |d| {
            d.chunks(cols)
                .all(|r| r.iter().map(|x| x * x).sum::<f64>() > 1e-6)
        })
        .prop_map(move |d| Matrix::from_vec(rows, cols, d).unwrap())
}

fn normalized(b: &DatasetBundle) -> (FeatureMatrix, FeatureMatrix) {
    (
        l2_normalize(&b.video_features).unwrap(),
        l2_normalize(&b.text_features).unwrap(),
    )
}

fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    m.select_rows(perm).unwrap()
}

proptest! {
    #[test]
    fn normalization_is_idempotent(m in features(5, 4)) {
        let once = l2_normalize(&FeatureMatrix::new(m).unwrap()).unwrap();
        let twice = l2_normalize(&once).unwrap();
        prop_assert!(twice.matrix().max_abs_diff(once.matrix()) <= 1e-9);
    }

    #[test]
    fn cosine_transpose_is_exact(v in features(4, 3), t in features(6, 3)) {
        let v = l2_normalize(&FeatureMatrix::new(v).unwrap()).unwrap();
        let t = l2_normalize(&FeatureMatrix::new(t).unwrap()).unwrap();
        let vt = cosine_similarity(&v, &t).unwrap();
        let tv = cosine_similarity(&t, &v).unwrap();
        prop_assert_eq!(vt.transpose(), tv);
    }

    #[test]
    fn label_relevancy_is_symmetric(
        labels in prop::collection::vec((prop::collection::vec(0u32..4, 1..3), prop::collection::vec(0u32..5, 1..3)), 2..8)
    ) {
        let verbs: Vec<Vec<u32>> = labels.iter().map(|l| l.0.clone()).collect();
        let nouns: Vec<Vec<u32>> = labels.iter().map(|l| l.1.clone()).collect();
        let c = relevancy_from_labels(&verbs, &nouns, &verbs, &nouns).unwrap();
        prop_assert_eq!(c.transpose(), c.clone());
        for i in 0..labels.len() {
            prop_assert_eq!(c.get(i, i), 1.0);
        }
    }

    #[test]
    fn gather_with_identity_indices_is_identity(seed in 0u64..1000, n in 2usize..9) {
        let c = random_bundle(n, 3, seed).relevancy;
        let idx: Vec<usize> = (0..n).collect();
        prop_assert_eq!(gather_batch_relevancy(&c, &idx, &idx).unwrap(), c);
    }

    #[test]
    fn correlation_is_antisymmetric(seed in 0u64..1000, i in 0usize..6, j in 0usize..6, k in 0usize..6) {
        let c = random_bundle(6, 3, seed).relevancy;
        for dir in [Direction::VideoToText, Direction::TextToVideo] {
            let r = pair_correlation(&c, Triplet::new(i, j, k), dir).unwrap();
            let back = pair_correlation(&c, Triplet::new(i, k, j), dir).unwrap();
            prop_assert_eq!(r, -back);
        }
    }

    #[test]
    fn sms_is_monotone_for_positive_correlation(
        r in prop::sample::select(vec![0.25, 0.5, 0.75, 1.0]),
        sp in -1.0f64..1.0, sn in -1.0f64..1.0, d in 0.0f64..0.5,
    ) {
        let cfg = LossConfig::default();
        let at = |p: f64, n: f64| sms_term(r, cfg.margin, cfg.relaxation, p, n).value;
        prop_assert!(at(sp + d, sn) <= at(sp, sn));
        prop_assert!(at(sp, sn + d) >= at(sp, sn));
    }

    #[test]
    fn sms_margin_never_exceeds_adaptive_margin(
        cij in prop::sample::select(vec![0.1, 0.25, 0.5, 1.0]),
        cik in prop::sample::select(vec![0.0, 0.05, 0.25, 0.5]),
        sp in -1.0f64..1.0, sn in -1.0f64..1.0,
    ) {
        let r = cij - cik;
        prop_assume!(r > 0.0);
        let cfg = LossConfig::default();
        prop_assert!(r * cfg.margin <= cij * cfg.margin);
        let sms = sms_term(r, cfg.margin, cfg.relaxation, sp, sn).value;
        let adaptive = margin_term(cij * cfg.margin, sp, sn).value;
        prop_assert!(sms <= adaptive);
    }

    #[test]
    fn losses_are_permutation_equivariant(seed in 0u64..500, n in 3usize..8, shift in 1usize..7) {
        let b = random_bundle(n, 4, seed);
        // i ↦ shift − i (mod n), a reflection of the batch order.
        let perm: Vec<usize> = (0..n).map(|i| (i * (n - 1) + shift) % n).collect();
        let permuted = DatasetBundle::new(
            FeatureMatrix::new(permute_rows(b.video_features.matrix(), &perm)).unwrap(),
            FeatureMatrix::new(permute_rows(b.text_features.matrix(), &perm)).unwrap(),
            gather_batch_relevancy(&b.relevancy, &perm, &perm).unwrap(),
            b.video_ids.clone(),
            b.text_ids.clone(),
        )
        .unwrap();
        let value = |bundle: &DatasetBundle, kind: LossKind, mining: MiningStrategy| {
            let (v, t) = normalized(bundle);
            let s = cosine_similarity(&v, &t).unwrap();
            let cfg = LossConfig::for_kind(kind);
            let targets = mine_targets(&bundle.relevancy, Some(&s), mining, cfg.threshold).unwrap();
            evaluate_loss(kind, &s, &s.transpose(), &targets, &bundle.relevancy, &cfg).unwrap().value
        };
        for kind in LossKind::ALL {
            for mining in [MiningStrategy::PairedBatch, MiningStrategy::AllPairs, MiningStrategy::HardestNegative] {
                let a = value(&b, kind, mining);
                let p = value(&permuted, kind, mining);
                prop_assert!((a - p).abs() <= 1e-12 * a.abs().max(1.0), "{kind} {mining:?}: {a} vs {p}");
            }
        }
    }

    #[test]
    fn ensemble_order_does_not_matter(seed in 0u64..1000) {
        let mats: Vec<SimilarityMatrix> = (0..4)
            .map(|k| {
                let (v, t) = normalized(&random_bundle(5, 3, seed * 4 + k));
                cosine_similarity(&v, &t).unwrap()
            })
            .collect();
        let forward = ensemble_similarity(&mats).unwrap();
        let reversed: Vec<SimilarityMatrix> = mats.iter().rev().cloned().collect();
        let backward = ensemble_similarity(&reversed).unwrap();
        let left = ensemble_similarity(&[ensemble_similarity(&mats[..2]).unwrap(), ensemble_similarity(&mats[2..]).unwrap()]).unwrap();
        prop_assert!(forward.matrix().max_abs_diff(backward.matrix()) <= 1e-12);
        prop_assert!(forward.matrix().max_abs_diff(left.matrix()) <= 1e-12);
    }
}

#[test]
fn binary_relevancy_round_trip_is_bit_exact() {
    let c = random_bundle(7, 2, 11).relevancy;
    let back = RelevancyMatrix::new(
        smsl_core::codec::decode(&smsl_core::codec::encode(c.matrix())).unwrap(),
    )
    .unwrap();
    assert_eq!(back, c);
}
