use bossal::data::{decode_alfx, encode_alfx, make_splits, Dataset};
use bossal::harness::{aulc, relative_curve, Regime};
use bossal::model::{accuracy, evaluate, predict_proba, LinearHead, LossKind};
use proptest::prelude::*;

/// Arbitrary small dataset where every class occurs at least twice.
fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..5, 1usize..6, 2usize..8).prop_flat_map(|(k, d, per_class)| {
        let n = k * per_class;
        (
            prop::collection::vec(-100f32..100.0, n * d),
            Just(k),
            Just(d),
            Just(per_class),
            "[a-z]{0,12}",
        )
            .prop_map(|(features, k, d, per_class, name)| {
                let labels = (0..k * per_class).map(|i| (i % k) as u32).collect();
                Dataset::new(name, features, labels, k, d).unwrap()
            })
    })
}

fn head_for(k: usize, d: usize) -> impl Strategy<Value = LinearHead> {
    (
        prop::collection::vec(-3f32..3.0, k * d),
        prop::collection::vec(-3f32..3.0, k),
    )
        .prop_map(move |(w, b)| LinearHead::from_parts(k, d, w, b).unwrap())
}

proptest! {
    #[test]
    fn alfx_round_trip(ds in dataset()) {
        let bytes = encode_alfx(&ds).unwrap();
        let back = decode_alfx(&bytes).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(encode_alfx(&back).unwrap(), bytes);
    }

    #[test]
    fn truncated_alfx_never_decodes(ds in dataset(), cut in 1usize..64) {
        let bytes = encode_alfx(&ds).unwrap();
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(decode_alfx(&bytes[..keep]).is_err());
    }

    #[test]
    fn splits_partition_and_cover_every_class(ds in dataset(), frac in 0.2f64..0.6, seed in any::<u64>()) {
        let Ok(split) = make_splits(&ds, frac, seed) else {
            return Ok(());
        };
        let mut all: Vec<usize> = split.unlabeled().iter().chain(split.eval()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        prop_assert!(split.labeled().is_empty());
        prop_assert_eq!(split.eval().len(), (frac * ds.len() as f64).round() as usize);
        for c in 0..ds.num_classes() as u32 {
            prop_assert!(split.eval().iter().any(|&i| ds.labels()[i] == c));
            prop_assert!(split.unlabeled().iter().any(|&i| ds.labels()[i] == c));
        }
    }

    #[test]
    fn probabilities_ignore_a_shared_bias_shift(
        (ds, head) in dataset().prop_flat_map(|ds| {
            let (k, d) = (ds.num_classes(), ds.dim());
            (Just(ds), head_for(k, d))
        }),
        shift in -5f32..5.0,
    ) {
        let all: Vec<usize> = (0..ds.len()).collect();
        let base = predict_proba(&head, &ds, &all);
        let shifted_biases: Vec<f32> = head.biases().iter().map(|b| b + shift).collect();
        let shifted = LinearHead::from_parts(head.num_classes(), head.dim(), head.weights().to_vec(), shifted_biases).unwrap();
        let moved = predict_proba(&shifted, &ds, &all);
        for r in 0..base.rows() {
            let sum: f64 = base.row(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            for (a, b) in base.row(r).iter().zip(moved.row(r)) {
                prop_assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn zero_one_loss_complements_accuracy(
        (ds, head) in dataset().prop_flat_map(|ds| {
            let (k, d) = (ds.num_classes(), ds.dim());
            (Just(ds), head_for(k, d))
        }),
    ) {
        let all: Vec<usize> = (0..ds.len()).collect();
        let loss = evaluate(&head, &ds, &all, ds.labels(), LossKind::ZeroOne).unwrap();
        let acc = accuracy(&head, &ds, &all, ds.labels()).unwrap();
        prop_assert!((loss + acc - 1.0).abs() < 1e-12);
        let brier = evaluate(&head, &ds, &all, ds.labels(), LossKind::Brier).unwrap();
        prop_assert!((0.0..=2.0).contains(&brier));
        prop_assert!(evaluate(&head, &ds, &all, ds.labels(), LossKind::CrossEntropy).unwrap() >= 0.0);
    }

    #[test]
    fn constant_curves_have_constant_aulc(c in 0f64..1.0) {
        let curve = vec![c; 21];
        for regime in Regime::ALL {
            prop_assert!((aulc(&curve, regime).unwrap() - c).abs() < 1e-12);
        }
    }

    #[test]
    fn relative_curves_are_antisymmetric(
        pair in (1usize..30).prop_flat_map(|n| (prop::collection::vec(0f64..1.0, n), prop::collection::vec(0f64..1.0, n)))
    ) {
        let (a, b) = pair;
        let ab = relative_curve(&a, &b).unwrap();
        let ba = relative_curve(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert_eq!(*x, -*y);
        }
    }
}
