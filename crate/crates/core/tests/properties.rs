use std::collections::BTreeSet;

use proptest::prelude::*;

use ste_skill::classify::{fit, ClassifierKind, Hyperparams, Predictor};
use ste_skill::dataset::{Dataset, LabeledSample, Provenance};
use ste_skill::evaluate::{average_td, crossval_evaluate, make_folds, FoldScheme};
use ste_skill::selection::{cncv_select, consensus_intersection, discretize, mrmr_rank, mutual_information, CnCvParams};
use ste_skill::sensor::Label;

fn labels_from(bits: &[bool]) -> Vec<Label> {
    bits.iter()
        .map(|&b| if b { Label::Professional } else { Label::Amateur })
        .collect()
}

fn two_class(bits: &mut [bool]) {
    bits[0] = true;
    bits[1] = false;
}

fn matrix(n: usize, p: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
    (
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, p), n),
        prop::collection::vec(any::<bool>(), n),
    )
        .prop_map(|(rows, mut bits)| {
            two_class(&mut bits);
            (rows, bits)
        })
}

fn dataset(rows: &[Vec<f64>], labels: &[Label], players: usize) -> Dataset {
    let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
    let samples = rows
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (r, &l))| LabeledSample {
            features: r.clone(),
            label: l,
            provenance: Provenance::new(format!("p{}", i % players), "m", i),
        })
        .collect();
    Dataset::new(names, samples).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mrmr_first_pick_is_most_relevant((rows, bits) in matrix(30, 6)) {
        let labels = labels_from(&bits);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let ranking = mrmr_rank(&refs, &labels, 1).unwrap();
        let codes: Vec<i32> = labels.iter().map(|l| l.code() as i32).collect();
        let rel: Vec<f64> = (0..6)
            .map(|j| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let d: Vec<i32> = discretize(&col).into_iter().map(i32::from).collect();
                mutual_information(&d, &codes).unwrap()
            })
            .collect();
        let best = rel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = ranking.indices()[0];
        prop_assert!(rel[first] >= best - 1e-12);
        prop_assert!(rel[..first].iter().all(|&r| r < best - 1e-12));
    }

    #[test]
    fn positive_column_scaling_keeps_ranking((rows, bits) in matrix(30, 5), scale in prop::collection::vec(0.01f64..100.0, 5)) {
        let labels = labels_from(&bits);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&scale).map(|(v, s)| v * s).collect()).collect();
        let srefs: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
        let a = mrmr_rank(&refs, &labels, 5).unwrap().indices();
        let b = mrmr_rank(&srefs, &labels, 5).unwrap().indices();
        // Scaling can move a value across mu +- sigma only by rounding.
        let da: Vec<Vec<i8>> = (0..5).map(|j| discretize(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
        let db: Vec<Vec<i8>> = (0..5).map(|j| discretize(&scaled.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
        if da == db {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn intersection_is_a_subset(sets in prop::collection::vec(prop::collection::btree_set(0usize..20, 0..12), 1..6)) {
        let inter = consensus_intersection(&sets);
        for s in &sets {
            prop_assert!(inter.is_subset(s));
        }
    }

    #[test]
    fn fold_partitions_cover_and_are_disjoint(n in 10usize..60, k in 2usize..6, players in 2usize..8, seed in any::<u64>(), bits in prop::collection::vec(any::<bool>(), 60)) {
        let mut bits = bits[..n].to_vec();
        two_class(&mut bits);
        let labels = labels_from(&bits);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let ds = dataset(&rows, &labels, players);
        for scheme in [FoldScheme::Stratified, FoldScheme::PlayerGrouped, FoldScheme::LeaveOneSubjectOut] {
            let k = if scheme == FoldScheme::PlayerGrouped { k.min(players) } else { k };
            let folds = make_folds(&ds, k, scheme, seed).unwrap();
            let mut seen = vec![0; n];
            for j in 0..folds.n_folds() {
                let test = folds.test_indices(j);
                let train: BTreeSet<usize> = folds.train_indices(j).into_iter().collect();
                prop_assert!(!test.is_empty());
                for &i in &test {
                    seen[i] += 1;
                    prop_assert!(!train.contains(&i));
                }
                prop_assert_eq!(train.len() + test.len(), n);
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            if scheme == FoldScheme::LeaveOneSubjectOut {
                prop_assert_eq!(folds.n_folds(), players);
            }
        }
    }

    #[test]
    fn averaged_td_is_rounded_mean(bests in prop::collection::vec(1u32..=10, 1..12)) {
        let got = average_td(&bests).unwrap();
        let mean = bests.iter().map(|&b| b as f64).sum::<f64>() / bests.len() as f64;
        prop_assert!((1..=10).contains(&got));
        prop_assert!((got as f64 - mean).abs() <= 0.5 + 1e-12);
        if (mean.fract() - 0.5).abs() > 1e-9 {
            prop_assert_eq!(got as f64, mean.round());
        } else {
            prop_assert_eq!(got as f64, mean.ceil());
        }
    }

    #[test]
    fn knn_ignores_positive_affine_maps((rows, bits) in matrix(24, 3), a in 0.1f64..10.0, b in -5.0f64..5.0, probe in prop::collection::vec(-10.0f64..10.0, 3)) {
        let labels = labels_from(&bits);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let mapped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| a * v + b).collect()).collect();
        let mrefs: Vec<&[f64]> = mapped.iter().map(Vec::as_slice).collect();
        let hyper = Hyperparams::default();
        let m1 = fit(ClassifierKind::Knn, &refs, &labels, &[0, 1, 2], &hyper, 0).unwrap();
        let m2 = fit(ClassifierKind::Knn, &mrefs, &labels, &[0, 1, 2], &hyper, 0).unwrap();
        let mp: Vec<f64> = probe.iter().map(|v| a * v + b).collect();
        let z1 = m1.scaler.transform(&m1.feature_indices.iter().map(|&i| probe[i]).collect::<Vec<_>>());
        let z2 = m2.scaler.transform(&m2.feature_indices.iter().map(|&i| mp[i]).collect::<Vec<_>>());
        // Only assert when standardisation agrees to rounding; exact ties in
        // distance can otherwise flip.
        if z1.iter().zip(&z2).all(|(x, y)| (x - y).abs() < 1e-9) {
            prop_assert_eq!(m1.predict(&probe).unwrap(), m2.predict(&mp).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn consensus_features_were_seen_and_runs_repeat((rows, bits) in matrix(60, 12), seed in any::<u64>()) {
        let mut bits = bits;
        for (i, b) in bits.iter_mut().enumerate() {
            *b = i % 2 == 0;
        }
        let labels = labels_from(&bits);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let params = CnCvParams { n_inner: 6, n_consensus: 4, seed, ..CnCvParams::default() };
        let a = cncv_select(&refs, &labels, &params).unwrap();
        let b = cncv_select(&refs, &labels, &params).unwrap();
        prop_assert_eq!(&a, &b);
        let seen: BTreeSet<usize> = a.outer.iter().flat_map(|o| o.inner_rankings.iter().flatten().copied()).collect();
        for f in &a.consensus {
            prop_assert!(seen.contains(f));
        }
    }

    #[test]
    fn pooled_accuracy_matches_confusions((rows, bits) in matrix(50, 10), seed in any::<u64>()) {
        let mut bits = bits;
        for (i, b) in bits.iter_mut().enumerate() {
            *b = i % 2 == 0;
        }
        let labels = labels_from(&bits);
        let ds = dataset(&rows, &labels, 5);
        let folds = make_folds(&ds, 5, FoldScheme::Stratified, seed).unwrap();
        let cncv = CnCvParams { n_inner: 5, n_consensus: 3, seed, ..CnCvParams::default() };
        let rep = crossval_evaluate(&ds, ClassifierKind::Knn, &Hyperparams::default(), &cncv, &folds, seed).unwrap();
        let correct: usize = rep.folds.iter().map(|f| f.confusion.tp + f.confusion.tn).sum();
        let pooled = correct as f64 / ds.len() as f64;
        prop_assert!((rep.metrics.pooled_accuracy() - pooled).abs() < 1e-12);
        // Equal fold sizes: the fold mean equals the pooled figure.
        prop_assert!((rep.metrics.accuracy.mean - pooled).abs() < 1e-12);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (ds, _) = ste_skill::synthetic::feature_dataset(&ste_skill::synthetic::FeatureSpec {
        n_samples: 100,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let folds = make_folds(&ds, 5, FoldScheme::Stratified, 1).unwrap();
    let cncv = CnCvParams { seed: 2, ..CnCvParams::default() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| crossval_evaluate(&ds, ClassifierKind::Rf, &Hyperparams::default(), &cncv, &folds, 9).unwrap())
    };
    assert_eq!(run(1), run(4));
}
