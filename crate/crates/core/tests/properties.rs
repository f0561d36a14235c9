use proptest::prelude::*;

use scoregen_core::augment::{adasyn_allocation, largest_remainder, smote};
use scoregen_core::classify::{decide_binary, generative_posterior, DecisionRule};
use scoregen_core::codec;
use scoregen_core::density::{line_integral, path_integral};
use scoregen_core::eval::{apply_flips, flip_labels, jsd, stratified_split, SplitSpec};
use scoregen_core::gaussian::pair_2d_models;
use scoregen_core::{LabeledDataset, Matrix, RngStream, ScoreNet};

fn dataset(labels: Vec<u8>) -> LabeledDataset {
    let n = labels.len();
    let feats = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
    LabeledDataset::new(feats, labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn posteriors_sum_to_one(d0 in 0.0f64..10.0, d1 in 1e-6f64..10.0, p in 0.01f64..0.99) {
        let post = generative_posterior([d0, d1], [1.0 - p, p]).unwrap();
        prop_assert!((post[0] + post[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn raising_margin_never_creates_positives(p1 in 0.0f64..1.0, p0 in 0.0f64..1.0, g in 0.0f64..1.0, dg in 0.0f64..1.0) {
        let lo = decide_binary(p1, p0, g, DecisionRule::AbsoluteGap);
        let hi = decide_binary(p1, p0, g + dg, DecisionRule::AbsoluteGap);
        prop_assert!(hi <= lo);
    }

    #[test]
    fn log_ratio_ignores_common_scale(p1 in 1e-6f64..1.0, p0 in 1e-6f64..1.0, c in 1e-3f64..1e3) {
        prop_assert_eq!(
            decide_binary(p1, p0, 0.0, DecisionRule::LogRatio),
            decide_binary(c * p1, c * p0, 0.0, DecisionRule::LogRatio)
        );
    }

    #[test]
    fn allocations_sum_exactly(w in prop::collection::vec(0.0f64..1.0, 1..40), n in 0usize..5000) {
        let (a, _) = adasyn_allocation(&w, n);
        prop_assert_eq!(a.iter().sum::<usize>(), n);
        let eq = largest_remainder(&vec![1.0; w.len()], n);
        prop_assert!(eq.iter().max().unwrap() - eq.iter().min().unwrap() <= 1);
    }

    #[test]
    fn smote_stays_in_bounding_box(seed in 0u64..1000, n in 2usize..30, d in 1usize..5) {
        let mut rng = RngStream::new(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
        let m = Matrix::from_vec(n, d, data).unwrap();
        let out = smote(&m, (n - 1).min(5), 50, &mut rng).unwrap();
        for j in 0..d {
            let col: Vec<f64> = m.iter_rows().map(|r| r[j]).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for r in out.iter_rows() {
                prop_assert!(r[j] >= lo - 1e-12 && r[j] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn jsd_symmetric_and_bounded(p in prop::collection::vec(0.0f64..1.0, 8), q in prop::collection::vec(0.0f64..1.0, 8)) {
        prop_assume!(p.iter().sum::<f64>() > 0.0 && q.iter().sum::<f64>() > 0.0);
        let a = jsd(&p, &q).unwrap();
        let b = jsd(&q, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-15);
        prop_assert!((0.0..=std::f64::consts::LN_2).contains(&a));
        prop_assert!(jsd(&p, &p).unwrap() < 1e-15);
    }

    #[test]
    fn model_codec_round_trips(seed in 0u64..500, d in 1usize..4, h in 1usize..8) {
        let net = ScoreNet::glorot(&[d, h, d], &mut RngStream::new(seed)).unwrap();
        let back = codec::decode(&codec::encode(&net)).unwrap();
        prop_assert_eq!(net.mlp().params(), back.mlp().params());
        prop_assert_eq!(net.mlp().sizes(), back.mlp().sizes());
    }

    #[test]
    fn split_partitions_rows(labels in prop::collection::vec(0u8..2, 4..80), ratio in 0.1f64..0.9, seed in 0u64..100) {
        let data = dataset(labels);
        prop_assume!(data.class_count(0) >= 2 && data.class_count(1) >= 2);
        let s = stratified_split(&data, SplitSpec::TrainRatio(ratio), seed).unwrap();
        let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..data.len()).collect::<Vec<_>>());
        for c in 0..2u8 {
            let want = (data.class_count(c) as f64 * ratio).round_ties_even() as usize;
            prop_assert_eq!(s.train.class_count(c), want);
        }
    }

    #[test]
    fn flipping_twice_is_identity(labels in prop::collection::vec(0u8..2, 1..60), seed in 0u64..100, a in 0usize..10, b in 0usize..10) {
        let data = dataset(labels);
        let counts = [a.min(data.class_count(0)), b.min(data.class_count(1))];
        let (f, rec) = flip_labels(&data, counts, seed).unwrap();
        let back = apply_flips(&f, &rec.indices).unwrap();
        prop_assert_eq!(back.labels(), data.labels());
    }

    #[test]
    fn gaussian_line_integrals_are_path_independent(ax in -3.0f64..3.0, ay in -3.0f64..3.0, bx in -3.0f64..7.0, by in -3.0f64..7.0) {
        let (m0, _) = pair_2d_models();
        let direct = line_integral(&m0, &[ax, ay], &[bx, by], 2000).unwrap();
        let bent = path_integral(&m0, &[vec![ax, ay], vec![bx, ay], vec![bx, by]], 2000).unwrap();
        let exact = m0.log_pdf(&[bx, by]) - m0.log_pdf(&[ax, ay]);
        prop_assert!((direct - exact).abs() < 1e-6);
        prop_assert!((direct - bent).abs() < 1e-6);
    }
}
