use nail_core::data::split_indices;
use nail_core::losses::objective;
use nail_core::rng::seeded;
use nail_core::solver::{update_alpha, update_beta};
use nail_core::{average_precision, hamming_score, EvalMask, Kernel, LossConfig, MaskSpec, Mask, Mat, ModelState, MultiViewDataset, ObjectiveSpec};
use proptest::prelude::*;
use rand::Rng;

fn dataset(n: usize, dims: &[usize], l: usize, seed: u64) -> MultiViewDataset {
    let mut rng = seeded(seed, 300);
    let views = dims.iter().map(|&d| Mat::from_fn(n, d, |_, _| rng.gen_range(0.0..1.0))).collect();
    let masks = dims.iter().map(|&d| Mask::full(n, d)).collect();
    let labels = Mat::from_fn(n, l, |_, _| if rng.gen_bool(0.4) { 1.0 } else { 0.0 });
    MultiViewDataset::new(views, masks, labels, Mask::full(n, l)).unwrap()
}

fn removed_rows(ds: &MultiViewDataset, v: usize) -> usize {
    (0..ds.n_samples()).filter(|&i| !ds.feature_mask(v).row_any(i)).count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_mask_is_deterministic_and_covers(n in 4usize..40, m in 2usize..5, rate in 0.0f64..0.5, seed in any::<u64>()) {
        let ds = dataset(n, &vec![3; m], 2, seed);
        let spec = MaskSpec { feature_removal_rate: rate, label_removal_rate: 0.0, seed };
        let a = ds.apply_feature_mask(&spec).unwrap();
        let b = ds.apply_feature_mask(&spec).unwrap();
        prop_assert_eq!(&a, &b);
        let expected = (rate * n as f64 + 1e-9).floor() as usize;
        for v in 0..m {
            prop_assert_eq!(removed_rows(&a, v), expected);
        }
        for i in 0..n {
            prop_assert!((0..m).any(|v| a.feature_mask(v).row_all(i)));
        }
    }

    #[test]
    fn label_mask_hides_exact_counts(n in 2usize..40, l in 1usize..5, rate in 0.0f64..1.0, seed in any::<u64>()) {
        let ds = dataset(n, &[2], l, seed);
        let masked = ds.apply_label_mask(&MaskSpec { feature_removal_rate: 0.0, label_removal_rate: rate, seed }).unwrap();
        prop_assert!(masked.hidden_mask().is_disjoint(masked.label_mask()));
        prop_assert_eq!(masked.truth(), ds.labels());
        for j in 0..l {
            for class in [0.0, 1.0] {
                let members = (0..n).filter(|&i| ds.labels()[(i, j)] == class).count();
                let hidden = (0..n).filter(|&i| masked.hidden_mask().get(i, j) && ds.labels()[(i, j)] == class).count();
                prop_assert_eq!(hidden, (rate * members as f64 + 1e-9).floor() as usize);
            }
        }
    }

    #[test]
    fn split_is_a_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
        if let Ok((train, rest)) = split_indices(n, frac, seed) {
            prop_assert_eq!(train.len(), (frac * n as f64 + 1e-9).floor() as usize);
            let mut all: Vec<usize> = train.iter().chain(&rest).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn metrics_ignore_row_order(n in 2usize..12, l in 1usize..4, seed in any::<u64>()) {
        let mut rng = seeded(seed, 301);
        let scores = Mat::from_fn(n, l, |_, _| rng.gen_range(0..5) as f64 / 4.0);
        let truth = Mat::from_fn(n, l, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        let mask = Mask::from_fn(n, l, |_, _| rng.gen_bool(0.7));
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let eval = EvalMask { mask: mask.clone(), truth: truth.clone() };
        let permuted = EvalMask { mask: mask.select_rows(&order), truth: truth.select_rows(&order) };
        let s2 = scores.select_rows(&order);
        match (average_precision(&scores, &eval), average_precision(&s2, &permuted)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
        let pred = scores.map(|s| if s > 0.5 { 1.0 } else { 0.0 });
        prop_assert_eq!(hamming_score(&pred, &eval).ok(), hamming_score(&pred.select_rows(&order), &permuted).ok());
    }

    #[test]
    fn hamming_of_complement(n in 1usize..12, l in 1usize..4, seed in any::<u64>()) {
        let mut rng = seeded(seed, 302);
        let truth = Mat::from_fn(n, l, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        let pred = Mat::from_fn(n, l, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        let eval = EvalMask { mask: Mask::from_fn(n, l, |i, _| i == 0 || rng.gen_bool(0.6)), truth };
        let a = hamming_score(&pred, &eval).unwrap();
        let b = hamming_score(&pred.map(|x| 1.0 - x), &eval).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weight_updates_stay_normalized(errors in prop::collection::vec(1e-6f64..1e3, 1..6), seed in any::<u64>()) {
        let alpha = update_alpha(&errors, 0.5);
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(alpha.iter().all(|&a| a >= 0.0));
        let b = errors.len() + 1;
        let mut rng = seeded(seed, 303);
        let mut h = Mat::from_fn(b, b, |_, _| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..2.0) });
        for i in 0..b {
            h[(i, i)] = 0.0;
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
        }
        let beta = update_beta(&h);
        for i in 0..b {
            prop_assert_eq!(beta[(i, i)], 0.0);
            let norm: f64 = beta.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn objective_ignores_view_order(n in 3usize..10, m in 2usize..4, seed in any::<u64>(), shift in 1usize..3) {
        let mut rng = seeded(seed, 304);
        let dims: Vec<usize> = (0..m).map(|_| rng.gen_range(2..5)).collect();
        let ds = dataset(n, &dims, 2, seed);
        let masks: Vec<Mask> = dims.iter().map(|&d| Mask::from_fn(n, d, |_, _| rng.gen_bool(0.8))).collect();
        let ds = MultiViewDataset::new(ds.views().to_vec(), masks, ds.labels().clone(), ds.label_mask().clone()).unwrap();
        let k = 3;
        let mut weights: Vec<Mat> = dims.iter().map(|&d| Mat::from_fn(k, d, |_, _| rng.gen_range(0.0..1.0))).collect();
        weights.push(Mat::from_fn(k, 2, |_, _| rng.gen_range(-1.0..1.0)));
        let alpha = update_alpha(&(0..m).map(|_| rng.gen_range(0.5..2.0)).collect::<Vec<_>>(), 0.5);
        let beta = Mat::from_fn(m + 1, m + 1, |i, j| if i == j { 0.0 } else { rng.gen_range(0.0..1.0) });
        let state = ModelState { embedding: Mat::from_fn(n, k, |_, _| rng.gen_range(0.0..1.0)), weights, view_weights: alpha, hsic_weights: beta };
        let kernels: Vec<Kernel> = (0..=m).map(|v| if v % 2 == 0 { Kernel::Linear } else { Kernel::Gaussian { sigma: 0.9 } }).collect();
        let spec = ObjectiveSpec::standard(0.7, 0.3, &LossConfig::default());

        // Rotate the views; the label block stays last.
        let perm: Vec<usize> = (0..m).map(|v| (v + shift) % m).collect();
        let mut full = perm.clone();
        full.push(m);
        let ds2 = MultiViewDataset::new(
            perm.iter().map(|&v| ds.view(v).clone()).collect(),
            perm.iter().map(|&v| ds.feature_mask(v).clone()).collect(),
            ds.labels().clone(),
            ds.label_mask().clone(),
        ).unwrap();
        let state2 = ModelState {
            embedding: state.embedding.clone(),
            weights: full.iter().map(|&v| state.weights[v].clone()).collect(),
            view_weights: perm.iter().map(|&v| state.view_weights[v]).collect(),
            hsic_weights: Mat::from_fn(m + 1, m + 1, |i, j| state.hsic_weights[(full[i], full[j])]),
        };
        let kernels2: Vec<Kernel> = full.iter().map(|&v| kernels[v]).collect();
        let a = objective(&state, &ds, &spec, &kernels).unwrap();
        let b = objective(&state2, &ds2, &spec, &kernels2).unwrap();
        prop_assert!((a.total - b.total).abs() <= 1e-10 * a.total.abs().max(1.0), "{} vs {}", a.total, b.total);
    }
}
