use nalgebra::DMatrix;
use proptest::prelude::*;

use csda::eval::{average_precision_from_scores, split_classes};
use csda::experiment::data::{format_csv, parse_csv};
use csda::experiment::{
    format_results_csv, parse_results_csv, stratified_split, Dataset, ResultRow,
};
use csda::linalg::{gram, symmetrize};
use csda::scatter::{center_to_positive_mean, scatter_matrices};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1e3..1e3f64, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

/// Distinct scores with at least one positive.
fn ranking() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..30).prop_flat_map(|n| {
        (
            Just((0..n).map(|i| i as f64 * 0.5 - 3.0).collect::<Vec<_>>()).prop_shuffle(),
            prop::collection::vec(any::<bool>(), n),
            0..n,
        )
            .prop_map(|(s, mut p, forced)| {
                p[forced] = true;
                (s, p)
            })
    })
}

proptest! {
    #[test]
    fn ap_lies_in_unit_interval((scores, pos) in ranking()) {
        let ap = average_precision_from_scores(&scores, &pos).unwrap();
        prop_assert!((0.0..=1.0).contains(&ap));
    }

    #[test]
    fn ap_is_one_exactly_when_positives_lead((scores, pos) in ranking()) {
        let ap = average_precision_from_scores(&scores, &pos).unwrap();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let n_pos = pos.iter().filter(|p| **p).count();
        let leads = order[..n_pos].iter().all(|&i| pos[i]);
        prop_assert_eq!(ap == 1.0, leads);
    }

    #[test]
    fn ap_ignores_monotone_transforms((scores, pos) in ranking(), a in 0.1..10.0f64, b in -5.0..5.0f64) {
        let ap = average_precision_from_scores(&scores, &pos).unwrap();
        let moved: Vec<f64> = scores.iter().map(|s| (a * s + b).exp()).collect();
        prop_assert_eq!(ap, average_precision_from_scores(&moved, &pos).unwrap());
    }

    #[test]
    fn symmetrize_is_exact_and_idempotent(m in (1usize..8).prop_flat_map(|n| matrix(n, n))) {
        let s = symmetrize(&m).unwrap();
        prop_assert_eq!(&s, &s.transpose());
        prop_assert_eq!(&symmetrize(&s).unwrap(), &s);
    }

    #[test]
    fn gram_is_psd(m in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c)), v in prop::collection::vec(-1.0..1.0f64, 6)) {
        let g = gram(&m);
        let x = nalgebra::DVector::from_column_slice(&v[..g.nrows()]);
        prop_assert!(x.dot(&(&g * &x)) >= -1e-9 * g.norm());
    }

    #[test]
    fn total_scatter_splits((d, np, nn) in (1usize..10, 1usize..8, 1usize..8), seed in any::<u64>()) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let x = DMatrix::from_fn(d, np + nn, |_, _| rand::Rng::random_range(&mut rng, -5.0..5.0));
        let positive: Vec<bool> = (0..np + nn).map(|j| j < np).collect();
        let (xp, xn) = split_classes(&x, &positive, |_| true);
        let data = center_to_positive_mean(&xp, &xn).unwrap();
        let s = scatter_matrices(&data, Default::default()).unwrap();
        let err = (&s.st - &s.sp - &s.sn).norm();
        prop_assert!(err <= 1e-10 * s.st.norm().max(1e-300));
    }

    #[test]
    fn dataset_csv_round_trips(m in (1usize..5, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c)), seed in 0i64..100) {
        let labels: Vec<i64> = (0..m.ncols() as i64).map(|j| (j + seed) % 3 - 1).collect();
        let data = Dataset { features: m, labels };
        prop_assert_eq!(parse_csv(&format_csv(&data), false).unwrap(), data);
    }

    #[test]
    fn results_csv_round_trips(vals in prop::collection::vec((any::<f64>(), -1e9..1e9f64, 0usize..30), 1..10)) {
        let rows: Vec<ResultRow> = vals
            .iter()
            .enumerate()
            .map(|(i, &(ap, a, dim))| ResultRow {
                class: i as i64 - 3,
                rep: i,
                method: "ncsda:EC+s4".into(),
                dim,
                k: i % 4,
                split: if i % 2 == 0 { csda::eval::Split::Train } else { csda::eval::Split::Test },
                ap: if ap.is_nan() { 0.5 } else { ap },
                a_sum: a,
                a_frob: a.abs(),
                b: a * a,
            })
            .collect();
        prop_assert_eq!(parse_results_csv(&format_results_csv(&rows)).unwrap(), rows);
    }

    #[test]
    fn splits_are_stratified(labels in prop::collection::vec(0i64..4, 2..80), frac in 0.1..0.9f64, seed in any::<u64>()) {
        let (train, test) = stratified_split(&labels, frac, seed);
        prop_assert_eq!(train.len() + test.len(), labels.len());
        for c in 0..4 {
            let n = labels.iter().filter(|&&l| l == c).count() as f64;
            let nt = train.iter().filter(|&&i| labels[i] == c).count() as f64;
            prop_assert!((nt - frac * n).abs() <= 1.0);
        }
    }
}
