mod support;

use nalgebra::DMatrix;
use proptest::prelude::*;
use weave::metrics::{self, linear_cka, mean_cosine, retrieval_precision, svcca, Measure, SvccaOptions};
use weave::rng::SeededRng;
use weave::EmbeddingMatrix;

use support::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn cosine_hand_instance() {
    let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let s = 1.0 / 2f64.sqrt();
    let y = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, s, s]);
    let want = (1.0 + s) / 2.0;
    assert!(close(mean_cosine(&x, &y).unwrap(), want, 1e-12));
    assert!(close(want, 0.85355, 1e-5));
    assert!(close(mean_cosine(&x, &(-&x)).unwrap(), -1.0, 1e-12));
}

#[test]
fn cka_three_by_two_matches_gram_oracle() {
    let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.0]);
    let y = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 2.0, 2.0, -1.0, 0.5]);
    assert!(close(linear_cka(&x, &y).unwrap(), cka_oracle(&x, &y), 1e-12));
}

#[test]
fn retrieval_swapped_pair() {
    // y_2 is nearest to x_3 and vice versa, identity otherwise
    let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let y = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    assert!(close(retrieval_precision(&x, &y, 1).unwrap(), 1.0 / 3.0, 1e-12));
    assert!(close(retrieval_oracle(&x, &y, 1), 1.0 / 3.0, 1e-12));
}

#[test]
fn svcca_five_by_two_matches_eigen_oracle() {
    let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, -0.5, 1.1, 0.3, -0.7, 2.0, 0.4, -1.2, 0.9]);
    let y = DMatrix::from_row_slice(5, 2, &[0.1, 1.0, 0.8, -0.3, -1.5, 0.2, 0.6, 0.6, 0.0, -0.9]);
    let opts = SvccaOptions {
        variance_keep: 1.0,
        ..Default::default()
    };
    let got = svcca(&x, &y, &opts).unwrap();
    assert!(close(got, svcca_oracle(&x, &y, 1.0), 1e-6), "{got}");
    let got = svcca(&x, &y, &SvccaOptions::default()).unwrap();
    assert!(close(got, svcca_oracle(&x, &y, 0.99), 1e-6), "{got}");
}

#[test]
fn thirty_two_languages_give_496_pairs() {
    let mut rng = SeededRng::new(5);
    let mats: Vec<EmbeddingMatrix> = lang_codes(32)
        .into_iter()
        .map(|l| EmbeddingMatrix::new(l, random_matrix(&mut rng, 12, 3)).unwrap())
        .collect();
    let report = metrics::pairwise_report(&mats, &[Measure::Cka], &SvccaOptions::default()).unwrap();
    assert_eq!(report.pairs.len(), 496);
}

#[test]
fn identical_matrices_score_one() {
    let mut rng = SeededRng::new(9);
    let m = random_matrix(&mut rng, 12, 4);
    let mats: Vec<EmbeddingMatrix> = ["a", "b", "c"]
        .iter()
        .map(|l| EmbeddingMatrix::new(*l, m.clone()).unwrap())
        .collect();
    let report = metrics::pairwise_report(&mats, &Measure::ALL, &SvccaOptions::default()).unwrap();
    for pair in &report.pairs {
        for (measure, value) in pair.values.iter() {
            assert!(close(*value, 1.0, 1e-9), "{measure:?} = {value}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cosine_matches_oracle(seed: u64, n in 1usize..=10, d in 1usize..=4) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(&mut rng, n, d);
        let y = random_matrix(&mut rng, n, d);
        prop_assert!(close(mean_cosine(&x, &y).unwrap(), cosine_oracle(&x, &y), 1e-9));
    }

    #[test]
    fn cka_matches_oracle(seed: u64, n in 2usize..=10, dx in 1usize..=4, dy in 1usize..=4) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(&mut rng, n, dx);
        let y = random_matrix(&mut rng, n, dy);
        let got = linear_cka(&x, &y).unwrap();
        prop_assert!(close(got, cka_oracle(&x, &y), 1e-9));
        prop_assert!(close(got, linear_cka(&y, &x).unwrap(), 1e-12));
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn cka_orthogonal_and_scale_invariant(seed: u64, n in 2usize..=10, d in 1usize..=4, c in 0.01f64..100.0, neg: bool) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(&mut rng, n, d);
        let y = random_matrix(&mut rng, n, d);
        let q = random_orthogonal(&mut rng, d);
        let c = if neg { -c } else { c };
        let base = linear_cka(&x, &y).unwrap();
        prop_assert!(close(linear_cka(&x, &(&x * &q)).unwrap(), 1.0, 1e-6));
        prop_assert!(close(linear_cka(&(&x * &q), &y).unwrap(), base, 1e-6));
        prop_assert!(close(linear_cka(&(&x * c), &y).unwrap(), base, 1e-6));
    }

    #[test]
    fn retrieval_matches_oracle(seed: u64, n in 1usize..=10, d in 1usize..=4) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(&mut rng, n, d);
        let y = random_matrix(&mut rng, n, d);
        for k in 1..=n {
            let got = retrieval_precision(&x, &y, k).unwrap();
            prop_assert!(close(got, retrieval_oracle(&x, &y, k), 1e-9), "k={}", k);
            prop_assert!(close(got, retrieval_precision(&y, &x, k).unwrap(), 1e-12));
        }
    }

    #[test]
    fn svcca_matches_oracle(seed: u64, n in 2usize..=10, dx in 1usize..=4, dy in 1usize..=4, full: bool) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(&mut rng, n, dx);
        let y = random_matrix(&mut rng, n, dy);
        let keep = if full { 1.0 } else { 0.99 };
        let opts = SvccaOptions { variance_keep: keep, ..Default::default() };
        let got = svcca(&x, &y, &opts).unwrap();
        prop_assert!(close(got, svcca_oracle(&x, &y, keep), 1e-6), "{} vs {}", got, svcca_oracle(&x, &y, keep));
        prop_assert!(close(got, svcca(&y, &x, &opts).unwrap(), 1e-6));
    }

    #[test]
    fn svcca_affine_invariant(seed: u64, d in 1usize..=4, extra in 2usize..=6) {
        let mut rng = SeededRng::new(seed);
        let n = d + extra;
        let x = random_matrix(&mut rng, n, d);
        let a = random_invertible(&mut rng, d);
        let shift = random_matrix(&mut rng, 1, d);
        let mut y = &x * a;
        for mut row in y.row_iter_mut() {
            row += &shift;
        }
        let opts = SvccaOptions { variance_keep: 1.0, ..Default::default() };
        prop_assert!(close(svcca(&x, &y, &opts).unwrap(), 1.0, 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn precision_monotone_in_k(seed: u64, n in 1usize..=12, d in 1usize..=4) {
        let mut rng = SeededRng::new(seed);
        let x = random_matrix(&mut rng, n, d);
        let y = random_matrix(&mut rng, n, d);
        let ks: Vec<usize> = (1..=n).collect();
        let p = metrics::retrieval_precisions(&x, &y, &ks).unwrap();
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(close(p[n - 1], 1.0, 0.0));
    }
}
