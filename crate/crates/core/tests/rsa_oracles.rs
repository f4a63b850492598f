//! CKA against independent oracles: the production implementation works in
//! feature space (centered cross-covariance norms), while the oracles build
//! explicit Gram matrices and estimate HSIC two separate ways (double sums
//! and centering-matrix products). All routes must agree to 1e-10.

use awe_core::nncore::Rng;
use awe_core::rsa::{linear_cka, rbf_cka};
use awe_testkit::cka_ref::{
    cka_from_grams, hsic_double_sum, hsic_kernel_matrix, linear_gram, rbf_gram,
};

fn random_rows(rng: &mut Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect())
        .collect()
}

fn view(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(Vec::as_slice).collect()
}

fn median_distance(rows: &[Vec<f64>]) -> f64 {
    let mut distances = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let sq: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            distances.push(sq.sqrt());
        }
    }
    distances.sort_by(f64::total_cmp);
    let n = distances.len();
    if n % 2 == 1 {
        distances[n / 2]
    } else {
        0.5 * (distances[n / 2 - 1] + distances[n / 2])
    }
}

#[test]
fn linear_cka_matches_both_hsic_oracles_for_all_small_sizes() {
    let mut rng = Rng::new(41);
    for n in 2..=12 {
        for rep in 0..5 {
            let dx = 1 + rng.below(5);
            let dy = 1 + rng.below(5);
            let x = random_rows(&mut rng, n, dx);
            let y = random_rows(&mut rng, n, dy);
            let got = linear_cka(&view(&x), &view(&y)).unwrap();

            let (k, l) = (linear_gram(&x), linear_gram(&y));
            let via_sums = cka_from_grams(hsic_double_sum, &k, &l);
            let via_matrices = cka_from_grams(hsic_kernel_matrix, &k, &l);
            assert!(
                (got - via_sums).abs() <= 1e-10,
                "n={n} rep={rep}: {got} vs double-sum {via_sums}"
            );
            assert!(
                (got - via_matrices).abs() <= 1e-10,
                "n={n} rep={rep}: {got} vs matrix {via_matrices}"
            );
        }
    }
}

#[test]
fn rbf_cka_matches_both_hsic_oracles_for_all_small_sizes() {
    let mut rng = Rng::new(43);
    for n in 2..=12 {
        for rep in 0..5 {
            let dx = 1 + rng.below(4);
            let dy = 1 + rng.below(4);
            let fraction = rng.uniform(0.3, 1.5);
            let x = random_rows(&mut rng, n, dx);
            let y = random_rows(&mut rng, n, dy);
            let got = rbf_cka(&view(&x), &view(&y), fraction).unwrap();

            let k = rbf_gram(&x, fraction * median_distance(&x));
            let l = rbf_gram(&y, fraction * median_distance(&y));
            let via_sums = cka_from_grams(hsic_double_sum, &k, &l);
            let via_matrices = cka_from_grams(hsic_kernel_matrix, &k, &l);
            assert!(
                (got - via_sums).abs() <= 1e-10,
                "n={n} rep={rep}: {got} vs double-sum {via_sums}"
            );
            assert!(
                (got - via_matrices).abs() <= 1e-10,
                "n={n} rep={rep}: {got} vs matrix {via_matrices}"
            );
        }
    }
}

#[test]
fn six_example_three_feature_pair_matches_the_double_sum_oracle() {
    let x = vec![
        vec![0.3, -1.2, 0.8],
        vec![1.1, 0.4, -0.5],
        vec![-0.7, 0.9, 1.3],
        vec![0.2, -0.3, -1.1],
        vec![1.8, 0.1, 0.6],
        vec![-1.4, 1.0, -0.2],
    ];
    let y = vec![
        vec![0.9, 0.0, 0.4],
        vec![1.0, 0.7, -0.8],
        vec![-0.2, 1.1, 1.0],
        vec![0.5, -0.6, -0.9],
        vec![1.5, 0.3, 0.2],
        vec![-1.1, 0.8, 0.1],
    ];
    let got = linear_cka(&view(&x), &view(&y)).unwrap();
    let oracle = cka_from_grams(hsic_double_sum, &linear_gram(&x), &linear_gram(&y));
    assert!((got - oracle).abs() <= 1e-10, "{got} vs {oracle}");
    assert!(got > 0.5, "these views correlate strongly, got {got}");
}

#[test]
fn five_example_toy_pair_matches_direct_kernel_arithmetic() {
    let x = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
        vec![2.0, -1.0],
    ];
    let y = vec![
        vec![0.1],
        vec![0.9],
        vec![-0.3],
        vec![1.2],
        vec![2.1],
    ];
    let fraction = 0.5;
    let got = rbf_cka(&view(&x), &view(&y), fraction).unwrap();
    let k = rbf_gram(&x, fraction * median_distance(&x));
    let l = rbf_gram(&y, fraction * median_distance(&y));
    let oracle = cka_from_grams(hsic_kernel_matrix, &k, &l);
    assert!((got - oracle).abs() <= 1e-10, "{got} vs {oracle}");
}
