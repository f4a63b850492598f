//! CKA oracles built from HSIC, via explicit double sums and via naive
//! kernel-matrix algebra.

/// Gram matrix under the linear kernel for `n` example vectors.
pub fn linear_gram(examples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = examples.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = examples[i]
                .iter()
                .zip(&examples[j])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    k
}

/// Gram matrix under the RBF kernel `exp(−‖a−b‖² / (2σ²))`.
pub fn rbf_gram(examples: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
    let n = examples.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let sq: f64 = examples[i]
                .iter()
                .zip(&examples[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            k[i][j] = (-sq / (2.0 * sigma * sigma)).exp();
        }
    }
    k
}

/// Biased HSIC estimate written as three explicit sums:
/// [ΣᵢⱼKᵢⱼLᵢⱼ − (2/N)Σⱼ(ΣᵢKᵢⱼ)(ΣᵢLᵢⱼ) + (ΣK)(ΣL)/N²] / (N−1)².
pub fn hsic_double_sum(k: &[Vec<f64>], l: &[Vec<f64>]) -> f64 {
    let n = k.len();
    assert!(n >= 2, "HSIC needs at least two examples");
    assert_eq!(l.len(), n);
    let mut term1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            term1 += k[i][j] * l[i][j];
        }
    }
    let row_sum = |m: &[Vec<f64>], j: usize| -> f64 { (0..n).map(|i| m[i][j]).sum() };
    let mut term2 = 0.0;
    for j in 0..n {
        term2 += row_sum(k, j) * row_sum(l, j);
    }
    let sum_k: f64 = k.iter().flatten().sum();
    let sum_l: f64 = l.iter().flatten().sum();
    let nf = n as f64;
    (term1 - 2.0 / nf * term2 + sum_k * sum_l / (nf * nf)) / ((nf - 1.0) * (nf - 1.0))
}

/// The same biased HSIC via the centering-matrix route: tr(K·H·L·H)/(N−1)²
/// with H = I − 11ᵀ/N, using schoolbook matrix products.
pub fn hsic_kernel_matrix(k: &[Vec<f64>], l: &[Vec<f64>]) -> f64 {
    let n = k.len();
    assert!(n >= 2, "HSIC needs at least two examples");
    let mut h = vec![vec![-1.0 / n as f64; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let prod = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for (t, brow) in b.iter().enumerate() {
                    s += a[i][t] * brow[j];
                }
                out[i][j] = s;
            }
        }
        out
    };
    let khlh = prod(&prod(&prod(k, &h), l), &h);
    let trace: f64 = (0..n).map(|i| khlh[i][i]).sum();
    trace / ((n as f64 - 1.0) * (n as f64 - 1.0))
}

/// CKA from Gram matrices through a chosen HSIC route.
pub fn cka_from_grams(
    hsic: fn(&[Vec<f64>], &[Vec<f64>]) -> f64,
    k: &[Vec<f64>],
    l: &[Vec<f64>],
) -> f64 {
    hsic(k, l) / (hsic(k, k) * hsic(l, l)).sqrt()
}
