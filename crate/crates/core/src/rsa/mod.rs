//! Representational similarity analysis: Centered Kernel Alignment between
//! two views of the same stimuli, the asymmetric native-vs-foreign language
//! similarity built on it, cross-lingual similarity matrices, and cross-model
//! comparison tables.
//!
//! CKA here operates on example-major views: an input is a slice of N
//! example vectors. An embedding matrix stored feature-major (D rows, one
//! column per stimulus) is therefore transposed by iterating its columns.
//! Centering is always per feature across examples.

mod xrsm;

pub use xrsm::{
    build_xrsm, cross_model_table, read_cross_model_json, read_xrsm_json, write_cross_model_json,
    write_xrsm_json, xrsm_heatmap_svg, CrossModelRow, CrossModelTable, Xrsm,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoders::{EmbeddingMatrix, Objective};

/// Kernel choice for CKA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { bandwidth_fraction: f64 },
}

impl Kernel {
    pub const DEFAULT_RBF_FRACTION: f64 = 0.5;

    pub fn rbf_default() -> Self {
        Kernel::Rbf {
            bandwidth_fraction: Self::DEFAULT_RBF_FRACTION,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf { .. } => "rbf",
        }
    }

    pub fn cka(self, x: &[&[f64]], y: &[&[f64]]) -> Result<f64, RsaError> {
        match self {
            Kernel::Linear => linear_cka(x, y),
            Kernel::Rbf { bandwidth_fraction } => rbf_cka(x, y, bandwidth_fraction),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum RsaError {
    #[error("representations disagree on example count: {x} vs {y}")]
    ExampleCountMismatch { x: usize, y: usize },
    #[error("CKA needs at least two examples, got {0}")]
    TooFewExamples(usize),
    #[error("ragged representation: example {index} has {got} features, expected {expected}")]
    Ragged {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("bandwidth fraction must be positive and finite, got {0}")]
    BadBandwidth(f64),
    #[error("language tag mismatch for the {what}: expected {expected}, got {got}")]
    TagMismatch {
        what: &'static str,
        expected: String,
        got: String,
    },
    #[error("views pair different objectives: {0} vs {1}")]
    ObjectiveMismatch(Objective, Objective),
    #[error("views disagree on stimulus ids or their order")]
    StimuliMismatch,
    #[error("a similarity matrix needs at least two languages, got {0}")]
    TooFewLanguages(usize),
    #[error("duplicate language id {0}")]
    DuplicateLanguage(String),
    #[error("no view of {stimuli} stimuli under the {encoder} encoder")]
    MissingView { stimuli: String, encoder: String },
    #[error("more than one view of {stimuli} stimuli under the {encoder} encoder")]
    DuplicateView { stimuli: String, encoder: String },
    #[error("language {language} lacks a {objective} view")]
    MissingObjective {
        language: String,
        objective: Objective,
    },
    #[error("language {language} has more than one {objective} view")]
    DuplicateObjective {
        language: String,
        objective: Objective,
    },
    #[error("no embedding views provided")]
    NoViews,
    #[error("bad similarity file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad similarity JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn check_paired(x: &[&[f64]], y: &[&[f64]]) -> Result<(), RsaError> {
    if x.len() != y.len() {
        return Err(RsaError::ExampleCountMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(RsaError::TooFewExamples(x.len()));
    }
    Ok(())
}

fn check_rectangular(examples: &[&[f64]]) -> Result<usize, RsaError> {
    let d = examples[0].len();
    for (index, row) in examples.iter().enumerate() {
        if row.len() != d {
            return Err(RsaError::Ragged {
                index,
                expected: d,
                got: row.len(),
            });
        }
    }
    Ok(d)
}

/// Per-feature mean-centered copy, examples in rows.
fn centered(examples: &[&[f64]]) -> Result<Vec<Vec<f64>>, RsaError> {
    let d = check_rectangular(examples)?;
    let n = examples.len() as f64;
    let mut means = vec![0.0; d];
    for row in examples {
        for (m, v) in means.iter_mut().zip(*row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    Ok(examples
        .iter()
        .map(|row| row.iter().zip(&means).map(|(v, m)| v - m).collect())
        .collect())
}

/// ‖AᵀB‖²_F for example-major A (N×Da) and B (N×Db): the squared Frobenius
/// norm of the Da×Db feature cross-covariance (up to the 1/N factor, which
/// cancels in the CKA ratio).
fn cross_frobenius_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let da = a[0].len();
    let db = b[0].len();
    let mut total = 0.0;
    for fa in 0..da {
        for fb in 0..db {
            let mut s = 0.0;
            for (ra, rb) in a.iter().zip(b) {
                s += ra[fa] * rb[fb];
            }
            total += s * s;
        }
    }
    total
}

/// Linear CKA between two representations of the same N examples (rows are
/// examples; feature dimensions may differ): with per-feature centered views
/// X̃ and Ỹ, returns ‖X̃ᵀỸ‖²_F / (‖X̃ᵀX̃‖_F · ‖ỸᵀỸ‖_F), clamped to [0,1].
pub fn linear_cka(x: &[&[f64]], y: &[&[f64]]) -> Result<f64, RsaError> {
    check_paired(x, y)?;
    let cx = centered(x)?;
    let cy = centered(y)?;
    let ssx = cross_frobenius_sq(&cx, &cx);
    if ssx == 0.0 {
        return Err(RsaError::Degenerate(
            "first representation has zero variance".into(),
        ));
    }
    let ssy = cross_frobenius_sq(&cy, &cy);
    if ssy == 0.0 {
        return Err(RsaError::Degenerate(
            "second representation has zero variance".into(),
        ));
    }
    let cross = cross_frobenius_sq(&cx, &cy);
    Ok((cross / (ssx * ssy).sqrt()).clamp(0.0, 1.0))
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Double-centered Gaussian Gram matrix of one representation; the bandwidth
/// is `fraction` times the median pairwise Euclidean distance of that same
/// representation, so the kernel is invariant to isotropic rescaling.
fn centered_rbf_gram(
    examples: &[&[f64]],
    fraction: f64,
    which: &str,
) -> Result<Vec<Vec<f64>>, RsaError> {
    check_rectangular(examples)?;
    let n = examples.len();
    let mut sq = vec![vec![0.0; n]; n];
    let mut distances = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = examples[i]
                .iter()
                .zip(examples[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sq[i][j] = s;
            sq[j][i] = s;
            distances.push(s.sqrt());
        }
    }
    let sigma = fraction * median_of(distances);
    if sigma == 0.0 {
        return Err(RsaError::Degenerate(format!(
            "{which} representation has median pairwise distance 0 (all examples identical)"
        )));
    }
    let scale = -1.0 / (2.0 * sigma * sigma);
    let mut k: Vec<Vec<f64>> = sq
        .into_iter()
        .map(|row| row.into_iter().map(|s| (s * scale).exp()).collect())
        .collect();

    let nf = n as f64;
    let row_means: Vec<f64> = k.iter().map(|row| row.iter().sum::<f64>() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v += grand - row_means[i] - row_means[j];
        }
    }
    Ok(k)
}

fn frobenius_dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb))
        .map(|(x, y)| x * y)
        .sum()
}

/// CKA under Gaussian kernels: HSIC(K,L)/√(HSIC(K,K)·HSIC(L,L)) with the
/// biased centered-trace HSIC estimator; each representation gets its own
/// median-distance bandwidth. Clamped to [0,1].
pub fn rbf_cka(x: &[&[f64]], y: &[&[f64]], bandwidth_fraction: f64) -> Result<f64, RsaError> {
    if !bandwidth_fraction.is_finite() || bandwidth_fraction <= 0.0 {
        return Err(RsaError::BadBandwidth(bandwidth_fraction));
    }
    check_paired(x, y)?;
    let kx = centered_rbf_gram(x, bandwidth_fraction, "first")?;
    let ky = centered_rbf_gram(y, bandwidth_fraction, "second")?;
    let skk = frobenius_dot(&kx, &kx);
    if skk == 0.0 {
        return Err(RsaError::Degenerate(
            "first representation yields a zero centered kernel".into(),
        ));
    }
    let sll = frobenius_dot(&ky, &ky);
    if sll == 0.0 {
        return Err(RsaError::Degenerate(
            "second representation yields a zero centered kernel".into(),
        ));
    }
    let skl = frobenius_dot(&kx, &ky);
    Ok((skl / (skk * sll).sqrt()).clamp(0.0, 1.0))
}

fn matrix_columns(m: &EmbeddingMatrix) -> Vec<&[f64]> {
    (0..m.len()).map(|i| m.column(i)).collect()
}

/// Similarity of a language's native embedding space to a foreign encoder's
/// view of the same stimuli: CKA between the native view (stimuli of λ under
/// λ's own encoder) and the foreign view (the same stimuli under another
/// encoder). Asymmetric by construction: the stimuli always come from the
/// native side's language.
pub fn similarity(
    native: &EmbeddingMatrix,
    foreign: &EmbeddingMatrix,
    kernel: Kernel,
) -> Result<f64, RsaError> {
    if native.stimuli_language != native.encoder_language {
        return Err(RsaError::TagMismatch {
            what: "native view's encoder",
            expected: native.stimuli_language.clone(),
            got: native.encoder_language.clone(),
        });
    }
    if foreign.stimuli_language != native.stimuli_language {
        return Err(RsaError::TagMismatch {
            what: "foreign view's stimuli",
            expected: native.stimuli_language.clone(),
            got: foreign.stimuli_language.clone(),
        });
    }
    if native.objective != foreign.objective {
        return Err(RsaError::ObjectiveMismatch(
            native.objective,
            foreign.objective,
        ));
    }
    if native.ids != foreign.ids {
        return Err(RsaError::StimuliMismatch);
    }
    kernel.cka(&matrix_columns(native), &matrix_columns(foreign))
}
