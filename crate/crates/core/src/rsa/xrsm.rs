//! Cross-lingual similarity matrices and cross-model comparison tables,
//! with CSV, JSON, and SVG heatmap exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{similarity, Kernel, RsaError};
use crate::encoders::{EmbeddingMatrix, Objective};

/// Asymmetric M×M language similarity matrix: entry (i, j) is the alignment
/// between language i's native embedding space and encoder j's view of the
/// same language-i stimuli. Rows index the stimuli language, columns the
/// encoder language; the diagonal is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Xrsm {
    pub languages: Vec<String>,
    pub objective: Objective,
    pub kernel: Kernel,
    /// Held-out stimulus count per language, aligned with `languages`.
    pub stimuli_sizes: Vec<usize>,
    /// Row-major M×M values in [0,1].
    pub values: Vec<f64>,
}

impl Xrsm {
    pub fn size(&self) -> usize {
        self.languages.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let m = self.size();
        &self.values[row * m..(row + 1) * m]
    }

    /// CSV with language ids as row and column headers; rows are the
    /// stimuli language.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stimuli\\encoder");
        for lang in &self.languages {
            out.push(',');
            out.push_str(lang);
        }
        out.push('\n');
        for (i, lang) in self.languages.iter().enumerate() {
            out.push_str(lang);
            for j in 0..self.size() {
                let _ = write!(out, ",{}", self.entry(i, j));
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the similarity matrix over the given language order. `views` must
/// hold one embedding matrix per (stimuli language, encoder language) pair;
/// each row's views must share stimuli and all views the objective.
pub fn build_xrsm(
    languages: &[String],
    views: &[EmbeddingMatrix],
    kernel: Kernel,
) -> Result<Xrsm, RsaError> {
    let m = languages.len();
    if m < 2 {
        return Err(RsaError::TooFewLanguages(m));
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for lang in languages {
            if !seen.insert(lang) {
                return Err(RsaError::DuplicateLanguage(lang.clone()));
            }
        }
    }
    let mut index: BTreeMap<(&str, &str), &EmbeddingMatrix> = BTreeMap::new();
    for v in views {
        let key = (v.stimuli_language.as_str(), v.encoder_language.as_str());
        if index.insert(key, v).is_some() {
            return Err(RsaError::DuplicateView {
                stimuli: v.stimuli_language.clone(),
                encoder: v.encoder_language.clone(),
            });
        }
    }
    let fetch = |stimuli: &str, encoder: &str| {
        index
            .get(&(stimuli, encoder))
            .copied()
            .ok_or_else(|| RsaError::MissingView {
                stimuli: stimuli.to_string(),
                encoder: encoder.to_string(),
            })
    };

    let mut objective = None;
    let mut stimuli_sizes = Vec::with_capacity(m);
    let mut values = vec![0.0; m * m];
    for (i, stimuli) in languages.iter().enumerate() {
        let native = fetch(stimuli, stimuli)?;
        match objective {
            None => objective = Some(native.objective),
            Some(o) if o != native.objective => {
                return Err(RsaError::ObjectiveMismatch(o, native.objective))
            }
            Some(_) => {}
        }
        stimuli_sizes.push(native.len());
        for (j, encoder) in languages.iter().enumerate() {
            let foreign = fetch(stimuli, encoder)?;
            values[i * m + j] = similarity(native, foreign, kernel)?;
        }
    }
    Ok(Xrsm {
        languages: languages.to_vec(),
        objective: objective.expect("at least two languages"),
        kernel,
        stimuli_sizes,
        values,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct XrsmDoc {
    languages: Vec<String>,
    objective: Objective,
    kernel: Kernel,
    seed: u64,
    stimuli_sizes: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

/// Writes the matrix with its provenance metadata as JSON.
pub fn write_xrsm_json(path: &Path, xrsm: &Xrsm, seed: u64) -> Result<(), RsaError> {
    let doc = XrsmDoc {
        languages: xrsm.languages.clone(),
        objective: xrsm.objective,
        kernel: xrsm.kernel,
        seed,
        stimuli_sizes: xrsm.stimuli_sizes.clone(),
        rows: (0..xrsm.size()).map(|i| xrsm.row(i).to_vec()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a matrix written by [`write_xrsm_json`], validating its shape and
/// the unit diagonal.
pub fn read_xrsm_json(path: &Path) -> Result<(Xrsm, u64), RsaError> {
    let doc: XrsmDoc = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let m = doc.languages.len();
    if m < 2 {
        return Err(RsaError::BadFile(format!("{m} languages in matrix file")));
    }
    if doc.rows.len() != m
        || doc.rows.iter().any(|r| r.len() != m)
        || doc.stimuli_sizes.len() != m
    {
        return Err(RsaError::BadFile(format!(
            "matrix shape does not match its {m} languages"
        )));
    }
    let values: Vec<f64> = doc.rows.into_iter().flatten().collect();
    for (idx, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(RsaError::BadFile(format!("non-finite entry at index {idx}")));
        }
    }
    for i in 0..m {
        let d = values[i * m + i];
        if (d - 1.0).abs() > 1e-9 {
            return Err(RsaError::BadFile(format!(
                "diagonal entry for {} is {d}, expected 1",
                doc.languages[i]
            )));
        }
    }
    Ok((
        Xrsm {
            languages: doc.languages,
            objective: doc.objective,
            kernel: doc.kernel,
            stimuli_sizes: doc.stimuli_sizes,
            values,
        },
        doc.seed,
    ))
}

/// Three-stop warm ramp (pale yellow through orange to dark red) over [0,1].
fn warm_color(t: f64) -> (u8, u8, u8) {
    const STOPS: [[f64; 3]; 3] = [
        [255.0, 255.0, 204.0],
        [253.0, 141.0, 60.0],
        [128.0, 0.0, 38.0],
    ];
    let t = t.clamp(0.0, 1.0);
    let (lo, hi, frac) = if t < 0.5 {
        (STOPS[0], STOPS[1], t * 2.0)
    } else {
        (STOPS[1], STOPS[2], (t - 0.5) * 2.0)
    };
    let channel = |a: f64, b: f64| (a + (b - a) * frac).round() as u8;
    (
        channel(lo[0], hi[0]),
        channel(lo[1], hi[1]),
        channel(lo[2], hi[2]),
    )
}

/// Standalone SVG heatmap of the matrix, warm colors for high similarity,
/// every cell annotated with its value.
pub fn xrsm_heatmap_svg(xrsm: &Xrsm) -> String {
    const CELL: usize = 64;
    const LEFT: usize = 88;
    const TOP: usize = 64;
    const PAD: usize = 16;
    let m = xrsm.size();
    let width = LEFT + m * CELL + PAD;
    let height = TOP + m * CELL + PAD;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
    let _ = write!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{} similarity ({} kernel), rows = stimuli language</text>",
        width / 2,
        xrsm.objective.name().to_uppercase(),
        xrsm.kernel.name()
    );
    for (j, lang) in xrsm.languages.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{lang}</text>",
            LEFT + j * CELL + CELL / 2,
            TOP - 10
        );
    }
    for (i, lang) in xrsm.languages.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"end\">{lang}</text>",
            LEFT - 10,
            TOP + i * CELL + CELL / 2 + 5
        );
    }
    for i in 0..m {
        for j in 0..m {
            let v = xrsm.entry(i, j);
            let (r, g, b) = warm_color(v);
            let x = LEFT + j * CELL;
            let y = TOP + i * CELL;
            let _ = write!(
                svg,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
                 fill=\"#{r:02x}{g:02x}{b:02x}\" stroke=\"white\"/>"
            );
            let luminance = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
            let ink = if luminance < 140.0 { "white" } else { "black" };
            let _ = write!(
                svg,
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" fill=\"{ink}\">{v:.3}</text>",
                x + CELL / 2,
                y + CELL / 2 + 4
            );
        }
    }
    svg.push_str("</svg>");
    svg
}

/// Per-language alignment between embedding spaces trained under different
/// objectives on the same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossModelRow {
    pub language: String,
    pub pge_cae: f64,
    pub pge_cse: f64,
    pub cae_cse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossModelTable {
    pub kernel: Kernel,
    pub rows: Vec<CrossModelRow>,
    pub mean_pge_cae: f64,
    pub mean_pge_cse: f64,
    pub mean_cae_cse: f64,
}

impl CrossModelTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("language,pge_cae,pge_cse,cae_cse\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.language, row.pge_cae, row.pge_cse, row.cae_cse
            );
        }
        let _ = writeln!(
            out,
            "mean,{},{},{}",
            self.mean_pge_cae, self.mean_pge_cse, self.mean_cae_cse
        );
        out
    }
}

/// Compares the three objectives per language: every view must be native
/// (a language's own stimuli under its own encoder), with one view per
/// objective per language and shared stimuli within a language.
pub fn cross_model_table(
    views: &[EmbeddingMatrix],
    kernel: Kernel,
) -> Result<CrossModelTable, RsaError> {
    if views.is_empty() {
        return Err(RsaError::NoViews);
    }
    let mut by_language: BTreeMap<&str, [Option<&EmbeddingMatrix>; 3]> = BTreeMap::new();
    for v in views {
        if v.stimuli_language != v.encoder_language {
            return Err(RsaError::TagMismatch {
                what: "cross-model view's encoder",
                expected: v.stimuli_language.clone(),
                got: v.encoder_language.clone(),
            });
        }
        let slots = by_language
            .entry(v.stimuli_language.as_str())
            .or_insert([None; 3]);
        let slot = &mut slots[v.objective as usize];
        if slot.is_some() {
            return Err(RsaError::DuplicateObjective {
                language: v.stimuli_language.clone(),
                objective: v.objective,
            });
        }
        *slot = Some(v);
    }

    let mut rows = Vec::with_capacity(by_language.len());
    for (language, slots) in &by_language {
        let get = |objective: Objective| {
            slots[objective as usize].ok_or_else(|| RsaError::MissingObjective {
                language: language.to_string(),
                objective,
            })
        };
        let pge = get(Objective::Pge)?;
        let cae = get(Objective::Cae)?;
        let cse = get(Objective::Cse)?;
        if pge.ids != cae.ids || pge.ids != cse.ids {
            return Err(RsaError::StimuliMismatch);
        }
        fn columns(m: &EmbeddingMatrix) -> Vec<&[f64]> {
            (0..m.len()).map(|i| m.column(i)).collect()
        }
        let (xp, xa, xs) = (columns(pge), columns(cae), columns(cse));
        rows.push(CrossModelRow {
            language: language.to_string(),
            pge_cae: kernel.cka(&xp, &xa)?,
            pge_cse: kernel.cka(&xp, &xs)?,
            cae_cse: kernel.cka(&xa, &xs)?,
        });
    }
    let n = rows.len() as f64;
    Ok(CrossModelTable {
        kernel,
        mean_pge_cae: rows.iter().map(|r| r.pge_cae).sum::<f64>() / n,
        mean_pge_cse: rows.iter().map(|r| r.pge_cse).sum::<f64>() / n,
        mean_cae_cse: rows.iter().map(|r| r.cae_cse).sum::<f64>() / n,
        rows,
    })
}

pub fn write_cross_model_json(path: &Path, table: &CrossModelTable) -> Result<(), RsaError> {
    let mut text = serde_json::to_string_pretty(table)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_cross_model_json(path: &Path) -> Result<CrossModelTable, RsaError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
