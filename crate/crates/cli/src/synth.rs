//! Corpus synthesis: builds the language family, voices every word type with
//! every speaker, and writes feature files, manifests, language descriptions,
//! and the ground-truth language-distance table.

use crate::artifacts::Layout;
use crate::config::RunConfig;
use crate::error::CliError;
use awe_core::corpus::{
    filter_segments, split_by_speaker, write_manifest, Corpus, FeatureRef, SegmentRecord, Split,
};
use awe_core::features::write_feature_file;
use awe_core::nncore::Rng;
use awe_core::synthlang::{
    derive_language, generate_language, generate_speakers, language_distance, sample_unique_words,
    write_language_json, write_speakers_json, LanguageSpec,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Per-language synthesis counts, for logging and tests.
#[derive(Debug, Clone, Serialize)]
pub struct LanguageOutcome {
    pub language: String,
    pub segments: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthOutcome {
    pub languages: Vec<LanguageOutcome>,
    pub distances: Vec<Vec<f64>>,
}

/// The ground-truth dissimilarity table written next to the corpora.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceTable {
    pub languages: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DistanceTable {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.languages.iter().position(|l| l == a)?;
        let j = self.languages.iter().position(|l| l == b)?;
        Some(self.rows[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("language");
        for lang in &self.languages {
            let _ = write!(out, ",{lang}");
        }
        out.push('\n');
        for (i, lang) in self.languages.iter().enumerate() {
            let _ = write!(out, "{lang}");
            for value in &self.rows[i] {
                let _ = write!(out, ",{value}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn read_distance_table(path: &Path) -> Result<DistanceTable, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| CliError::data(format!("cannot read {}: {err}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Builds every language of the family. The base language comes from its
/// generation knobs; each derived language perturbs the base under its own
/// stream.
pub fn build_family(config: &RunConfig) -> Result<Vec<LanguageSpec>, CliError> {
    let family_rng = Rng::new(config.seed).derive("synth").derive("family");
    let base = generate_language(
        &config.family.base,
        &family_rng.derive(&config.family.base.id),
    )?;
    let mut specs = vec![base.clone()];
    for derived in &config.family.derived {
        let mut spec = derive_language(&base, derived.perturbation, &family_rng.derive(&derived.id))?;
        spec.id = derived.id.clone();
        specs.push(spec);
    }
    Ok(specs)
}

fn voice_language(
    config: &RunConfig,
    spec: &LanguageSpec,
    layout: &Layout,
) -> Result<LanguageOutcome, CliError> {
    let lang = spec.id.as_str();
    let lang_rng = Rng::new(config.seed).derive("synth").derive(lang);

    let speakers = generate_speakers(
        config.family.speakers.count,
        spec.k,
        config.family.speakers.noise_sd,
        &lang_rng.derive("speakers"),
    )?;
    let words = sample_unique_words(
        spec,
        config.family.words.count,
        config.family.words.min_len,
        config.family.words.max_len,
        &mut lang_rng.derive("words"),
    )?;

    let mut render_rng = lang_rng.derive("render");
    let mut records = Vec::new();
    let mut segments = Vec::new();
    let feature_file_name = Layout::features_file_name(lang);
    for (w, word) in words.iter().enumerate() {
        let word_id = format!("w{w:03}");
        for speaker in &speakers {
            for r in 0..config.family.words.renditions {
                let seq = awe_core::synthlang::render(word, spec, speaker, &mut render_rng)?;
                let id = format!("{lang}-{word_id}-{}-r{r}", speaker.id);
                records.push(SegmentRecord {
                    id: id.clone(),
                    word: word_id.clone(),
                    phones: word.clone(),
                    speaker: speaker.id.clone(),
                    dur_s: seq.duration_s(),
                    feat: FeatureRef {
                        file: feature_file_name.clone(),
                        seg_id: id.clone(),
                    },
                });
                segments.push((id, seq));
            }
        }
    }

    let kept = filter_segments(&records);
    if kept.is_empty() {
        return Err(CliError::data(format!(
            "language {lang}: every rendered segment was filtered out"
        )));
    }
    let manifest = split_by_speaker(lang, &kept, config.family.fractions, &lang_rng.derive("split"))?;
    let corpus = Corpus::new(kept, manifest)?;

    write_feature_file(&layout.features(lang), &segments)?;
    write_manifest(&layout.manifest(lang), &corpus)?;
    write_language_json(&layout.language_spec(lang), spec)?;
    write_speakers_json(&layout.speakers(lang), &speakers)?;

    Ok(LanguageOutcome {
        language: lang.to_string(),
        segments: corpus.segments.len(),
        train: corpus.split_records(Split::Train).len(),
        validation: corpus.split_records(Split::Validation).len(),
        test: corpus.split_records(Split::Test).len(),
    })
}

/// Runs the whole synthesis stage and writes the distance table.
pub fn run_synth(config: &RunConfig) -> Result<SynthOutcome, CliError> {
    let layout = Layout::new(&config.output_dir);
    std::fs::create_dir_all(layout.languages_dir())?;

    let specs = build_family(config)?;
    let mut outcomes = Vec::new();
    for spec in &specs {
        outcomes.push(voice_language(config, spec, &layout)?);
    }

    let languages: Vec<String> = specs.iter().map(|s| s.id.clone()).collect();
    let mut rows = Vec::new();
    for a in &specs {
        let mut row = Vec::new();
        for b in &specs {
            row.push(language_distance(a, b)?);
        }
        rows.push(row);
    }
    let table = DistanceTable {
        languages,
        rows: rows.clone(),
    };
    std::fs::write(layout.distances_csv(), table.to_csv())?;
    let mut json = serde_json::to_string_pretty(&table)?;
    json.push('\n');
    std::fs::write(layout.distances_json(), json)?;

    Ok(SynthOutcome {
        languages: outcomes,
        distances: rows,
    })
}
