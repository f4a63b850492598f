//! Loading helpers shared by the pipeline stages: corpora, feature files,
//! and per-split stimulus lists, with missing-artifact diagnostics.

use crate::artifacts::Layout;
use crate::error::CliError;
use awe_core::corpus::{read_manifest, Corpus, Split};
use awe_core::features::{read_feature_file, FeatureFile, FeatureSequence};
use std::collections::BTreeMap;
use std::path::Path;

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "missing {what} at {}; run the synth stage first",
            path.display()
        )))
    }
}

pub fn load_corpus(layout: &Layout, language: &str) -> Result<Corpus, CliError> {
    let path = layout.manifest(language);
    require(&path, &format!("corpus manifest for {language}"))?;
    Ok(read_manifest(&path)?)
}

pub fn load_features(layout: &Layout, language: &str) -> Result<FeatureFile, CliError> {
    let path = layout.features(language);
    require(&path, &format!("feature file for {language}"))?;
    Ok(read_feature_file(&path)?)
}

/// Decodes the features of every segment in the corpus, keyed by segment id.
pub fn features_map(
    corpus: &Corpus,
    file: &FeatureFile,
) -> Result<BTreeMap<String, FeatureSequence>, CliError> {
    let mut map = BTreeMap::new();
    for record in &corpus.segments {
        map.insert(record.feat.seg_id.clone(), file.get(&record.feat.seg_id)?);
    }
    Ok(map)
}

/// The stimuli of one split as `(segment id, features)` in manifest order.
pub fn split_stimuli(
    corpus: &Corpus,
    file: &FeatureFile,
    split: Split,
) -> Result<Vec<(String, FeatureSequence)>, CliError> {
    corpus
        .split_records(split)
        .into_iter()
        .map(|record| Ok((record.id.clone(), file.get(&record.feat.seg_id)?)))
        .collect()
}

/// Word-type and speaker labels of one split, aligned with `split_stimuli`.
pub fn split_labels(corpus: &Corpus, split: Split) -> (Vec<String>, Vec<String>) {
    let records = corpus.split_records(split);
    let words = records.iter().map(|r| r.word.clone()).collect();
    let speakers = records.iter().map(|r| r.speaker.clone()).collect();
    (words, speakers)
}
