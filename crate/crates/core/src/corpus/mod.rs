//! Dataset assembly: segment records, duration and length filtering,
//! speaker-disjoint train/validation/test splits, and same-word-type pairing
//! for reconstruction and contrastive objectives.

mod ops;

pub use ops::{filter_segments, pair_same_type, split_by_speaker};

use crate::synthlang::PhoneId;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

/// Where a segment's features live: an AWEF feature file and the segment id
/// it is indexed under there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRef {
    pub file: String,
    pub seg_id: String,
}

/// One spoken-word segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub id: String,
    /// Word type id; all renderings of the same word share it.
    pub word: String,
    pub phones: Vec<PhoneId>,
    pub speaker: String,
    pub dur_s: f64,
    pub feat: FeatureRef,
}

impl SegmentRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.phones.is_empty() {
            return Err(CorpusError::BadRecord(format!(
                "segment {} has an empty phone sequence",
                self.id
            )));
        }
        if !(self.dur_s > 0.0) || !self.dur_s.is_finite() {
            return Err(CorpusError::BadRecord(format!(
                "segment {} has non-positive duration {}",
                self.id, self.dur_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// Segment ids and speaker ids belonging to one split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub segments: Vec<String>,
    pub speakers: Vec<String>,
}

/// The three splits of one language's corpus, disjoint in both segments and
/// speakers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub language: String,
    pub train: SplitSet,
    pub validation: SplitSet,
    pub test: SplitSet,
}

impl SplitManifest {
    pub fn split(&self, which: Split) -> &SplitSet {
        match which {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

/// A language's segments plus their split assignment. Read-only once built;
/// safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub segments: Vec<SegmentRecord>,
    pub splits: SplitManifest,
}

impl Corpus {
    pub fn new(segments: Vec<SegmentRecord>, splits: SplitManifest) -> Result<Self, CorpusError> {
        let corpus = Self { segments, splits };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn language(&self) -> &str {
        &self.splits.language
    }

    pub fn get(&self, id: &str) -> Option<&SegmentRecord> {
        self.segments.iter().find(|s| s.id == id)
    }

    /// Records of one split, in manifest order.
    pub fn split_records(&self, which: Split) -> Vec<&SegmentRecord> {
        let by_id: BTreeMap<&str, &SegmentRecord> =
            self.segments.iter().map(|s| (s.id.as_str(), s)).collect();
        self.splits
            .split(which)
            .segments
            .iter()
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .collect()
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = BTreeSet::new();
        for segment in &self.segments {
            segment.validate()?;
            if !ids.insert(segment.id.as_str()) {
                return Err(CorpusError::DuplicateSegment(segment.id.clone()));
            }
        }

        let mut seen_segments: BTreeSet<&str> = BTreeSet::new();
        let mut seen_speakers: BTreeSet<&str> = BTreeSet::new();
        for which in Split::ALL {
            let set = self.splits.split(which);
            let speakers: BTreeSet<&str> = set.speakers.iter().map(String::as_str).collect();
            for speaker in &speakers {
                if !seen_speakers.insert(speaker) {
                    return Err(CorpusError::SpeakerOverlap(speaker.to_string()));
                }
            }
            for id in &set.segments {
                if !ids.contains(id.as_str()) {
                    return Err(CorpusError::UnknownSegment(id.clone()));
                }
                if !seen_segments.insert(id) {
                    return Err(CorpusError::SegmentOverlap(id.clone()));
                }
                let record = self.get(id).expect("id checked above");
                if !speakers.contains(record.speaker.as_str()) {
                    return Err(CorpusError::BadRecord(format!(
                        "segment {} belongs to speaker {} outside its split",
                        id, record.speaker
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid segment record: {0}")]
    BadRecord(String),
    #[error("duplicate segment id {0}")]
    DuplicateSegment(String),
    #[error("segment {0} appears in more than one split")]
    SegmentOverlap(String),
    #[error("speaker {0} appears in more than one split")]
    SpeakerOverlap(String),
    #[error("split references unknown segment {0}")]
    UnknownSegment(String),
    #[error("split fractions invalid: {0}")]
    BadFractions(String),
    #[error("too few speakers: have {have}, but the requested fractions leave the {split} split empty")]
    TooFewSpeakers { have: usize, split: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize, Deserialize)]
struct ManifestJson {
    language: String,
    segments: Vec<SegmentRecord>,
    splits: SplitsJson,
}

#[derive(Serialize, Deserialize)]
struct SplitsJson {
    train: SplitSet,
    validation: SplitSet,
    test: SplitSet,
}

pub fn write_manifest(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    let json = ManifestJson {
        language: corpus.splits.language.clone(),
        segments: corpus.segments.clone(),
        splits: SplitsJson {
            train: corpus.splits.train.clone(),
            validation: corpus.splits.validation.clone(),
            test: corpus.splits.test.clone(),
        },
    };
    std::fs::write(path, serde_json::to_vec_pretty(&json)?)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Corpus, CorpusError> {
    let json: ManifestJson = serde_json::from_slice(&std::fs::read(path)?)?;
    Corpus::new(
        json.segments,
        SplitManifest {
            language: json.language,
            train: json.splits.train,
            validation: json.splits.validation,
            test: json.splits.test,
        },
    )
}
