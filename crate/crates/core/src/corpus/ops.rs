//! Filtering, speaker-disjoint splitting, and same-word-type pairing.

use super::{CorpusError, SegmentRecord, Split, SplitManifest, SplitSet};
use crate::nncore::Rng;
use std::collections::BTreeMap;

const MAX_DURATION_S: f64 = 1.1;
const MIN_PHONES: usize = 4;

/// Keeps exactly the segments longer than 3 phones and shorter than 1.1 s.
pub fn filter_segments(records: &[SegmentRecord]) -> Vec<SegmentRecord> {
    records
        .iter()
        .filter(|r| r.phones.len() >= MIN_PHONES && r.dur_s < MAX_DURATION_S)
        .cloned()
        .collect()
}

/// Partitions speakers into train/validation/test by the given fractions
/// (largest-remainder rounding), then assigns every segment to its speaker's
/// split. Fractions that leave any split without a speaker are an error.
pub fn split_by_speaker(
    language: &str,
    records: &[SegmentRecord],
    fractions: (f64, f64, f64),
    rng: &Rng,
) -> Result<SplitManifest, CorpusError> {
    let (ft, fv, fe) = fractions;
    if !(ft >= 0.0 && fv >= 0.0 && fe >= 0.0) || (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadFractions(format!(
            "fractions ({ft}, {fv}, {fe}) must be non-negative and sum to 1"
        )));
    }

    let mut speakers: Vec<&str> = records.iter().map(|r| r.speaker.as_str()).collect();
    speakers.sort_unstable();
    speakers.dedup();
    let n = speakers.len();
    if n < 3 {
        return Err(CorpusError::TooFewSpeakers {
            have: n,
            split: "every",
        });
    }

    let quotas = largest_remainder(n, [ft, fv, fe]);
    for (quota, which) in quotas.iter().zip(Split::ALL) {
        if *quota == 0 {
            return Err(CorpusError::TooFewSpeakers {
                have: n,
                split: which.name(),
            });
        }
    }

    let mut shuffled = speakers.clone();
    rng.derive("speaker-split").shuffle(&mut shuffled);
    let train_speakers: Vec<&str> = shuffled[..quotas[0]].to_vec();
    let val_speakers: Vec<&str> = shuffled[quotas[0]..quotas[0] + quotas[1]].to_vec();
    let test_speakers: Vec<&str> = shuffled[quotas[0] + quotas[1]..].to_vec();

    let build = |speakers: &[&str]| -> SplitSet {
        let mut sorted: Vec<String> = speakers.iter().map(|s| s.to_string()).collect();
        sorted.sort_unstable();
        SplitSet {
            segments: records
                .iter()
                .filter(|r| sorted.iter().any(|s| *s == r.speaker))
                .map(|r| r.id.clone())
                .collect(),
            speakers: sorted,
        }
    };

    Ok(SplitManifest {
        language: language.to_string(),
        train: build(&train_speakers),
        validation: build(&val_speakers),
        test: build(&test_speakers),
    })
}

fn largest_remainder(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|a, b| {
        let ra = exact[*a] - exact[*a].floor();
        let rb = exact[*b] - exact[*b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(b))
    });
    for i in 0..(n - assigned) {
        quotas[order[i % 3]] += 1;
    }
    [quotas[0], quotas[1], quotas[2]]
}

/// Pairs every segment that has another rendering of the same word type with
/// one uniformly sampled positive. With `different_speaker` set, positives
/// are restricted to other speakers and anchors with no cross-speaker
/// instance are skipped. Returns (anchor id, positive id) pairs in record
/// order.
pub fn pair_same_type(
    records: &[SegmentRecord],
    different_speaker: bool,
    rng: &mut Rng,
) -> Vec<(String, String)> {
    let mut by_word: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, record) in records.iter().enumerate() {
        by_word.entry(record.word.as_str()).or_default().push(i);
    }

    let mut pairs = Vec::new();
    for (i, anchor) in records.iter().enumerate() {
        let candidates: Vec<usize> = by_word[anchor.word.as_str()]
            .iter()
            .copied()
            .filter(|j| *j != i)
            .filter(|j| !different_speaker || records[*j].speaker != anchor.speaker)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let positive = candidates[rng.below(candidates.len())];
        pairs.push((anchor.id.clone(), records[positive].id.clone()));
    }
    pairs
}
