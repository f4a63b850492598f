//! Same-different word discrimination: exact cosine retrieval, average
//! precision, mean average precision over an embedded evaluation set, and a
//! label-shuffled chance baseline.

use crate::encoders::EmbeddingMatrix;
use crate::nncore::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// What counts as a relevant retrieval for a query. In the different-speaker
/// regime, other renditions of the query word by the query's own speaker are
/// removed from the ranking entirely rather than marked irrelevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelevanceMode {
    SameWordAnySpeaker,
    SameWordDifferentSpeaker,
}

impl Default for RelevanceMode {
    fn default() -> Self {
        RelevanceMode::SameWordDifferentSpeaker
    }
}

impl RelevanceMode {
    pub fn name(self) -> &'static str {
        match self {
            RelevanceMode::SameWordAnySpeaker => "same-word-any-speaker",
            RelevanceMode::SameWordDifferentSpeaker => "same-word-different-speaker",
        }
    }
}

/// An embedded evaluation set: one word-type label and one speaker label per
/// embedding column.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub embeddings: EmbeddingMatrix,
    pub words: Vec<String>,
    pub speakers: Vec<String>,
}

impl EvalSet {
    pub fn new(
        embeddings: EmbeddingMatrix,
        words: Vec<String>,
        speakers: Vec<String>,
    ) -> Result<Self, EvalError> {
        let n = embeddings.len();
        if words.len() != n || speakers.len() != n {
            return Err(EvalError::BadLabels {
                n,
                words: words.len(),
                speakers: speakers.len(),
            });
        }
        if n < 2 {
            return Err(EvalError::TooSmall(n));
        }
        Ok(Self {
            embeddings,
            words,
            speakers,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }
}

/// mAP plus how many queries contributed (those with at least one relevant
/// item under the mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapScore {
    pub map: f64,
    pub n_queries: usize,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label arrays must match the {n} embeddings: {words} words, {speakers} speakers")]
    BadLabels {
        n: usize,
        words: usize,
        speakers: usize,
    },
    #[error("evaluation set needs at least 2 items, got {0}")]
    TooSmall(usize),
    #[error("column {column} ({id}) has a zero-norm embedding; cosine distance undefined")]
    ZeroNorm { column: usize, id: String },
    #[error("query {0} is out of range for {1} columns")]
    QueryOutOfRange(usize, usize),
    #[error("ranking has no relevant item")]
    NoRelevantItems,
    #[error("no query has a relevant item under mode {0}")]
    NoValidQueries(&'static str),
    #[error("shuffled baseline needs at least 1 trial")]
    NoTrials,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn column_norms(x: &EmbeddingMatrix) -> Result<Vec<f64>, EvalError> {
    (0..x.len())
        .map(|i| {
            let norm = x.column(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                Err(EvalError::ZeroNorm {
                    column: i,
                    id: x.ids[i].clone(),
                })
            } else {
                Ok(norm)
            }
        })
        .collect()
}

/// Cosine distance `(1 − cos)/2` between columns, with cosine clamped to
/// [−1, 1] so the distance stays in [0, 1] under rounding.
fn pair_distance(x: &EmbeddingMatrix, norms: &[f64], i: usize, j: usize) -> f64 {
    let dot: f64 = x
        .column(i)
        .iter()
        .zip(x.column(j))
        .map(|(a, b)| a * b)
        .sum();
    let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
    (1.0 - cos) / 2.0
}

/// Ranks every other column by cosine distance to the query, ascending, ties
/// broken by ascending column index.
pub fn cosine_rank(x: &EmbeddingMatrix, query: usize) -> Result<Vec<(usize, f64)>, EvalError> {
    if query >= x.len() {
        return Err(EvalError::QueryOutOfRange(query, x.len()));
    }
    let norms = column_norms(x)?;
    let mut ranked: Vec<(usize, f64)> = (0..x.len())
        .filter(|&j| j != query)
        .map(|j| (j, pair_distance(x, &norms, query, j)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Average precision of a ranking given its relevance flags: the mean over
/// relevant ranks `r` of (relevant items in the top `r`) / `r`.
pub fn average_precision(relevance: &[bool]) -> Result<f64, EvalError> {
    let total = relevance.iter().filter(|&&r| r).count();
    if total == 0 {
        return Err(EvalError::NoRelevantItems);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &relevant) in relevance.iter().enumerate() {
        if relevant {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / total as f64)
}

fn map_over_labels(
    x: &EmbeddingMatrix,
    words: &[String],
    speakers: &[String],
    mode: RelevanceMode,
) -> Result<MapScore, EvalError> {
    let norms = column_norms(x)?;
    let n = x.len();
    let mut ap_sum = 0.0;
    let mut queries = 0usize;
    let mut ranked: Vec<(f64, usize, bool)> = Vec::with_capacity(n);
    for q in 0..n {
        ranked.clear();
        for c in 0..n {
            if c == q {
                continue;
            }
            let same_word = words[c] == words[q];
            let relevant = match mode {
                RelevanceMode::SameWordAnySpeaker => same_word,
                RelevanceMode::SameWordDifferentSpeaker => {
                    if same_word && speakers[c] == speakers[q] {
                        continue;
                    }
                    same_word
                }
            };
            ranked.push((pair_distance(x, &norms, q, c), c, relevant));
        }
        if !ranked.iter().any(|r| r.2) {
            continue;
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let flags: Vec<bool> = ranked.iter().map(|r| r.2).collect();
        ap_sum += average_precision(&flags)?;
        queries += 1;
    }
    if queries == 0 {
        return Err(EvalError::NoValidQueries(mode.name()));
    }
    Ok(MapScore {
        map: ap_sum / queries as f64,
        n_queries: queries,
    })
}

/// Mean average precision of same-different word discrimination over every
/// query with at least one relevant item.
pub fn map_same_different(set: &EvalSet, mode: RelevanceMode) -> Result<MapScore, EvalError> {
    map_over_labels(&set.embeddings, &set.words, &set.speakers, mode)
}

/// Chance floor: mAP averaged over `trials` uniform permutations of the
/// word-type labels (speakers stay put).
pub fn shuffled_baseline(
    set: &EvalSet,
    mode: RelevanceMode,
    trials: usize,
    rng: &mut Rng,
) -> Result<f64, EvalError> {
    if trials == 0 {
        return Err(EvalError::NoTrials);
    }
    let mut total = 0.0;
    let mut perm: Vec<usize> = (0..set.len()).collect();
    for _ in 0..trials {
        rng.shuffle(&mut perm);
        let shuffled: Vec<String> = perm.iter().map(|&i| set.words[i].clone()).collect();
        total += map_over_labels(&set.embeddings, &shuffled, &set.speakers, mode)?.map;
    }
    Ok(total / trials as f64)
}

/// One evaluation result, serialized as
/// `{language, objective, mode, mAP, n_queries, baseline}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub language: String,
    pub objective: String,
    pub mode: RelevanceMode,
    #[serde(rename = "mAP")]
    pub map: f64,
    pub n_queries: usize,
    pub baseline: f64,
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<EvalReport, EvalError> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::Objective;

    fn matrix(dim: usize, columns: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix {
            dim,
            ids: (0..columns.len()).map(|i| format!("seg{i}")).collect(),
            stimuli_language: "L".into(),
            encoder_language: "L".into(),
            objective: Objective::Cse,
            data: columns.concat(),
        }
    }

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn duplicate_of_the_query_ranks_first_at_distance_zero() {
        let x = matrix(
            2,
            &[vec![3.0, 1.0], vec![-1.0, 2.0], vec![3.0, 1.0], vec![0.0, 5.0]],
        );
        let ranked = cosine_rank(&x, 0).unwrap();
        assert_eq!(ranked[0].0, 2);
        assert!(ranked[0].1.abs() <= 1e-15);
        assert_eq!(ranked.len(), 3);
    }

    #[test]
    fn orthogonal_vectors_sit_at_distance_half() {
        let x = matrix(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let ranked = cosine_rank(&x, 0).unwrap();
        assert_eq!(ranked, vec![(1, 0.5)]);
    }

    #[test]
    fn zero_norm_embedding_is_reported_by_column() {
        let x = matrix(2, &[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let err = cosine_rank(&x, 0).unwrap_err();
        assert!(matches!(
            err,
            EvalError::ZeroNorm { column: 1, ref id } if id == "seg1"
        ));
        let msg = err.to_string();
        assert!(msg.contains("column 1") && msg.contains("seg1"), "{msg}");
    }

    #[test]
    fn rank_is_out_of_range_checked() {
        let x = matrix(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            cosine_rank(&x, 2),
            Err(EvalError::QueryOutOfRange(2, 2))
        ));
    }

    #[test]
    fn average_precision_matches_hand_examples() {
        let ap = average_precision(&[true, false, true, false]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(
            average_precision(&[true, true, false, false]).unwrap(),
            1.0
        );
        assert!(matches!(
            average_precision(&[false, false]),
            Err(EvalError::NoRelevantItems)
        ));
    }

    fn clustered_set() -> EvalSet {
        // Two tight word clusters, two speakers interleaved.
        let x = matrix(
            2,
            &[
                vec![1.0, 0.0],
                vec![0.98, 0.02],
                vec![0.0, 1.0],
                vec![0.02, 0.98],
            ],
        );
        EvalSet::new(
            x,
            labels(&["red", "red", "blue", "blue"]),
            labels(&["s0", "s1", "s0", "s1"]),
        )
        .unwrap()
    }

    #[test]
    fn perfectly_clustered_words_score_one_in_both_modes() {
        let set = clustered_set();
        for mode in [
            RelevanceMode::SameWordAnySpeaker,
            RelevanceMode::SameWordDifferentSpeaker,
        ] {
            let score = map_same_different(&set, mode).unwrap();
            assert_eq!(score.map, 1.0, "mode {mode:?}");
            assert_eq!(score.n_queries, 4);
        }
    }

    #[test]
    fn different_speaker_mode_drops_same_speaker_repeats_from_the_ranking() {
        // Query 0's same-speaker twin (column 1) would rank first; the
        // different-speaker regime removes it, leaving the distractor (2)
        // ahead of the cross-speaker rendition (3).
        let x = matrix(
            2,
            &[
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![0.9, 0.1],
                vec![0.5, 0.5],
            ],
        );
        let set = EvalSet::new(
            x,
            labels(&["w", "w", "other", "w"]),
            labels(&["s0", "s0", "s1", "s2"]),
        )
        .unwrap();

        let any = map_same_different(&set, RelevanceMode::SameWordAnySpeaker).unwrap();
        let diff = map_same_different(&set, RelevanceMode::SameWordDifferentSpeaker).unwrap();

        // Any-speaker, query 0: relevant at ranks 1 (col 1) and 3 (col 3).
        // Different-speaker, query 0: col 1 leaves the ranking, so the only
        // relevant item sits at rank 2 behind the distractor.
        let q0_any = average_precision(&[true, false, true]).unwrap();
        let q0_diff = average_precision(&[false, true]).unwrap();
        assert!(any.map > diff.map);
        assert!((q0_any - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((q0_diff - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_valid_query_is_an_error() {
        let x = matrix(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let set = EvalSet::new(x, labels(&["a", "b"]), labels(&["s0", "s1"])).unwrap();
        assert!(matches!(
            map_same_different(&set, RelevanceMode::SameWordAnySpeaker),
            Err(EvalError::NoValidQueries(_))
        ));
    }

    #[test]
    fn map_is_invariant_to_column_permutation_and_scaling() {
        let mut rng = Rng::new(404);
        let dim = 5;
        let n = 12;
        let columns: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.normal(0.0, 1.0)).collect())
            .collect();
        let words: Vec<String> = (0..n).map(|i| format!("w{}", i % 4)).collect();
        let speakers: Vec<String> = (0..n).map(|i| format!("s{}", i % 3)).collect();
        let base = EvalSet::new(matrix(dim, &columns), words.clone(), speakers.clone()).unwrap();
        let reference = map_same_different(&base, RelevanceMode::SameWordAnySpeaker).unwrap();

        let perm: Vec<usize> = vec![7, 2, 9, 0, 4, 11, 1, 8, 3, 10, 5, 6];
        let permuted_cols: Vec<Vec<f64>> = perm.iter().map(|&i| columns[i].clone()).collect();
        let permuted = EvalSet::new(
            matrix(dim, &permuted_cols),
            perm.iter().map(|&i| words[i].clone()).collect(),
            perm.iter().map(|&i| speakers[i].clone()).collect(),
        )
        .unwrap();
        let permuted_score =
            map_same_different(&permuted, RelevanceMode::SameWordAnySpeaker).unwrap();
        assert!((reference.map - permuted_score.map).abs() < 1e-12);
        assert_eq!(reference.n_queries, permuted_score.n_queries);

        let scaled_cols: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| c.iter().map(|v| v * 37.5).collect())
            .collect();
        let scaled = EvalSet::new(matrix(dim, &scaled_cols), words, speakers).unwrap();
        let scaled_score = map_same_different(&scaled, RelevanceMode::SameWordAnySpeaker).unwrap();
        assert!((reference.map - scaled_score.map).abs() < 1e-12);
    }

    #[test]
    fn shuffled_baseline_is_deterministic_and_below_a_perfect_map() {
        let set = clustered_set();
        let mode = RelevanceMode::SameWordAnySpeaker;
        let real = map_same_different(&set, mode).unwrap().map;
        let one = shuffled_baseline(&set, mode, 1, &mut Rng::new(5)).unwrap();
        let again = shuffled_baseline(&set, mode, 1, &mut Rng::new(5)).unwrap();
        assert_eq!(one, again);

        let mean = shuffled_baseline(&set, mode, 50, &mut Rng::new(6)).unwrap();
        assert!(
            mean < real,
            "shuffled labels ({mean}) should underperform true labels ({real})"
        );
        assert!(matches!(
            shuffled_baseline(&set, mode, 0, &mut Rng::new(7)),
            Err(EvalError::NoTrials)
        ));
    }

    #[test]
    fn eval_set_validates_label_lengths() {
        let x = matrix(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            EvalSet::new(x.clone(), labels(&["a"]), labels(&["s", "t"])),
            Err(EvalError::BadLabels { .. })
        ));
        let single = matrix(2, &[vec![1.0, 0.0]]);
        assert!(matches!(
            EvalSet::new(single, labels(&["a"]), labels(&["s"])),
            Err(EvalError::TooSmall(1))
        ));
    }

    #[test]
    fn report_round_trips_with_the_expected_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.json");
        let report = EvalReport {
            language: "alpha".into(),
            objective: "cse".into(),
            mode: RelevanceMode::SameWordDifferentSpeaker,
            map: 0.8125,
            n_queries: 42,
            baseline: 0.25,
        };
        write_report(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"mAP\""));
        assert!(text.contains("same-word-different-speaker"));
        assert_eq!(read_report(&path).unwrap(), report);
    }
}
