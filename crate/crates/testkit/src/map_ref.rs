//! Brute-force mean average precision for same/different word discrimination.

/// Relevance regime for a query item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMode {
    /// Any other instance of the query's word type is relevant.
    SameWordAnySpeaker,
    /// Only instances of the word from other speakers are relevant; instances
    /// of the word by the query's own speaker leave the ranking entirely.
    SameWordDifferentSpeaker,
}

/// Cosine distance (1 − cos)/2 computed with plain loops.
pub fn cosine_distance_ref(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (1.0 - dot / (na * nb)) / 2.0
}

/// Mean average precision over all queries that have at least one relevant
/// item, computed by exhaustively ranking every candidate for every query.
/// Returns `None` when no query has any relevant item.
pub fn brute_force_map(
    embeddings: &[Vec<f64>],
    words: &[usize],
    speakers: &[usize],
    mode: RefMode,
) -> Option<f64> {
    let n = embeddings.len();
    assert_eq!(words.len(), n);
    assert_eq!(speakers.len(), n);
    let mut ap_sum = 0.0;
    let mut queries = 0usize;
    for q in 0..n {
        let mut ranked: Vec<(f64, usize, bool)> = Vec::new();
        for c in 0..n {
            if c == q {
                continue;
            }
            let same_word = words[c] == words[q];
            let same_speaker = speakers[c] == speakers[q];
            let relevant = match mode {
                RefMode::SameWordAnySpeaker => same_word,
                RefMode::SameWordDifferentSpeaker => {
                    if same_word && same_speaker {
                        continue;
                    }
                    same_word
                }
            };
            ranked.push((cosine_distance_ref(&embeddings[q], &embeddings[c]), c, relevant));
        }
        let total_relevant = ranked.iter().filter(|r| r.2).count();
        if total_relevant == 0 {
            continue;
        }
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (rank0, item) in ranked.iter().enumerate() {
            if item.2 {
                hits += 1;
                ap += hits as f64 / (rank0 + 1) as f64;
            }
        }
        ap_sum += ap / total_relevant as f64;
        queries += 1;
    }
    (queries > 0).then(|| ap_sum / queries as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation_gives_one() {
        let embeddings = vec![
            vec![1.0, 0.0],
            vec![0.9, 0.1],
            vec![0.0, 1.0],
            vec![0.1, 0.9],
        ];
        let words = vec![0, 0, 1, 1];
        let speakers = vec![0, 1, 0, 1];
        let map = brute_force_map(&embeddings, &words, &speakers, RefMode::SameWordAnySpeaker);
        assert_eq!(map, Some(1.0));
    }

    #[test]
    fn worked_average_precision() {
        // Unit vectors at angles 0°, 10°, 22°, 40°; cosine distance is
        // monotone in angle gap. Words: {A,B,D} share a type, C is alone.
        //   query A: relevant at ranks 1,3          → AP 5/6
        //   query B: relevant at ranks 1,3          → AP 5/6
        //   query C: no relevant item, skipped
        //   query D: relevant at ranks 2,3          → AP (1/2 + 2/3)/2 = 7/12
        // mAP = (5/6 + 5/6 + 7/12)/3 = 3/4.
        let at = |deg: f64| {
            let r = deg.to_radians();
            vec![r.cos(), r.sin()]
        };
        let embeddings = vec![at(0.0), at(10.0), at(22.0), at(40.0)];
        let words = vec![0, 0, 1, 0];
        let speakers = vec![0, 1, 2, 3];
        let map = brute_force_map(&embeddings, &words, &speakers, RefMode::SameWordAnySpeaker)
            .unwrap();
        assert!((map - 0.75).abs() < 1e-12, "mAP {map}");
    }

    #[test]
    fn different_speaker_mode_drops_own_repeats() {
        // Two instances of word 0 by speaker 0: with the different-speaker
        // regime each query of word 0 ranks only the other speaker's item.
        let embeddings = vec![vec![1.0, 0.0], vec![1.0, 0.01], vec![0.5, 0.5]];
        let words = vec![0, 0, 0];
        let speakers = vec![0, 0, 1];
        let map = brute_force_map(
            &embeddings,
            &words,
            &speakers,
            RefMode::SameWordDifferentSpeaker,
        )
        .unwrap();
        // Every query has exactly one relevant item ranked first.
        assert_eq!(map, 1.0);
    }

    #[test]
    fn no_relevant_items_anywhere_is_none() {
        let embeddings = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let words = vec![0, 1];
        let speakers = vec![0, 0];
        assert_eq!(
            brute_force_map(&embeddings, &words, &speakers, RefMode::SameWordAnySpeaker),
            None
        );
    }
}
