//! Word sampling from phonotactics and rendering of phone strings into
//! feature sequences.

use super::{LanguageSpec, PhoneClass, PhoneId, SpeakerModel, StressMode, SynthError};
use crate::features::FeatureSequence;
use crate::nncore::Rng;
use std::collections::BTreeSet;

const WALK_ATTEMPTS: usize = 200;
const UNIQUE_MISS_BUDGET: usize = 10_000;

/// Samples a phone string by a random walk over the bigram table. Below the
/// minimum length the walk samples conditionally on not ending; at the
/// maximum it stops. A walk fails only when some row offers no phone
/// successor while more phones are still required; after a bounded number of
/// failed walks the length range is reported unreachable.
pub fn sample_word(
    spec: &LanguageSpec,
    min_len: usize,
    max_len: usize,
    rng: &mut Rng,
) -> Result<Vec<PhoneId>, SynthError> {
    spec.validate()?;
    if min_len < 1 || max_len < min_len {
        return Err(SynthError::BadConfig(format!(
            "word length range [{min_len}, {max_len}] invalid"
        )));
    }
    let n = spec.phones.len();
    'attempt: for _ in 0..WALK_ATTEMPTS {
        let mut word: Vec<PhoneId> = Vec::with_capacity(max_len);
        let mut row = spec.transitions.from_start();
        loop {
            if word.len() == max_len {
                return Ok(word);
            }
            let choice = if word.len() < min_len {
                match rng.weighted(&row[..n]) {
                    Some(i) => i,
                    None => continue 'attempt,
                }
            } else {
                rng.weighted(row).expect("validated rows have mass")
            };
            if choice == n {
                return Ok(word);
            }
            word.push(spec.phones[choice].id);
            row = spec.transitions.from_phone(choice);
        }
    }
    Err(SynthError::UnreachableLength {
        min: min_len,
        max: max_len,
        attempts: WALK_ATTEMPTS,
    })
}

/// Collects `n` distinct phone strings, in first-seen order. Fails once the
/// sampler stops producing new words for a long stretch, which signals that
/// the inventory cannot support the requested vocabulary size.
pub fn sample_unique_words(
    spec: &LanguageSpec,
    n: usize,
    min_len: usize,
    max_len: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<PhoneId>>, SynthError> {
    let mut seen: BTreeSet<Vec<PhoneId>> = BTreeSet::new();
    let mut words = Vec::with_capacity(n);
    let mut misses = 0usize;
    while words.len() < n {
        let word = sample_word(spec, min_len, max_len, rng)?;
        if seen.insert(word.clone()) {
            words.push(word);
            misses = 0;
        } else {
            misses += 1;
            if misses >= UNIQUE_MISS_BUDGET {
                return Err(SynthError::InventoryExhausted {
                    requested: n,
                    found: words.len(),
                });
            }
        }
    }
    Ok(words)
}

/// Renders a phone string for one speaker. Each phone contributes its
/// substates in order; a substate holds its prototype row for a sampled
/// number of frames, stretched by the speaker's rate and clamped so the total
/// length stays within 0.7x to 1.3x of the nominal duration band. Under
/// free-movable stress one vowel is stressed per rendering and the remaining
/// vowels are reduced: shortened and pulled toward the language's feature
/// centroid by the reduction factor. The speaker's diagonal warp and Gaussian
/// noise are applied to every frame.
pub fn render(
    phones: &[PhoneId],
    spec: &LanguageSpec,
    speaker: &SpeakerModel,
    rng: &mut Rng,
) -> Result<FeatureSequence, SynthError> {
    spec.validate()?;
    speaker.validate(spec.k)?;
    if phones.is_empty() {
        return Err(SynthError::BadConfig("cannot render an empty word".into()));
    }
    let indexes: Vec<usize> = phones
        .iter()
        .map(|id| spec.phone_index(*id).ok_or(SynthError::UnknownPhone(*id)))
        .collect::<Result<_, _>>()?;

    let movable = spec.stress == StressMode::FreeMovable;
    let stressed = if movable {
        let vowel_positions: Vec<usize> = indexes
            .iter()
            .enumerate()
            .filter(|(_, idx)| spec.phones[**idx].class == PhoneClass::Vowel)
            .map(|(pos, _)| pos)
            .collect();
        if vowel_positions.is_empty() {
            None
        } else {
            Some(vowel_positions[rng.below(vowel_positions.len())])
        }
    } else {
        None
    };

    let centroid = spec.centroid();
    let reduction = spec.vowel_reduction;
    let mut data: Vec<f64> = Vec::new();
    for (pos, idx) in indexes.iter().enumerate() {
        let phone = &spec.phones[*idx];
        let reduced = movable
            && reduction > 0.0
            && phone.class == PhoneClass::Vowel
            && stressed != Some(pos);
        let dur_mult = speaker.rate * if reduced { 1.0 - 0.5 * reduction } else { 1.0 };
        let (dmin, dmax) = phone.duration_range;
        let lo = (0.7 * dmin as f64).ceil() as usize;
        let hi = (1.3 * dmax as f64).floor() as usize;
        for row in &phone.prototype {
            let nominal = rng.int_range(dmin, dmax) as f64;
            let frames = ((nominal * dur_mult).round() as usize).clamp(lo, hi);
            for _ in 0..frames {
                for d in 0..spec.k {
                    let mut value = if reduced {
                        (1.0 - reduction) * row[d] + reduction * centroid[d]
                    } else {
                        row[d]
                    };
                    value = speaker.scale[d] * value + speaker.offset[d];
                    if speaker.noise_sd > 0.0 {
                        value += rng.normal(0.0, speaker.noise_sd);
                    }
                    data.push(value);
                }
            }
        }
    }
    Ok(FeatureSequence::new(spec.k, data)?)
}
