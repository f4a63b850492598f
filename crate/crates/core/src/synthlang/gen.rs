//! Language and speaker generation, graded derivation, and the ground-truth
//! distance between two languages.

use super::{
    lang_rng, Gender, LanguageConfig, LanguageSpec, Phone, PhoneClass, PhoneId, SpeakerModel,
    SynthError, TransitionTable, RATE_RANGE,
};
use crate::nncore::Rng;
use std::collections::BTreeSet;

/// Draws a fresh language from the configured family shape.
pub fn generate_language(config: &LanguageConfig, rng: &Rng) -> Result<LanguageSpec, SynthError> {
    if config.n_phones < 2 {
        return Err(SynthError::BadConfig(
            "need at least two phones".into(),
        ));
    }
    if config.n_vowels == 0 || config.n_vowels >= config.n_phones {
        return Err(SynthError::BadConfig(format!(
            "need 1..{} vowels, got {}",
            config.n_phones - 1,
            config.n_vowels
        )));
    }
    if !(config.proto_sd > 0.0) {
        return Err(SynthError::BadConfig(
            "prototype spread must be positive".into(),
        ));
    }
    if !(0.0 < config.end_prob && config.end_prob < 1.0) {
        return Err(SynthError::BadConfig(format!(
            "end probability {} outside (0,1)",
            config.end_prob
        )));
    }
    if !(0.0..=0.9).contains(&config.forbidden_bigram_prob) {
        return Err(SynthError::BadConfig(format!(
            "forbidden bigram probability {} outside [0, 0.9]",
            config.forbidden_bigram_prob
        )));
    }

    let mut proto_rng = lang_rng(rng, "prototypes");
    let phones = (0..config.n_phones)
        .map(|i| Phone {
            id: PhoneId(i as u32),
            class: if i < config.n_vowels {
                PhoneClass::Vowel
            } else {
                PhoneClass::Consonant
            },
            prototype: random_prototype(
                config.substates,
                config.k,
                config.proto_sd,
                &mut proto_rng,
            ),
            duration_range: config.duration_range,
        })
        .collect();

    let transitions = random_transitions(
        config.n_phones,
        config.end_prob,
        config.forbidden_bigram_prob,
        &mut lang_rng(rng, "phonotactics"),
    );

    let spec = LanguageSpec {
        id: config.id.clone(),
        k: config.k,
        substates: config.substates,
        phones,
        transitions,
        stress: config.stress,
        vowel_reduction: config.vowel_reduction,
        proto_sd: config.proto_sd,
    };
    spec.validate()?;
    Ok(spec)
}

fn random_prototype(substates: usize, k: usize, sd: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..substates)
        .map(|_| (0..k).map(|_| rng.normal(0.0, sd)).collect())
        .collect()
}

/// Random bigram table: start row spreads mass over phones only, phone rows
/// reserve `end_prob` for the end state and may forbid individual bigrams.
/// Every row keeps at least one positive phone transition, so words of any
/// minimum length stay reachable.
fn random_transitions(
    n_phones: usize,
    end_prob: f64,
    forbidden_prob: f64,
    rng: &mut Rng,
) -> TransitionTable {
    let width = n_phones + 1;
    let mut rows = vec![0.0; width * width];

    {
        let start = &mut rows[0..width];
        for cell in start.iter_mut().take(n_phones) {
            *cell = rng.uniform(0.2, 1.0);
        }
        normalize_to(&mut start[..n_phones], 1.0);
    }

    for r in 1..width {
        let row = &mut rows[r * width..(r + 1) * width];
        for cell in row.iter_mut().take(n_phones) {
            *cell = if rng.unit() < forbidden_prob {
                0.0
            } else {
                rng.uniform(0.2, 1.0)
            };
        }
        if row[..n_phones].iter().all(|v| *v == 0.0) {
            row[rng.below(n_phones)] = 1.0;
        }
        normalize_to(&mut row[..n_phones], 1.0 - end_prob);
        row[n_phones] = end_prob;
    }

    TransitionTable::new(n_phones, rows).expect("constructed rows are stochastic")
}

fn normalize_to(values: &mut [f64], total: f64) {
    let sum: f64 = values.iter().sum();
    for v in values {
        *v *= total / sum;
    }
}

/// Draws a panel of speakers with alternating genders, mild diagonal warps,
/// and rates inside the renderer's supported band.
pub fn generate_speakers(
    n: usize,
    k: usize,
    noise_sd: f64,
    rng: &Rng,
) -> Result<Vec<SpeakerModel>, SynthError> {
    if n == 0 || k == 0 {
        return Err(SynthError::BadConfig(
            "need at least one speaker and one feature dimension".into(),
        ));
    }
    if !(noise_sd >= 0.0) {
        return Err(SynthError::BadConfig(
            "noise level must be non-negative".into(),
        ));
    }
    let mut speakers = Vec::with_capacity(n);
    for i in 0..n {
        let mut child = rng.derive_indexed("speaker", i as u64);
        let speaker = SpeakerModel {
            id: format!("s{i:02}"),
            gender: if i % 2 == 0 {
                Gender::Female
            } else {
                Gender::Male
            },
            scale: (0..k).map(|_| child.normal(0.0, 0.12).exp()).collect(),
            offset: (0..k).map(|_| child.normal(0.0, 0.25)).collect(),
            rate: child.uniform(RATE_RANGE.0, RATE_RANGE.1),
            noise_sd,
        };
        speaker.validate(k)?;
        speakers.push(speaker);
    }
    Ok(speakers)
}

/// Produces a relative of `base`. Every kept prototype is interpolated toward
/// a fresh random trajectory by `perturbation` (variance preserved by the
/// 1/sqrt((1-p)² + p²) correction), a fraction ≈ `perturbation` of phones is
/// replaced outright under fresh ids, and phonotactic rows are mixed with a
/// fresh random table by the same factor. Perturbation 0 returns `base`
/// unchanged; 1 yields an unrelated language with empty id overlap.
pub fn derive_language(
    base: &LanguageSpec,
    perturbation: f64,
    rng: &Rng,
) -> Result<LanguageSpec, SynthError> {
    base.validate()?;
    if !(0.0..=1.0).contains(&perturbation) {
        return Err(SynthError::BadPerturbation(perturbation));
    }
    if perturbation == 0.0 {
        return Ok(base.clone());
    }
    let p = perturbation;
    let keep_scale = 1.0 / ((1.0 - p) * (1.0 - p) + p * p).sqrt();
    let mut next_id = base.phones.iter().map(|ph| ph.id.0).max().unwrap_or(0) + 1;

    let mut proto_rng = lang_rng(rng, "derive-prototypes");
    let mut choice_rng = lang_rng(rng, "derive-choices");
    let phones: Vec<Phone> = base
        .phones
        .iter()
        .map(|phone| {
            if choice_rng.unit() < p {
                let id = PhoneId(next_id);
                next_id += 1;
                Phone {
                    id,
                    class: phone.class,
                    prototype: random_prototype(
                        base.substates,
                        base.k,
                        base.proto_sd,
                        &mut proto_rng,
                    ),
                    duration_range: phone.duration_range,
                }
            } else {
                let prototype = phone
                    .prototype
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|v| {
                                let fresh = proto_rng.normal(0.0, base.proto_sd);
                                ((1.0 - p) * v + p * fresh) * keep_scale
                            })
                            .collect()
                    })
                    .collect();
                Phone {
                    id: phone.id,
                    class: phone.class,
                    prototype,
                    duration_range: phone.duration_range,
                }
            }
        })
        .collect();

    let fresh = random_transitions(
        base.phones.len(),
        mean_end_mass(base),
        forbidden_fraction(base).min(0.9),
        &mut lang_rng(rng, "derive-phonotactics"),
    );
    let width = base.phones.len() + 1;
    let mut rows: Vec<f64> = base
        .transitions
        .rows_flat()
        .iter()
        .zip(fresh.rows_flat())
        .map(|(a, b)| (1.0 - p) * a + p * b)
        .collect();
    for r in 0..width {
        normalize_to(&mut rows[r * width..(r + 1) * width], 1.0);
    }
    let transitions = TransitionTable::new(base.phones.len(), rows)?;

    let spec = LanguageSpec {
        id: format!("{}~{p:.2}", base.id),
        k: base.k,
        substates: base.substates,
        phones,
        transitions,
        stress: base.stress,
        vowel_reduction: base.vowel_reduction,
        proto_sd: base.proto_sd,
    };
    spec.validate()?;
    Ok(spec)
}

fn mean_end_mass(spec: &LanguageSpec) -> f64 {
    let n = spec.phones.len();
    let sum: f64 = (0..n)
        .map(|i| spec.transitions.from_phone(i)[n])
        .sum();
    (sum / n as f64).clamp(0.01, 0.99)
}

fn forbidden_fraction(spec: &LanguageSpec) -> f64 {
    let n = spec.phones.len();
    let mut zero = 0usize;
    for i in 0..n {
        zero += spec.transitions.from_phone(i)[..n]
            .iter()
            .filter(|v| **v == 0.0)
            .count();
    }
    zero as f64 / (n * n) as f64
}

/// Ground-truth dissimilarity of two languages: mean prototype distance over
/// id-matched phones, plus the unmatched inventory fraction scaled to a full
/// prototype gap, plus the mean phonotactic difference over comparable cells.
/// Symmetric, and zero exactly for identical specs.
pub fn language_distance(a: &LanguageSpec, b: &LanguageSpec) -> Result<f64, SynthError> {
    a.validate()?;
    b.validate()?;
    if a.k != b.k {
        return Err(SynthError::IncompatibleDims {
            what: "feature dimension",
            expected: a.k,
            got: b.k,
        });
    }
    if a.substates != b.substates {
        return Err(SynthError::IncompatibleDims {
            what: "substates",
            expected: a.substates,
            got: b.substates,
        });
    }

    let ids_a: BTreeSet<PhoneId> = a.phones.iter().map(|p| p.id).collect();
    let ids_b: BTreeSet<PhoneId> = b.phones.iter().map(|p| p.id).collect();
    let matched: Vec<PhoneId> = ids_a.intersection(&ids_b).copied().collect();

    let proto_term = if matched.is_empty() {
        0.0
    } else {
        matched
            .iter()
            .map(|id| {
                let pa = &a.phones[a.phone_index(*id).expect("matched id")].prototype;
                let pb = &b.phones[b.phone_index(*id).expect("matched id")].prototype;
                pa.iter()
                    .flatten()
                    .zip(pb.iter().flatten())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / matched.len() as f64
    };

    let unmatched = (ids_a.len() - matched.len()) + (ids_b.len() - matched.len());
    let unmatched_frac = unmatched as f64 / (ids_a.len() + ids_b.len()) as f64;
    let gap_scale =
        (2.0 * (a.substates * a.k) as f64).sqrt() * 0.5 * (a.proto_sd + b.proto_sd);
    let inventory_term = unmatched_frac * gap_scale;

    let phonotactic_term = transition_l1(a, b, &matched);

    Ok(proto_term + inventory_term + phonotactic_term)
}

/// Mean absolute difference between transition probabilities over cells both
/// languages can express: rows {start} ∪ matched phones, columns matched
/// phones ∪ {end}, with each id looked up at its own index per language.
fn transition_l1(a: &LanguageSpec, b: &LanguageSpec, matched: &[PhoneId]) -> f64 {
    let na = a.phones.len();
    let nb = b.phones.len();
    let row_pairs: Vec<(&[f64], &[f64])> = std::iter::once((
        a.transitions.from_start(),
        b.transitions.from_start(),
    ))
    .chain(matched.iter().map(|id| {
        (
            a.transitions
                .from_phone(a.phone_index(*id).expect("matched id")),
            b.transitions
                .from_phone(b.phone_index(*id).expect("matched id")),
        )
    }))
    .collect();

    let mut total = 0.0;
    let mut cells = 0usize;
    for (ra, rb) in row_pairs {
        for id in matched {
            let ca = a.phone_index(*id).expect("matched id");
            let cb = b.phone_index(*id).expect("matched id");
            total += (ra[ca] - rb[cb]).abs();
            cells += 1;
        }
        total += (ra[na] - rb[nb]).abs();
        cells += 1;
    }
    if cells == 0 {
        0.0
    } else {
        total / cells as f64
    }
}
