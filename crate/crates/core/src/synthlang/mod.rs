//! Families of small artificial languages with controllable typological
//! distance, and a renderer that turns phone strings into feature sequences.
//!
//! A language is a phone inventory (each phone a short prototype trajectory
//! through feature space), bigram phonotactics over the inventory, a stress
//! mode, and a vowel-reduction factor. Speakers are affine warps of feature
//! space plus a speaking rate and a noise level. Deriving a language from a
//! base with a perturbation knob moves prototypes, swaps out inventory, and
//! re-mixes phonotactics, giving graded "relatedness" with known ground
//! truth.

mod gen;
mod speech;

pub use gen::{derive_language, generate_language, generate_speakers, language_distance};
pub use speech::{render, sample_unique_words, sample_word};

use crate::nncore::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Stable identity of a phone across derived languages. Derivation keeps ids
/// of retained phones and mints fresh ids for replacements, so id overlap is
/// the ground-truth measure of shared inventory.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct PhoneId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhoneClass {
    Vowel,
    Consonant,
}

/// One phone: a prototype trajectory of `substates` rows in feature space and
/// a per-substate duration range in frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phone {
    pub id: PhoneId,
    pub class: PhoneClass,
    /// `substates` rows, each of the language's feature dimension.
    pub prototype: Vec<Vec<f64>>,
    /// Inclusive frames-per-substate range `[dmin, dmax]`, `dmin ≥ 1`.
    pub duration_range: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StressMode {
    FixedInitial,
    FixedPenultimate,
    FreeMovable,
}

/// Bigram phonotactics over `n` phones plus word-start and word-end states.
/// Row 0 is the start state; row `1+i` is phone index `i`. Column `j < n` is
/// phone index `j`; column `n` is the end state. Every row is a probability
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    n_phones: usize,
    rows: Vec<f64>,
}

impl TransitionTable {
    pub fn new(n_phones: usize, rows: Vec<f64>) -> Result<Self, SynthError> {
        let width = n_phones + 1;
        if rows.len() != width * width {
            return Err(SynthError::BadConfig(format!(
                "transition table needs {}x{} entries, got {}",
                width,
                width,
                rows.len()
            )));
        }
        let table = Self { n_phones, rows };
        table.validate()?;
        Ok(table)
    }

    pub fn n_phones(&self) -> usize {
        self.n_phones
    }

    /// Outgoing distribution of the start state (final column is end mass).
    pub fn from_start(&self) -> &[f64] {
        self.row(0)
    }

    /// Outgoing distribution of phone index `i`.
    pub fn from_phone(&self, i: usize) -> &[f64] {
        self.row(1 + i)
    }

    fn row(&self, r: usize) -> &[f64] {
        let width = self.n_phones + 1;
        &self.rows[r * width..(r + 1) * width]
    }

    pub(crate) fn rows_flat(&self) -> &[f64] {
        &self.rows
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let width = self.n_phones + 1;
        for r in 0..width {
            let row = self.row(r);
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(SynthError::BadConfig(format!(
                    "transition row {r} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(SynthError::BadConfig(format!(
                    "transition row {r} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// A full language description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSpec {
    pub id: String,
    /// Feature dimension of prototypes and rendered frames.
    pub k: usize,
    /// Sub-states per phone (onset / steady / offset when 3).
    pub substates: usize,
    pub phones: Vec<Phone>,
    pub transitions: TransitionTable,
    pub stress: StressMode,
    /// Vowel-reduction factor in [0,1]; active only under free-movable
    /// stress.
    pub vowel_reduction: f64,
    /// Prototype magnitude used at generation time; derivation reuses it so
    /// replacement phones match the family's scale.
    pub proto_sd: f64,
}

impl LanguageSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.k == 0 || self.substates == 0 {
            return Err(SynthError::BadConfig(
                "feature dimension and substates must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.vowel_reduction) {
            return Err(SynthError::BadConfig(format!(
                "vowel reduction {} outside [0,1]",
                self.vowel_reduction
            )));
        }
        let mut vowels = 0usize;
        let mut consonants = 0usize;
        for phone in &self.phones {
            match phone.class {
                PhoneClass::Vowel => vowels += 1,
                PhoneClass::Consonant => consonants += 1,
            }
            if phone.prototype.len() != self.substates
                || phone.prototype.iter().any(|row| row.len() != self.k)
            {
                return Err(SynthError::BadConfig(format!(
                    "phone {:?} prototype is not {}x{}",
                    phone.id, self.substates, self.k
                )));
            }
            if phone
                .prototype
                .iter()
                .flatten()
                .any(|v| !v.is_finite())
            {
                return Err(SynthError::BadConfig(format!(
                    "phone {:?} prototype has non-finite entries",
                    phone.id
                )));
            }
            let (dmin, dmax) = phone.duration_range;
            if dmin < 1 || dmax < dmin {
                return Err(SynthError::BadConfig(format!(
                    "phone {:?} duration range [{dmin}, {dmax}] invalid",
                    phone.id
                )));
            }
        }
        if vowels == 0 || consonants == 0 {
            return Err(SynthError::BadConfig(
                "inventory needs at least one vowel and one consonant".into(),
            ));
        }
        if self.transitions.n_phones() != self.phones.len() {
            return Err(SynthError::BadConfig(format!(
                "transition table covers {} phones, inventory has {}",
                self.transitions.n_phones(),
                self.phones.len()
            )));
        }
        self.transitions.validate()
    }

    pub fn phone_index(&self, id: PhoneId) -> Option<usize> {
        self.phones.iter().position(|p| p.id == id)
    }

    /// Mean of all prototype rows: the neutral target that reduced vowels are
    /// pulled toward.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.k];
        let mut rows = 0usize;
        for phone in &self.phones {
            for row in &phone.prototype {
                for (cv, v) in c.iter_mut().zip(row) {
                    *cv += v;
                }
                rows += 1;
            }
        }
        for cv in &mut c {
            *cv /= rows as f64;
        }
        c
    }

    /// Fraction of `base`'s phone ids still present here.
    pub fn inventory_overlap(&self, base: &LanguageSpec) -> f64 {
        if base.phones.is_empty() {
            return 0.0;
        }
        let kept = base
            .phones
            .iter()
            .filter(|p| self.phone_index(p.id).is_some())
            .count();
        kept as f64 / base.phones.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

/// A speaker: diagonal affine warp of feature space, speaking rate, noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerModel {
    pub id: String,
    pub gender: Gender,
    /// Per-dimension multiplicative warp, all entries > 0.
    pub scale: Vec<f64>,
    /// Per-dimension additive shift.
    pub offset: Vec<f64>,
    /// Duration multiplier in [0.7, 1.3].
    pub rate: f64,
    /// Standard deviation of per-frame Gaussian noise.
    pub noise_sd: f64,
}

impl SpeakerModel {
    pub fn validate(&self, k: usize) -> Result<(), SynthError> {
        if self.scale.len() != k || self.offset.len() != k {
            return Err(SynthError::IncompatibleDims {
                what: "speaker warp",
                expected: k,
                got: self.scale.len(),
            });
        }
        if self.scale.iter().any(|v| !(*v > 0.0)) {
            return Err(SynthError::BadConfig(format!(
                "speaker {} has a non-positive scale entry",
                self.id
            )));
        }
        if !(0.7..=1.3).contains(&self.rate) {
            return Err(SynthError::BadConfig(format!(
                "speaker {} rate {} outside [0.7, 1.3]",
                self.id, self.rate
            )));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(SynthError::BadConfig(format!(
                "speaker {} noise level must be non-negative",
                self.id
            )));
        }
        Ok(())
    }
}

/// Knobs for generating a base language.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LanguageConfig {
    pub id: String,
    pub k: usize,
    pub n_phones: usize,
    pub n_vowels: usize,
    pub substates: usize,
    pub duration_range: (usize, usize),
    pub stress: StressMode,
    pub vowel_reduction: f64,
    /// Prototype entries are drawn from N(0, proto_sd²).
    pub proto_sd: f64,
    /// End-state mass of every phone row in the phonotactics.
    pub end_prob: f64,
    /// Probability that a phone-to-phone bigram is forbidden outright.
    pub forbidden_bigram_prob: f64,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        Self {
            id: "lang".into(),
            k: 39,
            n_phones: 16,
            n_vowels: 5,
            substates: 3,
            duration_range: (1, 2),
            stress: StressMode::FreeMovable,
            vowel_reduction: 0.5,
            proto_sd: 1.5,
            end_prob: 0.15,
            forbidden_bigram_prob: 0.2,
        }
    }
}

/// Errors from language generation, sampling, and rendering.
#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("perturbation {0} outside [0,1]")]
    BadPerturbation(f64),
    #[error("incompatible {what}: expected dimension {expected}, got {got}")]
    IncompatibleDims {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("phone {0:?} is not in the language inventory")]
    UnknownPhone(PhoneId),
    #[error("could not sample a word of length {min}..={max} after {attempts} attempts")]
    UnreachableLength {
        min: usize,
        max: usize,
        attempts: usize,
    },
    #[error("could not find {requested} distinct words (found {found})")]
    InventoryExhausted { requested: usize, found: usize },
    #[error("unsupported language file schema version {0}")]
    UnsupportedSchema(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("language file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
}

#[derive(Serialize, Deserialize)]
struct LanguageFile {
    schema_version: u32,
    language: LanguageSpec,
}

#[derive(Serialize, Deserialize)]
struct SpeakersFile {
    schema_version: u32,
    speakers: Vec<SpeakerModel>,
}

const SCHEMA_VERSION: u32 = 1;

pub fn write_language_json(path: &Path, spec: &LanguageSpec) -> Result<(), SynthError> {
    let file = LanguageFile {
        schema_version: SCHEMA_VERSION,
        language: spec.clone(),
    };
    std::fs::write(path, serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

pub fn read_language_json(path: &Path) -> Result<LanguageSpec, SynthError> {
    let file: LanguageFile = serde_json::from_slice(&std::fs::read(path)?)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(SynthError::UnsupportedSchema(file.schema_version));
    }
    file.language.validate()?;
    Ok(file.language)
}

pub fn write_speakers_json(path: &Path, speakers: &[SpeakerModel]) -> Result<(), SynthError> {
    let file = SpeakersFile {
        schema_version: SCHEMA_VERSION,
        speakers: speakers.to_vec(),
    };
    std::fs::write(path, serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

pub fn read_speakers_json(path: &Path) -> Result<Vec<SpeakerModel>, SynthError> {
    let file: SpeakersFile = serde_json::from_slice(&std::fs::read(path)?)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(SynthError::UnsupportedSchema(file.schema_version));
    }
    Ok(file.speakers)
}

/// Speaker attribute generation bounds, shared by `generate_speakers` and its
/// tests.
pub(crate) const RATE_RANGE: (f64, f64) = (0.8, 1.25);

/// Derives a deterministic per-purpose child generator for language work.
pub(crate) fn lang_rng(rng: &Rng, purpose: &str) -> Rng {
    rng.derive(purpose)
}
