//! The run configuration: one JSON document drives every subcommand.

use crate::error::CliError;
use awe_core::encoders::{Objective, TrainConfig};
use awe_core::rsa::Kernel;
use awe_core::synthlang::LanguageConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Everything a run needs: the language family, which objectives to train,
/// training hyperparameters, similarity kernels, and the global seed that
/// every stage derives its own stream from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub family: FamilyConfig,
    pub objectives: Vec<Objective>,
    /// Training hyperparameters. The `seed` field inside is ignored: each
    /// (language, objective) run derives its own seed from the global one.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_kernels")]
    pub kernels: Vec<Kernel>,
    /// Trials for the label-shuffled chance baseline in `eval`.
    #[serde(default = "default_baseline_trials")]
    pub baseline_trials: usize,
}

/// A base language plus perturbed descendants, and how to voice them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub base: LanguageConfig,
    pub derived: Vec<DerivedLanguage>,
    pub speakers: SpeakerPool,
    pub words: WordSampling,
    /// Train/validation/test speaker fractions.
    #[serde(default = "default_fractions")]
    pub fractions: (f64, f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedLanguage {
    pub id: String,
    pub perturbation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerPool {
    pub count: usize,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordSampling {
    /// Word types per language.
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Renderings of each word type per speaker.
    #[serde(default = "default_renditions")]
    pub renditions: usize,
}

fn default_kernels() -> Vec<Kernel> {
    vec![Kernel::Linear, Kernel::rbf_default()]
}

fn default_baseline_trials() -> usize {
    20
}

fn default_fractions() -> (f64, f64, f64) {
    (0.6, 0.2, 0.2)
}

fn default_noise_sd() -> f64 {
    0.05
}

fn default_renditions() -> usize {
    1
}

fn id_is_clean(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl RunConfig {
    /// Reads and validates a configuration file, applying the command-line
    /// seed and output-directory overrides.
    pub fn load(
        path: &Path,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|err| {
            CliError::config(format!("cannot read config {}: {err}", path.display()))
        })?;
        let mut config: RunConfig = serde_json::from_str(&text).map_err(|err| {
            CliError::config(format!("config {} is invalid: {err}", path.display()))
        })?;
        if let Some(seed) = seed {
            config.seed = seed;
        }
        if let Some(out) = out {
            config.output_dir = out;
        }
        config.validate()?;
        Ok(config)
    }

    /// All language ids, base first, then the derived ones in config order.
    /// This order fixes xRSM rows and the distance table everywhere.
    pub fn languages(&self) -> Vec<String> {
        std::iter::once(self.family.base.id.clone())
            .chain(self.family.derived.iter().map(|d| d.id.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::config(msg));
        if self.experiment.is_empty() {
            return bad("experiment name must not be empty".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir must not be empty".into());
        }

        let languages = self.languages();
        for id in &languages {
            if !id_is_clean(id) {
                return bad(format!(
                    "language id {id:?} must be non-empty and use only letters, digits, '-', '_'"
                ));
            }
        }
        let unique: BTreeSet<&String> = languages.iter().collect();
        if unique.len() != languages.len() {
            return bad("language ids must be unique".into());
        }
        for derived in &self.family.derived {
            if !(0.0..=1.0).contains(&derived.perturbation) {
                return bad(format!(
                    "perturbation {} for language {} must lie in [0, 1]",
                    derived.perturbation, derived.id
                ));
            }
        }

        if self.objectives.is_empty() {
            return bad("at least one objective is required".into());
        }
        let objs: BTreeSet<&'static str> = self.objectives.iter().map(|o| o.name()).collect();
        if objs.len() != self.objectives.len() {
            return bad("objectives must be unique".into());
        }

        if self.kernels.is_empty() {
            return bad("at least one kernel is required".into());
        }
        let kernel_names: BTreeSet<&'static str> =
            self.kernels.iter().map(|k| k.name()).collect();
        if kernel_names.len() != self.kernels.len() {
            return bad("kernels must be unique".into());
        }
        for kernel in &self.kernels {
            if let Kernel::Rbf { bandwidth_fraction } = kernel {
                if !(bandwidth_fraction.is_finite() && *bandwidth_fraction > 0.0) {
                    return bad(format!(
                        "rbf bandwidth fraction {bandwidth_fraction} must be positive and finite"
                    ));
                }
            }
        }

        let words = &self.family.words;
        if words.count < 2 {
            return bad("need at least 2 word types".into());
        }
        if words.min_len < 1 || words.max_len < words.min_len {
            return bad(format!(
                "word length range [{}, {}] is invalid",
                words.min_len, words.max_len
            ));
        }
        if words.renditions < 1 {
            return bad("renditions per speaker must be at least 1".into());
        }
        if self.family.speakers.count < 3 {
            return bad("need at least 3 speakers to fill three splits".into());
        }
        if !(self.family.speakers.noise_sd >= 0.0) {
            return bad("speaker noise must be non-negative".into());
        }

        let (ft, fv, fe) = self.family.fractions;
        if !(ft >= 0.0 && fv >= 0.0 && fe >= 0.0) || (ft + fv + fe - 1.0).abs() > 1e-9 {
            return bad(format!(
                "split fractions ({ft}, {fv}, {fe}) must be non-negative and sum to 1"
            ));
        }

        if self.baseline_trials == 0 {
            return bad("baseline_trials must be at least 1".into());
        }

        self.train
            .validate()
            .map_err(|err| CliError::config(err.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "experiment": "unit",
            "seed": 7,
            "output_dir": "out",
            "family": {
                "base": LanguageConfig { id: "A".into(), ..LanguageConfig::default() },
                "derived": [{"id": "B", "perturbation": 0.2}],
                "speakers": {"count": 5},
                "words": {"count": 8, "min_len": 4, "max_len": 6}
            },
            "objectives": ["pge", "cae"]
        })
    }

    fn parse(value: serde_json::Value) -> Result<RunConfig, CliError> {
        let config: RunConfig = serde_json::from_value(value)
            .map_err(|err| CliError::config(err.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    #[test]
    fn a_minimal_config_fills_in_documented_defaults() {
        let config = parse(minimal_json()).unwrap();
        assert_eq!(config.languages(), vec!["A", "B"]);
        assert_eq!(config.family.fractions, (0.6, 0.2, 0.2));
        assert_eq!(config.family.words.renditions, 1);
        assert_eq!(config.kernels.len(), 2);
        assert_eq!(config.baseline_trials, 20);
        assert_eq!(config.train.epochs, 30);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_config_errors() {
        let mut with_typo = minimal_json();
        with_typo["familee"] = serde_json::json!({});
        assert!(parse(with_typo).is_err());

        let mut dup = minimal_json();
        dup["family"]["derived"] = serde_json::json!([{"id": "A", "perturbation": 0.5}]);
        assert!(parse(dup).unwrap_err().message.contains("unique"));

        let mut bad_p = minimal_json();
        bad_p["family"]["derived"] = serde_json::json!([{"id": "B", "perturbation": 1.5}]);
        assert!(parse(bad_p).unwrap_err().message.contains("[0, 1]"));

        let mut bad_id = minimal_json();
        bad_id["family"]["derived"] = serde_json::json!([{"id": "b/../c", "perturbation": 0.5}]);
        assert!(parse(bad_id).is_err());

        let mut no_obj = minimal_json();
        no_obj["objectives"] = serde_json::json!([]);
        assert!(parse(no_obj).is_err());

        let mut dup_kernel = minimal_json();
        dup_kernel["kernels"] = serde_json::json!([
            {"kind": "rbf", "bandwidth_fraction": 0.5},
            {"kind": "rbf", "bandwidth_fraction": 0.9}
        ]);
        assert!(parse(dup_kernel).unwrap_err().message.contains("unique"));

        let mut bad_fraction = minimal_json();
        bad_fraction["family"]["fractions"] = serde_json::json!([0.5, 0.5, 0.5]);
        assert!(parse(bad_fraction).unwrap_err().message.contains("sum to 1"));
    }

    #[test]
    fn command_line_overrides_replace_seed_and_output_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, serde_json::to_string(&minimal_json()).unwrap()).unwrap();

        let config = RunConfig::load(&path, Some(99), Some(PathBuf::from("elsewhere"))).unwrap();
        assert_eq!(config.seed, 99);
        assert_eq!(config.output_dir, PathBuf::from("elsewhere"));

        let untouched = RunConfig::load(&path, None, None).unwrap();
        assert_eq!(untouched.seed, 7);
    }

    #[test]
    fn missing_config_file_is_a_config_error() {
        let err = RunConfig::load(Path::new("no-such-config.json"), None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
