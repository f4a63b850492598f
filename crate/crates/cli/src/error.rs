//! Process-level errors. Every failure carries an exit category: 2 for
//! configuration problems, 3 for missing or corrupt data, 4 for numeric
//! failures during training.

use awe_core::cluster::ClusterError;
use awe_core::corpus::CorpusError;
use awe_core::encoders::EncoderError;
use awe_core::eval::EvalError;
use awe_core::features::FeatureError;
use awe_core::rsa::RsaError;
use awe_core::synthlang::SynthError;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Numeric,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Data => 3,
            Category::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            category: Category::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            category: Category::Data,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            category: Category::Numeric,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }
}

impl From<SynthError> for CliError {
    fn from(err: SynthError) -> Self {
        match &err {
            SynthError::BadConfig(_) | SynthError::BadPerturbation(_) => {
                CliError::config(err.to_string())
            }
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(err: CorpusError) -> Self {
        match &err {
            CorpusError::BadFractions(_) => CliError::config(err.to_string()),
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(err: FeatureError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<EncoderError> for CliError {
    fn from(err: EncoderError) -> Self {
        match &err {
            EncoderError::BadConfig(_) => CliError::config(err.to_string()),
            EncoderError::NumericFailure { .. } => CliError::numeric(err.to_string()),
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> Self {
        match &err {
            EvalError::NoTrials => CliError::config(err.to_string()),
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<RsaError> for CliError {
    fn from(err: RsaError) -> Self {
        match &err {
            RsaError::BadBandwidth(_) => CliError::config(err.to_string()),
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<ClusterError> for CliError {
    fn from(err: ClusterError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::data(err.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_map_to_the_documented_exit_codes() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::data("x").exit_code(), 3);
        assert_eq!(CliError::numeric("x").exit_code(), 4);
    }

    #[test]
    fn core_errors_land_in_the_right_category() {
        let numeric: CliError = EncoderError::NumericFailure {
            epoch: 1,
            batch: 2,
            message: "loss is NaN".into(),
        }
        .into();
        assert_eq!(numeric.category, Category::Numeric);

        let config: CliError = EncoderError::BadConfig("epochs".into()).into();
        assert_eq!(config.category, Category::Config);

        let data: CliError = EncoderError::BadFile("truncated".into()).into();
        assert_eq!(data.category, Category::Data);

        let synth_config: CliError = SynthError::BadPerturbation(3.0).into();
        assert_eq!(synth_config.category, Category::Config);
    }
}
