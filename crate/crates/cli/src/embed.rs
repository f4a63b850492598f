//! Embedding stage: runs trained encoders over held-out stimuli, including
//! stimuli from languages the encoder never saw, and stores the matrices.

use crate::artifacts::Layout;
use crate::config::RunConfig;
use crate::data::{load_corpus, load_features, split_stimuli};
use crate::error::CliError;
use crate::train::narrow;
use awe_core::corpus::Split;
use awe_core::encoders::{embed_set, read_checkpoint, write_embedding_matrix, EncoderModel, Objective};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct EmbedOutcome {
    pub stimuli: String,
    pub encoder: String,
    pub objective: &'static str,
    pub segments: usize,
    pub dim: usize,
}

/// Loads a checkpoint, failing with a data error that names the missing file.
pub fn load_encoder(
    layout: &Layout,
    language: &str,
    objective: Objective,
) -> Result<EncoderModel, CliError> {
    let path = layout.checkpoint(language, objective);
    if !path.exists() {
        return Err(CliError::data(format!(
            "missing checkpoint at {}; run the train stage first",
            path.display()
        )));
    }
    let (model, _) = read_checkpoint(&path)?;
    if model.language != language || model.objective != objective {
        return Err(CliError::data(format!(
            "checkpoint {} holds a {} encoder for {}, expected {} for {}",
            path.display(),
            model.objective,
            model.language,
            objective,
            language
        )));
    }
    Ok(model)
}

pub fn run_embed(
    config: &RunConfig,
    stimuli: Option<&String>,
    encoder: Option<&String>,
    objective: Option<Objective>,
) -> Result<Vec<EmbedOutcome>, CliError> {
    let layout = Layout::new(&config.output_dir);
    let all = config.languages();
    let stimuli_languages = narrow(&all, stimuli, "stimuli language")?;
    let encoder_languages = narrow(&all, encoder, "encoder language")?;
    let objectives = narrow(&config.objectives, objective.as_ref(), "objective")?;
    std::fs::create_dir_all(layout.embeddings_dir())?;

    let mut outcomes = Vec::new();
    for stim_lang in &stimuli_languages {
        let corpus = load_corpus(&layout, stim_lang)?;
        let file = load_features(&layout, stim_lang)?;
        let stims = split_stimuli(&corpus, &file, Split::Test)?;
        for enc_lang in &encoder_languages {
            for &obj in &objectives {
                let model = load_encoder(&layout, enc_lang, obj)?;
                let matrix = embed_set(&model, &stims, stim_lang)?;
                write_embedding_matrix(&layout.embedding(stim_lang, enc_lang, obj), &matrix)?;
                outcomes.push(EmbedOutcome {
                    stimuli: stim_lang.clone(),
                    encoder: enc_lang.clone(),
                    objective: obj.name(),
                    segments: matrix.len(),
                    dim: matrix.dim,
                });
            }
        }
    }
    Ok(outcomes)
}
