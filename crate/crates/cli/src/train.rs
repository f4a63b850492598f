//! Training stage: fits one encoder per requested (language, objective) pair
//! and writes checkpoints plus per-epoch histories.

use crate::artifacts::Layout;
use crate::config::RunConfig;
use crate::data::{features_map, load_corpus, load_features};
use crate::error::CliError;
use awe_core::encoders::{train, write_checkpoint, Objective};
use awe_core::nncore::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub language: String,
    pub objective: &'static str,
    pub epochs: usize,
    pub best_val_map: f64,
    pub final_train_loss: f64,
}

/// Restricts `all` to one value when a filter is given, rejecting values the
/// configuration does not know about.
pub fn narrow<T: Clone + PartialEq + std::fmt::Display>(
    all: &[T],
    wanted: Option<&T>,
    what: &str,
) -> Result<Vec<T>, CliError> {
    match wanted {
        None => Ok(all.to_vec()),
        Some(value) if all.contains(value) => Ok(vec![value.clone()]),
        Some(value) => Err(CliError::config(format!(
            "{what} {value} is not part of this experiment"
        ))),
    }
}

/// The seed handed to the trainer for one (language, objective) run; every
/// run gets its own stream derived from the experiment seed.
pub fn train_seed(experiment_seed: u64, language: &str, objective: Objective) -> u64 {
    Rng::new(experiment_seed)
        .derive("train")
        .derive(language)
        .derive(objective.name())
        .next_u64()
}

pub fn run_train(
    config: &RunConfig,
    language: Option<&String>,
    objective: Option<Objective>,
) -> Result<Vec<TrainOutcome>, CliError> {
    let layout = Layout::new(&config.output_dir);
    let languages = narrow(&config.languages(), language, "language")?;
    let objectives = narrow(&config.objectives, objective.as_ref(), "objective")?;
    std::fs::create_dir_all(layout.checkpoints_dir())?;

    let mut outcomes = Vec::new();
    for lang in &languages {
        let corpus = load_corpus(&layout, lang)?;
        let file = load_features(&layout, lang)?;
        let features = features_map(&corpus, &file)?;
        for &obj in &objectives {
            let mut tc = config.train.clone();
            tc.seed = train_seed(config.seed, lang, obj);
            let (model, history) = train(obj, &corpus, &features, &tc)?;
            write_checkpoint(
                &layout.checkpoint(lang, obj),
                &model,
                &serde_json::to_value(&tc)?,
            )?;
            let mut text = serde_json::to_string_pretty(&history)?;
            text.push('\n');
            std::fs::write(layout.history(lang, obj), text)?;

            let best = history
                .iter()
                .map(|e| e.val_map)
                .fold(f64::NEG_INFINITY, f64::max);
            outcomes.push(TrainOutcome {
                language: lang.clone(),
                objective: obj.name(),
                epochs: history.len(),
                best_val_map: best,
                final_train_loss: history.last().map(|e| e.train_loss).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narrowing_rejects_values_outside_the_experiment() {
        let all = vec!["A".to_string(), "B".to_string()];
        assert_eq!(narrow(&all, None, "language").unwrap(), all);
        let one = narrow(&all, Some(&"B".to_string()), "language").unwrap();
        assert_eq!(one, vec!["B".to_string()]);
        let err = narrow(&all, Some(&"Z".to_string()), "language").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn run_seeds_differ_across_languages_and_objectives() {
        let a = train_seed(7, "A", Objective::Pge);
        let b = train_seed(7, "B", Objective::Pge);
        let c = train_seed(7, "A", Objective::Cae);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, train_seed(7, "A", Objective::Pge));
    }
}
