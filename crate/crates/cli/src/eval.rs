//! Evaluation stage: same/different-word retrieval on each language's test
//! split with its native encoders, scored against a shuffled-label baseline.

use crate::artifacts::Layout;
use crate::config::RunConfig;
use crate::data::{load_corpus, load_features, split_labels, split_stimuli};
use crate::embed::load_encoder;
use crate::error::CliError;
use crate::train::narrow;
use awe_core::corpus::Split;
use awe_core::encoders::{embed_set, Objective};
use awe_core::eval::{map_same_different, shuffled_baseline, write_report, EvalReport, EvalSet};
use awe_core::nncore::Rng;

pub fn run_eval(
    config: &RunConfig,
    language: Option<&String>,
    objective: Option<Objective>,
) -> Result<Vec<EvalReport>, CliError> {
    let layout = Layout::new(&config.output_dir);
    let languages = narrow(&config.languages(), language, "language")?;
    let objectives = narrow(&config.objectives, objective.as_ref(), "objective")?;
    std::fs::create_dir_all(layout.eval_dir())?;

    let mode = config.train.relevance_mode;
    let mut reports = Vec::new();
    for lang in &languages {
        let corpus = load_corpus(&layout, lang)?;
        let file = load_features(&layout, lang)?;
        let stims = split_stimuli(&corpus, &file, Split::Test)?;
        let (words, speakers) = split_labels(&corpus, Split::Test);
        for &obj in &objectives {
            let model = load_encoder(&layout, lang, obj)?;
            let matrix = embed_set(&model, &stims, lang)?;
            let set = EvalSet::new(matrix, words.clone(), speakers.clone())?;
            let score = map_same_different(&set, mode)?;
            let mut rng = Rng::new(config.seed)
                .derive("eval-baseline")
                .derive(lang)
                .derive(obj.name());
            let baseline = shuffled_baseline(&set, mode, config.baseline_trials, &mut rng)?;
            let report = EvalReport {
                language: lang.clone(),
                objective: obj.name().to_string(),
                mode,
                map: score.map,
                n_queries: score.n_queries,
                baseline,
            };
            write_report(&layout.eval_report(lang, obj), &report)?;
            reports.push(report);
        }
    }
    Ok(reports)
}
