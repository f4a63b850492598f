//! Analysis stage: embeds every language's held-out stimuli under every
//! trained encoder, builds cross-lingual similarity matrices per objective
//! and kernel, clusters them, compares objectives on shared stimuli, and
//! writes a machine-readable summary of the orderings the run exhibits.

use crate::artifacts::Layout;
use crate::config::RunConfig;
use crate::data::{load_corpus, load_features, split_stimuli};
use crate::embed::load_encoder;
use crate::error::CliError;
use crate::synth::{read_distance_table, DistanceTable};
use awe_core::cluster::{cluster_xrsm, dendrogram_svg, to_newick, write_tree_json, MergeTree};
use awe_core::corpus::Split;
use awe_core::encoders::{embed_set, write_embedding_matrix, EmbeddingMatrix, EncoderModel, Objective};
use awe_core::features::FeatureSequence;
use awe_core::rsa::{
    build_xrsm, cross_model_table, write_cross_model_json, write_xrsm_json, xrsm_heatmap_svg,
    Kernel, Xrsm,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XrsmDigest {
    pub objective: String,
    pub kernel: String,
    pub languages: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// One testable prediction: stimuli from `stimuli` should look more like the
/// `near` encoder's view than the `far` encoder's view, because `near` is the
/// closer relative in the generating family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOrdering {
    pub objective: String,
    pub kernel: String,
    pub stimuli: String,
    pub near: String,
    pub far: String,
    pub sim_near: f64,
    pub sim_far: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossModelDigest {
    pub kernel: String,
    pub mean_pge_cae: f64,
    pub mean_pge_cse: f64,
    pub mean_cae_cse: f64,
    /// Whether the predictive/correspondence pair is the most similar of the
    /// three objective pairings on average.
    pub pge_cae_highest: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeDigest {
    pub objective: String,
    pub kernel: String,
    pub newick: String,
    /// Sorted labels grouped by the lowest merge.
    pub first_merge: Vec<String>,
    /// The two languages at the smallest generating distance.
    pub nearest_pair: Vec<String>,
    pub first_merge_matches_nearest_pair: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub languages: Vec<String>,
    pub objectives: Vec<String>,
    pub kernels: Vec<Kernel>,
    pub ground_truth: DistanceTable,
    pub xrsms: Vec<XrsmDigest>,
    pub sim_orderings: Vec<SimOrdering>,
    pub cross_model: Vec<CrossModelDigest>,
    pub trees: Vec<TreeDigest>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeOutcome {
    pub embeddings: usize,
    pub xrsms: usize,
    pub dendrograms: usize,
    pub cross_model_tables: usize,
    pub orderings_held: usize,
    pub orderings_total: usize,
}

/// Every checkpoint the analysis needs, or a data error naming the absent
/// ones so a partial training run fails loudly instead of mid-flight.
fn load_all_encoders(
    layout: &Layout,
    languages: &[String],
    objectives: &[Objective],
) -> Result<BTreeMap<(String, &'static str), EncoderModel>, CliError> {
    let missing: Vec<String> = languages
        .iter()
        .flat_map(|lang| {
            objectives.iter().filter_map(move |&obj| {
                let path = layout.checkpoint(lang, obj);
                (!path.exists()).then(|| path.display().to_string())
            })
        })
        .collect();
    if !missing.is_empty() {
        return Err(CliError::data(format!(
            "missing checkpoints: {}; run the train stage first",
            missing.join(", ")
        )));
    }
    let mut models = BTreeMap::new();
    for lang in languages {
        for &obj in objectives {
            let model = load_encoder(layout, lang, obj)?;
            models.insert((lang.clone(), obj.name()), model);
        }
    }
    Ok(models)
}

fn check_unit_diagonal(xrsm: &Xrsm) -> Result<(), CliError> {
    for (i, lang) in xrsm.languages.iter().enumerate() {
        let d = xrsm.entry(i, i);
        if !((d - 1.0).abs() <= 1e-9) {
            return Err(CliError::numeric(format!(
                "self-similarity for {lang} under {}/{} is {d}, expected 1",
                xrsm.objective,
                xrsm.kernel.name()
            )));
        }
    }
    Ok(())
}

/// Predictions derivable from the generating distances: for every stimuli
/// language and unordered pair of foreign encoders at strictly different
/// distances, the nearer relative should score higher.
fn orderings_for(xrsm: &Xrsm, ground_truth: &DistanceTable) -> Vec<SimOrdering> {
    let langs = &xrsm.languages;
    let mut out = Vec::new();
    for (i, stimuli) in langs.iter().enumerate() {
        for j in 0..langs.len() {
            for k in (j + 1)..langs.len() {
                if i == j || i == k {
                    continue;
                }
                let (dj, dk) = match (
                    ground_truth.get(stimuli, &langs[j]),
                    ground_truth.get(stimuli, &langs[k]),
                ) {
                    (Some(a), Some(b)) => (a, b),
                    _ => continue,
                };
                if dj == dk {
                    continue;
                }
                let (near, far) = if dj < dk { (j, k) } else { (k, j) };
                let sim_near = xrsm.entry(i, near);
                let sim_far = xrsm.entry(i, far);
                out.push(SimOrdering {
                    objective: xrsm.objective.name().to_string(),
                    kernel: xrsm.kernel.name().to_string(),
                    stimuli: stimuli.clone(),
                    near: langs[near].clone(),
                    far: langs[far].clone(),
                    sim_near,
                    sim_far,
                    holds: sim_near > sim_far,
                });
            }
        }
    }
    out
}

fn tree_digest(tree: &MergeTree, xrsm: &Xrsm, ground_truth: &DistanceTable) -> TreeDigest {
    let mut first_merge: Vec<String> = tree
        .members(tree.leaves.len())
        .into_iter()
        .map(|i| tree.leaves[i].clone())
        .collect();
    first_merge.sort();

    let langs = &ground_truth.languages;
    let mut nearest = (f64::INFINITY, 0usize, 0usize);
    for i in 0..langs.len() {
        for j in (i + 1)..langs.len() {
            let d = ground_truth.rows[i][j];
            if d < nearest.0 {
                nearest = (d, i, j);
            }
        }
    }
    let mut nearest_pair = vec![langs[nearest.1].clone(), langs[nearest.2].clone()];
    nearest_pair.sort();

    TreeDigest {
        objective: xrsm.objective.name().to_string(),
        kernel: xrsm.kernel.name().to_string(),
        newick: to_newick(tree),
        first_merge_matches_nearest_pair: first_merge == nearest_pair,
        first_merge,
        nearest_pair,
    }
}

pub fn run_analyze(config: &RunConfig) -> Result<AnalyzeOutcome, CliError> {
    let layout = Layout::new(&config.output_dir);
    let languages = config.languages();
    let objectives = &config.objectives;

    let models = load_all_encoders(&layout, &languages, objectives)?;
    let mut stimuli: BTreeMap<String, Vec<(String, FeatureSequence)>> = BTreeMap::new();
    for lang in &languages {
        let corpus = load_corpus(&layout, lang)?;
        let file = load_features(&layout, lang)?;
        stimuli.insert(lang.clone(), split_stimuli(&corpus, &file, Split::Test)?);
    }
    let ground_truth = read_distance_table(&layout.distances_json())?;

    let mut tasks: Vec<(Objective, String, String)> = Vec::new();
    for &obj in objectives {
        for stim in &languages {
            for enc in &languages {
                tasks.push((obj, stim.clone(), enc.clone()));
            }
        }
    }
    let matrices: Vec<EmbeddingMatrix> = tasks
        .par_iter()
        .map(|(obj, stim, enc)| {
            let model = &models[&(enc.clone(), obj.name())];
            embed_set(model, &stimuli[stim], stim).map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;

    std::fs::create_dir_all(layout.embeddings_dir())?;
    std::fs::create_dir_all(layout.analysis_dir())?;
    for ((obj, stim, enc), matrix) in tasks.iter().zip(&matrices) {
        write_embedding_matrix(&layout.embedding(stim, enc, *obj), matrix)?;
    }

    let mut by_objective: BTreeMap<&'static str, Vec<EmbeddingMatrix>> = BTreeMap::new();
    for ((obj, _, _), matrix) in tasks.iter().zip(&matrices) {
        by_objective.entry(obj.name()).or_default().push(matrix.clone());
    }

    let mut xrsm_digests = Vec::new();
    let mut sim_orderings = Vec::new();
    let mut tree_digests = Vec::new();
    let mut dendrograms = 0usize;
    for &obj in objectives {
        let views = &by_objective[obj.name()];
        for &kernel in &config.kernels {
            let xrsm = build_xrsm(&languages, views, kernel)?;
            check_unit_diagonal(&xrsm)?;
            let name = kernel.name();
            std::fs::write(layout.xrsm(obj, kernel, "csv"), xrsm.to_csv())?;
            write_xrsm_json(&layout.xrsm(obj, kernel, "json"), &xrsm, config.seed)?;
            std::fs::write(layout.xrsm(obj, kernel, "svg"), xrsm_heatmap_svg(&xrsm))?;

            let tree = cluster_xrsm(&xrsm)?;
            write_tree_json(&layout.dendrogram(obj, kernel, "json"), &tree)?;
            std::fs::write(layout.dendrogram(obj, kernel, "nwk"), to_newick(&tree))?;
            let title = format!("{} similarity, {name} kernel", obj.name());
            std::fs::write(
                layout.dendrogram(obj, kernel, "svg"),
                dendrogram_svg(&tree, &title),
            )?;
            dendrograms += 1;

            sim_orderings.extend(orderings_for(&xrsm, &ground_truth));
            tree_digests.push(tree_digest(&tree, &xrsm, &ground_truth));
            xrsm_digests.push(XrsmDigest {
                objective: obj.name().to_string(),
                kernel: name.to_string(),
                languages: xrsm.languages.clone(),
                rows: (0..xrsm.size()).map(|i| xrsm.row(i).to_vec()).collect(),
            });
        }
    }

    let all_objectives = [Objective::Pge, Objective::Cae, Objective::Cse]
        .iter()
        .all(|o| objectives.contains(o));
    let mut cross_model = Vec::new();
    if all_objectives {
        let native: Vec<EmbeddingMatrix> = tasks
            .iter()
            .zip(&matrices)
            .filter(|((_, stim, enc), _)| stim == enc)
            .map(|(_, matrix)| matrix.clone())
            .collect();
        for &kernel in &config.kernels {
            let table = cross_model_table(&native, kernel)?;
            std::fs::write(layout.cross_model(kernel, "csv"), table.to_csv())?;
            write_cross_model_json(&layout.cross_model(kernel, "json"), &table)?;
            cross_model.push(CrossModelDigest {
                kernel: kernel.name().to_string(),
                mean_pge_cae: table.mean_pge_cae,
                mean_pge_cse: table.mean_pge_cse,
                mean_cae_cse: table.mean_cae_cse,
                pge_cae_highest: table.mean_pge_cae > table.mean_pge_cse
                    && table.mean_pge_cae > table.mean_cae_cse,
            });
        }
    }

    let orderings_held = sim_orderings.iter().filter(|o| o.holds).count();
    let orderings_total = sim_orderings.len();
    let n_xrsms = xrsm_digests.len();
    let summary = Summary {
        experiment: config.experiment.clone(),
        seed: config.seed,
        languages: languages.clone(),
        objectives: objectives.iter().map(|o| o.name().to_string()).collect(),
        kernels: config.kernels.clone(),
        ground_truth,
        xrsms: xrsm_digests,
        sim_orderings,
        cross_model,
        trees: tree_digests,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(layout.summary(), text)?;

    Ok(AnalyzeOutcome {
        embeddings: matrices.len(),
        xrsms: n_xrsms,
        dendrograms,
        cross_model_tables: if all_objectives { config.kernels.len() } else { 0 },
        orderings_held,
        orderings_total,
    })
}

pub fn read_summary(layout: &Layout) -> Result<Summary, CliError> {
    let path = layout.summary();
    if !path.exists() {
        return Err(CliError::data(format!(
            "missing analysis summary at {}; run the analyze stage first",
            path.display()
        )));
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
