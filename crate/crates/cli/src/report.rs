//! Report stage: folds the stored artifacts of a finished run into one
//! plain-text digest.

use crate::analyze::read_summary;
use crate::artifacts::Layout;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::synth::read_distance_table;
use awe_core::eval::read_report;
use std::fmt::Write as _;

pub fn run_report(config: &RunConfig) -> Result<String, CliError> {
    let layout = Layout::new(&config.output_dir);
    let distances = read_distance_table(&layout.distances_json())?;
    let summary = read_summary(&layout)?;

    let mut out = String::new();
    let _ = writeln!(out, "experiment {} (seed {})", summary.experiment, summary.seed);
    let _ = writeln!(out, "languages: {}", summary.languages.join(", "));
    out.push('\n');

    let _ = writeln!(out, "generating distances");
    for (i, lang) in distances.languages.iter().enumerate() {
        let cells: Vec<String> = distances.rows[i].iter().map(|d| format!("{d:.4}")).collect();
        let _ = writeln!(out, "  {lang}: {}", cells.join("  "));
    }
    out.push('\n');

    let _ = writeln!(out, "retrieval (native encoders, test split)");
    for lang in &summary.languages {
        for objective in &summary.objectives {
            let obj = awe_core::encoders::Objective::parse(objective).ok_or_else(|| {
                CliError::data(format!("summary lists unknown objective {objective}"))
            })?;
            let path = layout.eval_report(lang, obj);
            if !path.exists() {
                return Err(CliError::data(format!(
                    "missing retrieval report at {}; run the eval stage first",
                    path.display()
                )));
            }
            let report = read_report(&path)?;
            let _ = writeln!(
                out,
                "  {lang} {objective}: mAP {:.4} (chance {:.4}, x{:.1})",
                report.map,
                report.baseline,
                report.map / report.baseline.max(f64::MIN_POSITIVE)
            );
        }
    }
    out.push('\n');

    for digest in &summary.xrsms {
        let _ = writeln!(
            out,
            "similarity matrix, {} objective, {} kernel (rows: stimuli)",
            digest.objective, digest.kernel
        );
        for (i, lang) in digest.languages.iter().enumerate() {
            let cells: Vec<String> = digest.rows[i].iter().map(|v| format!("{v:.4}")).collect();
            let _ = writeln!(out, "  {lang}: {}", cells.join("  "));
        }
    }
    out.push('\n');

    let held = summary.sim_orderings.iter().filter(|o| o.holds).count();
    let _ = writeln!(
        out,
        "distance-rank predictions held: {held}/{}",
        summary.sim_orderings.len()
    );
    for ordering in &summary.sim_orderings {
        let _ = writeln!(
            out,
            "  [{}] {}/{}: sim({}, {}) = {:.4} {} sim({}, {}) = {:.4}",
            if ordering.holds { "ok" } else { "MISS" },
            ordering.objective,
            ordering.kernel,
            ordering.stimuli,
            ordering.near,
            ordering.sim_near,
            if ordering.holds { ">" } else { "<=" },
            ordering.stimuli,
            ordering.far,
            ordering.sim_far,
        );
    }
    out.push('\n');

    for digest in &summary.cross_model {
        let _ = writeln!(
            out,
            "objective agreement ({} kernel): pge~cae {:.4}, pge~cse {:.4}, cae~cse {:.4}{}",
            digest.kernel,
            digest.mean_pge_cae,
            digest.mean_pge_cse,
            digest.mean_cae_cse,
            if digest.pge_cae_highest {
                " (pge~cae highest)"
            } else {
                ""
            }
        );
    }
    if !summary.cross_model.is_empty() {
        out.push('\n');
    }

    for tree in &summary.trees {
        let _ = writeln!(
            out,
            "family tree, {} objective, {} kernel: {} first merge [{}] {} nearest generating pair [{}]",
            tree.objective,
            tree.kernel,
            tree.newick.trim_end(),
            tree.first_merge.join(", "),
            if tree.first_merge_matches_nearest_pair {
                "matches"
            } else {
                "differs from"
            },
            tree.nearest_pair.join(", "),
        );
    }

    Ok(out)
}
