//! Artifact layout under a run's output directory.

use awe_core::encoders::Objective;
use awe_core::rsa::Kernel;
use std::path::{Path, PathBuf};

/// Resolves every artifact path from the run's output directory, so all
/// subcommands agree on where things live.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn languages_dir(&self) -> PathBuf {
        self.root.join("languages")
    }

    pub fn language_spec(&self, language: &str) -> PathBuf {
        self.languages_dir().join(format!("{language}.language.json"))
    }

    pub fn speakers(&self, language: &str) -> PathBuf {
        self.languages_dir().join(format!("{language}.speakers.json"))
    }

    pub fn manifest(&self, language: &str) -> PathBuf {
        self.languages_dir().join(format!("{language}.manifest.json"))
    }

    pub fn features(&self, language: &str) -> PathBuf {
        self.languages_dir().join(format!("{language}.features.awef"))
    }

    pub fn features_file_name(language: &str) -> String {
        format!("{language}.features.awef")
    }

    pub fn distances_csv(&self) -> PathBuf {
        self.root.join("distances.csv")
    }

    pub fn distances_json(&self) -> PathBuf {
        self.root.join("distances.json")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn checkpoint(&self, language: &str, objective: Objective) -> PathBuf {
        self.checkpoints_dir()
            .join(format!("{language}.{}.ckpt", objective.name()))
    }

    pub fn history(&self, language: &str, objective: Objective) -> PathBuf {
        self.checkpoints_dir()
            .join(format!("{language}.{}.history.json", objective.name()))
    }

    pub fn embeddings_dir(&self) -> PathBuf {
        self.root.join("embeddings")
    }

    pub fn embedding(&self, stimuli: &str, encoder: &str, objective: Objective) -> PathBuf {
        self.embeddings_dir()
            .join(format!("{stimuli}.{encoder}.{}.awex", objective.name()))
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn eval_report(&self, language: &str, objective: Objective) -> PathBuf {
        self.eval_dir()
            .join(format!("{language}.{}.eval.json", objective.name()))
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.root.join("analysis")
    }

    pub fn xrsm(&self, objective: Objective, kernel: Kernel, ext: &str) -> PathBuf {
        self.analysis_dir()
            .join(format!("xrsm.{}.{}.{ext}", objective.name(), kernel.name()))
    }

    pub fn dendrogram(&self, objective: Objective, kernel: Kernel, ext: &str) -> PathBuf {
        self.analysis_dir().join(format!(
            "dendrogram.{}.{}.{ext}",
            objective.name(),
            kernel.name()
        ))
    }

    pub fn cross_model(&self, kernel: Kernel, ext: &str) -> PathBuf {
        self.analysis_dir()
            .join(format!("cross_model.{}.{ext}", kernel.name()))
    }

    pub fn summary(&self) -> PathBuf {
        self.analysis_dir().join("summary.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_rooted_and_named_by_language_objective_kernel() {
        let layout = Layout::new("run");
        assert_eq!(
            layout.checkpoint("A", Objective::Pge),
            PathBuf::from("run/checkpoints/A.pge.ckpt")
        );
        assert_eq!(
            layout.embedding("A", "B", Objective::Cae),
            PathBuf::from("run/embeddings/A.B.cae.awex")
        );
        assert_eq!(
            layout.xrsm(Objective::Cse, Kernel::Linear, "csv"),
            PathBuf::from("run/analysis/xrsm.cse.linear.csv")
        );
        assert_eq!(
            layout.dendrogram(Objective::Pge, Kernel::rbf_default(), "nwk"),
            PathBuf::from("run/analysis/dendrogram.pge.rbf.nwk")
        );
        assert_eq!(layout.summary(), PathBuf::from("run/analysis/summary.json"));
    }
}
