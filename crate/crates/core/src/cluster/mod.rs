//! Ward-linkage agglomerative clustering over similarity-matrix rows, with
//! merge-tree, Newick, and SVG dendrogram outputs.
//!
//! Heights follow the convention in which two singletons merge at their
//! Euclidean distance, so results line up with standard clustering tooling.

mod newick;
mod svg;

pub use newick::{from_newick, to_newick};
pub use svg::dendrogram_svg;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rsa::Xrsm;

/// One agglomeration step. Clusters use the leaf-id convention: leaves are
/// `0..m` in label order, and the cluster created by merge `s` has id `m + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Agglomerative clustering result: exactly `leaves.len() - 1` merges with
/// nondecreasing heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

impl MergeTree {
    pub fn root(&self) -> usize {
        self.leaves.len() + self.merges.len() - 1
    }

    /// Sorted original leaf indices inside a cluster.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_members(cluster, &mut out);
        out.sort_unstable();
        out
    }

    fn collect_members(&self, cluster: usize, out: &mut Vec<usize>) {
        if cluster < self.leaves.len() {
            out.push(cluster);
        } else {
            let merge = &self.merges[cluster - self.leaves.len()];
            self.collect_members(merge.a, out);
            self.collect_members(merge.b, out);
        }
    }

    /// Leaf indices in recursive left-first order from the root: the order a
    /// dendrogram lays them out.
    pub fn leaf_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.leaves.len());
        self.walk_leaves(self.root(), &mut out);
        out
    }

    fn walk_leaves(&self, cluster: usize, out: &mut Vec<usize>) {
        if cluster < self.leaves.len() {
            out.push(cluster);
        } else {
            let merge = &self.merges[cluster - self.leaves.len()];
            self.walk_leaves(merge.a, out);
            self.walk_leaves(merge.b, out);
        }
    }

    /// Abstract content of the tree: for every merge, the sorted leaf labels
    /// it groups and its height, sorted by (height, labels). Two trees with
    /// equal signatures cluster the same things at the same heights, however
    /// their rows were ordered or their merges numbered.
    pub fn signature(&self) -> Vec<(Vec<String>, f64)> {
        let m = self.leaves.len();
        let mut sig: Vec<(Vec<String>, f64)> = self
            .merges
            .iter()
            .enumerate()
            .map(|(s, merge)| {
                let mut names: Vec<String> = self
                    .members(m + s)
                    .into_iter()
                    .map(|i| self.leaves[i].clone())
                    .collect();
                names.sort();
                (names, merge.height)
            })
            .collect();
        sig.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(&y.0)));
        sig
    }
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("clustering needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("{labels} labels for {points} points")]
    LabelMismatch { labels: usize, points: usize },
    #[error("ragged points: row {row} has {got} coordinates, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite coordinate in row {row}")]
    NonFinite { row: usize },
    #[error("bad tree text: {0}")]
    BadNewick(String),
    #[error("bad tree file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad tree JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Ward (variance-minimizing) agglomeration of the given points under
/// Euclidean distance, via Lance-Williams updates of squared inter-cluster
/// distances. Ties break toward the lexicographically smallest pair of
/// cluster ids.
pub fn ward_linkage(labels: &[String], points: &[Vec<f64>]) -> Result<MergeTree, ClusterError> {
    let m = points.len();
    if labels.len() != m {
        return Err(ClusterError::LabelMismatch {
            labels: labels.len(),
            points: m,
        });
    }
    if m < 2 {
        return Err(ClusterError::TooFewPoints(m));
    }
    let dim = points[0].len();
    for (row, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(ClusterError::Ragged {
                row,
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(ClusterError::NonFinite { row });
        }
    }

    let total = 2 * m - 1;
    let mut sq = vec![vec![0.0f64; total]; total];
    for i in 0..m {
        for j in i + 1..m {
            let d: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            sq[i][j] = d;
            sq[j][i] = d;
        }
    }

    let mut active: Vec<usize> = (0..m).collect();
    let mut sizes = vec![1usize; total];
    let mut merges = Vec::with_capacity(m - 1);
    for step in 0..m - 1 {
        let mut best = f64::INFINITY;
        let mut pair = (0, 0);
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                if sq[a][b] < best {
                    best = sq[a][b];
                    pair = (a, b);
                }
            }
        }
        let (a, b) = pair;
        let new = m + step;
        let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let nk = sizes[k] as f64;
            let v = ((na + nk) * sq[a][k] + (nb + nk) * sq[b][k] - nk * sq[a][b])
                / (na + nb + nk);
            let v = v.max(0.0);
            sq[new][k] = v;
            sq[k][new] = v;
        }
        sizes[new] = sizes[a] + sizes[b];
        active.retain(|&id| id != a && id != b);
        active.push(new);
        merges.push(Merge {
            a,
            b,
            height: best.max(0.0).sqrt(),
            size: sizes[new],
        });
    }
    Ok(MergeTree {
        leaves: labels.to_vec(),
        merges,
    })
}

/// Clusters the rows of a similarity matrix: each language is described by
/// how its stimuli are seen by every encoder.
pub fn cluster_xrsm(xrsm: &Xrsm) -> Result<MergeTree, ClusterError> {
    let points: Vec<Vec<f64>> = (0..xrsm.size()).map(|i| xrsm.row(i).to_vec()).collect();
    ward_linkage(&xrsm.languages, &points)
}

pub fn write_tree_json(path: &Path, tree: &MergeTree) -> Result<(), ClusterError> {
    let mut text = serde_json::to_string_pretty(tree)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_tree_json(path: &Path) -> Result<MergeTree, ClusterError> {
    let tree: MergeTree = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    validate_tree(&tree).map_err(ClusterError::BadFile)?;
    Ok(tree)
}

/// Structural sanity shared by the JSON and Newick readers: merge count,
/// child ids that exist before use, each child used exactly once, and sizes
/// that add up.
pub(crate) fn validate_tree(tree: &MergeTree) -> Result<(), String> {
    let m = tree.leaves.len();
    if m < 2 {
        return Err(format!("{m} leaves"));
    }
    if tree.merges.len() != m - 1 {
        return Err(format!("{} merges for {m} leaves", tree.merges.len()));
    }
    let mut used = vec![false; 2 * m - 1];
    for (s, merge) in tree.merges.iter().enumerate() {
        for child in [merge.a, merge.b] {
            if child >= m + s {
                return Err(format!("merge {s} references cluster {child} before it exists"));
            }
            if used[child] {
                return Err(format!("cluster {child} merged twice"));
            }
            used[child] = true;
        }
        let expect = tree.members(m + s).len();
        if merge.size != expect {
            return Err(format!(
                "merge {s} claims size {}, members say {expect}",
                merge.size
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::Rng;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn two_points_merge_at_their_euclidean_distance() {
        let tree = ward_linkage(&labels(2), &[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(tree.merges.len(), 1);
        let merge = tree.merges[0];
        assert_eq!((merge.a, merge.b, merge.size), (0, 1, 2));
        assert_eq!(merge.height, 5.0);
    }

    #[test]
    fn three_collinear_points_match_hand_arithmetic() {
        // {0, 1, 10}: the near pair joins at 1; Lance-Williams then gives the
        // third point squared distance (2*100 + 2*81 - 1)/3 = 361/3, so the
        // final merge sits at sqrt(4/3)*9.5.
        let tree = ward_linkage(&labels(3), &[vec![0.0], vec![1.0], vec![10.0]]).unwrap();
        assert_eq!((tree.merges[0].a, tree.merges[0].b), (0, 1));
        assert!((tree.merges[0].height - 1.0).abs() <= 1e-12);
        assert_eq!((tree.merges[1].a, tree.merges[1].b), (2, 3));
        let expect = (4.0f64 / 3.0).sqrt() * 9.5;
        assert!((tree.merges[1].height - expect).abs() <= 1e-12);
        assert_eq!(tree.members(4), vec![0, 1, 2]);
    }

    #[test]
    fn identical_points_merge_at_zero_with_id_order_ties() {
        let points = vec![vec![2.0, -1.0]; 4];
        let tree = ward_linkage(&labels(4), &points).unwrap();
        for merge in &tree.merges {
            assert_eq!(merge.height, 0.0);
        }
        // Smallest id pair first: (0,1), then (2,3), then the two clusters.
        assert_eq!((tree.merges[0].a, tree.merges[0].b), (0, 1));
        assert_eq!((tree.merges[1].a, tree.merges[1].b), (2, 3));
        assert_eq!((tree.merges[2].a, tree.merges[2].b), (4, 5));
    }

    #[test]
    fn heights_never_decrease_and_the_root_holds_everyone() {
        let mut rng = Rng::new(5);
        for m in 2..=9 {
            let points: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect())
                .collect();
            let tree = ward_linkage(&labels(m), &points).unwrap();
            assert_eq!(tree.merges.len(), m - 1);
            for w in tree.merges.windows(2) {
                assert!(w[0].height <= w[1].height, "{} > {}", w[0].height, w[1].height);
            }
            assert_eq!(tree.members(tree.root()), (0..m).collect::<Vec<_>>());
            validate_tree(&tree).unwrap();
        }
    }

    #[test]
    fn permuting_rows_yields_an_isomorphic_tree() {
        let mut rng = Rng::new(11);
        let m = 7;
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let names = labels(m);
        let tree = ward_linkage(&names, &points).unwrap();

        let perm = [3usize, 0, 6, 1, 5, 2, 4];
        let shuffled_points: Vec<Vec<f64>> = perm.iter().map(|&i| points[i].clone()).collect();
        let shuffled_names: Vec<String> = perm.iter().map(|&i| names[i].clone()).collect();
        let shuffled = ward_linkage(&shuffled_names, &shuffled_points).unwrap();

        let (sig_a, sig_b) = (tree.signature(), shuffled.signature());
        assert_eq!(sig_a.len(), sig_b.len());
        for (a, b) in sig_a.iter().zip(&sig_b) {
            assert_eq!(a.0, b.0, "partitions must agree");
            assert!((a.1 - b.1).abs() <= 1e-9, "{} vs {}", a.1, b.1);
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(matches!(
            ward_linkage(&labels(1), &[vec![0.0]]),
            Err(ClusterError::TooFewPoints(1))
        ));
        assert!(matches!(
            ward_linkage(&labels(3), &[vec![0.0], vec![1.0]]),
            Err(ClusterError::LabelMismatch {
                labels: 3,
                points: 2
            })
        ));
        assert!(matches!(
            ward_linkage(&labels(2), &[vec![0.0], vec![1.0, 2.0]]),
            Err(ClusterError::Ragged {
                row: 1,
                expected: 1,
                got: 2
            })
        ));
        assert!(matches!(
            ward_linkage(&labels(2), &[vec![0.0], vec![f64::NAN]]),
            Err(ClusterError::NonFinite { row: 1 })
        ));
    }

    #[test]
    fn leaf_order_is_the_left_first_traversal() {
        let tree = MergeTree {
            leaves: vec!["x".into(), "y".into(), "z".into()],
            merges: vec![
                Merge {
                    a: 0,
                    b: 2,
                    height: 1.0,
                    size: 2,
                },
                Merge {
                    a: 1,
                    b: 3,
                    height: 2.0,
                    size: 3,
                },
            ],
        };
        assert_eq!(tree.leaf_order(), vec![1, 0, 2]);
    }

    #[test]
    fn tree_json_round_trips_and_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tree.json");
        let tree = ward_linkage(
            &labels(4),
            &[vec![0.0], vec![0.4], vec![3.0], vec![9.0]],
        )
        .unwrap();
        write_tree_json(&path, &tree).unwrap();
        assert_eq!(read_tree_json(&path).unwrap(), tree);

        let mut broken = tree.clone();
        broken.merges[0].size = 5;
        write_tree_json(&path, &broken).unwrap();
        assert!(matches!(
            read_tree_json(&path),
            Err(ClusterError::BadFile(msg)) if msg.contains("size")
        ));
    }

    #[test]
    fn signature_orders_merges_by_height_then_labels() {
        let tree = ward_linkage(&labels(3), &[vec![0.0], vec![1.0], vec![10.0]]).unwrap();
        let sig = tree.signature();
        assert_eq!(sig[0].0, vec!["p0".to_string(), "p1".to_string()]);
        assert_eq!(sig[1].0, vec!["p0".to_string(), "p1".to_string(), "p2".to_string()]);
        assert!(sig[0].1 < sig[1].1);
    }
}
