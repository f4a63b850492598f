//! Naive agglomerative Ward clustering, recomputing centroid-based merge
//! costs from the raw points at every step.

/// One merge in leaf-id convention: leaves are `0..m`, the cluster created by
/// merge `s` gets id `m + s`. `height` is the Ward distance at the merge and
/// `members` lists the original point indices of the new cluster.
#[derive(Debug, Clone)]
pub struct RefMerge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub members: Vec<usize>,
}

/// Full Ward linkage by exhaustive search: at each step evaluates
/// √(2·nᵢnⱼ/(nᵢ+nⱼ)) · ‖μᵢ − μⱼ‖ for every cluster pair from scratch and
/// merges the minimum, breaking ties toward the lexicographically smallest
/// pair of cluster ids.
pub fn ward_reference(points: &[Vec<f64>]) -> Vec<RefMerge> {
    let m = points.len();
    assert!(m >= 2, "need at least two points");
    let dim = points[0].len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..m).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(m - 1);
    for step in 0..m - 1 {
        let centroid = |members: &[usize]| -> Vec<f64> {
            let mut c = vec![0.0; dim];
            for &p in members {
                for (cv, xv) in c.iter_mut().zip(&points[p]) {
                    *cv += xv;
                }
            }
            for cv in &mut c {
                *cv /= members.len() as f64;
            }
            c
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (ci, cj) = (centroid(&clusters[i].1), centroid(&clusters[j].1));
                let sq: f64 = ci.iter().zip(&cj).map(|(a, b)| (a - b) * (a - b)).sum();
                let (ni, nj) = (clusters[i].1.len() as f64, clusters[j].1.len() as f64);
                let d = (2.0 * ni * nj / (ni + nj) * sq).sqrt();
                let better = match best {
                    None => true,
                    Some((bd, _, _)) => d < bd,
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let (height, i, j) = best.expect("at least one pair");
        let (id_a, members_a) = clusters[i].clone();
        let (id_b, members_b) = clusters.remove(j);
        let mut members = members_a;
        members.extend(members_b);
        members.sort_unstable();
        clusters[i] = (m + step, members.clone());
        let (a, b) = if id_a <= id_b { (id_a, id_b) } else { (id_b, id_a) };
        merges.push(RefMerge {
            a,
            b,
            height,
            members,
        });
    }
    merges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_line_matches_hand_calculation() {
        // Points 0, 1, 10 on a line: first merge {0,1} at height 1, then the
        // pair cluster joins {10} at √(4/3)·9.5 ≈ 10.9697.
        let points = vec![vec![0.0], vec![1.0], vec![10.0]];
        let merges = ward_reference(&points);
        assert_eq!(merges.len(), 2);
        assert_eq!((merges[0].a, merges[0].b), (0, 1));
        assert!((merges[0].height - 1.0).abs() < 1e-12);
        assert_eq!(merges[1].members, vec![0, 1, 2]);
        let expect = (4.0f64 / 3.0).sqrt() * 9.5;
        assert!((merges[1].height - expect).abs() < 1e-12);
    }

    #[test]
    fn singleton_merge_height_is_euclidean_distance() {
        let points = vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![100.0, 100.0]];
        let merges = ward_reference(&points);
        assert!((merges[0].height - 5.0).abs() < 1e-12);
    }
}
