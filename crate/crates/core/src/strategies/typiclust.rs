//! Typicality-based cluster sampling.

use std::cmp::Ordering;

use super::kmeans::kmeans;
use super::StrategyContext;
use crate::linalg::sq_dist;
use crate::seed;

const NEIGHBORS: usize = 20;
const EPS: f64 = 1e-8;

struct Cluster {
    id: usize,
    has_labeled: bool,
    members: Vec<usize>,
    /// Positions into the candidate list.
    candidates: Vec<usize>,
}

/// `1 / (mean distance to the nearest min(20, |cluster| − 1) members + ε)`.
fn typicality(points: &[f32], d: usize, members: &[usize], of: usize) -> f64 {
    let x = &points[of * d..(of + 1) * d];
    let mut dists: Vec<f64> = members
        .iter()
        .filter(|&&m| m != of)
        .map(|&m| f64::from(sq_dist(x, &points[m * d..(m + 1) * d])).sqrt())
        .collect();
    let nn = NEIGHBORS.min(dists.len());
    let mean = if nn == 0 {
        0.0
    } else {
        dists.select_nth_unstable_by(nn - 1, |a, b| a.total_cmp(b));
        dists[..nn].iter().sum::<f64>() / nn as f64
    };
    1.0 / (mean + EPS)
}

/// Clusters ℒ ∪ 𝒞 (k-means with k = |ℒ| + b, or label groups when
/// `candidate_labels` is given), visits clusters without labeled members by
/// descending candidate count, then the rest, and takes the most typical
/// remaining candidate of each cluster round-robin until `b` are chosen.
pub(crate) fn select(ctx: &StrategyContext<'_>, b: usize, candidate_labels: Option<&[u32]>) -> Vec<usize> {
    let ds = ctx.dataset();
    let d = ds.dim();
    let n_lab = ctx.labeled().len();
    let cands = ctx.candidates();
    let mut points = Vec::with_capacity((n_lab + cands.len()) * d);
    for &i in ctx.labeled().iter().chain(cands) {
        points.extend_from_slice(ds.row(i));
    }
    let n = n_lab + cands.len();

    let (k, assignment) = match candidate_labels {
        Some(labels) => {
            let assignment: Vec<usize> = ctx
                .labeled_labels()
                .iter()
                .chain(labels)
                .map(|&y| y as usize)
                .collect();
            (ds.num_classes(), assignment)
        }
        None => {
            let k = (n_lab + b).min(n);
            let mut rng = seed::rng(ctx.rng_seed());
            (k, kmeans(&points, d, k, &mut rng).assignment)
        }
    };

    let mut clusters: Vec<Cluster> = (0..k)
        .map(|id| Cluster {
            id,
            has_labeled: false,
            members: Vec::new(),
            candidates: Vec::new(),
        })
        .collect();
    for (p, &c) in assignment.iter().enumerate() {
        let cl = &mut clusters[c];
        cl.members.push(p);
        if p < n_lab {
            cl.has_labeled = true;
        } else {
            cl.candidates.push(p - n_lab);
        }
    }
    clusters.retain(|c| !c.candidates.is_empty());
    clusters.sort_by(|a, b| {
        a.has_labeled
            .cmp(&b.has_labeled)
            .then(b.candidates.len().cmp(&a.candidates.len()))
            .then(a.id.cmp(&b.id))
    });

    let mut queues: Vec<Option<Vec<usize>>> = vec![None; clusters.len()];
    let mut cursor = vec![0usize; clusters.len()];
    let mut out = Vec::with_capacity(b);
    while out.len() < b {
        let before = out.len();
        for (ci, cluster) in clusters.iter().enumerate() {
            if out.len() == b {
                break;
            }
            let queue = queues[ci].get_or_insert_with(|| {
                let mut scored: Vec<(f64, usize)> = cluster
                    .candidates
                    .iter()
                    .map(|&pos| (typicality(&points, d, &cluster.members, n_lab + pos), pos))
                    .collect();
                scored.sort_by(|a, b| match b.0.total_cmp(&a.0) {
                    Ordering::Equal => a.1.cmp(&b.1),
                    o => o,
                });
                scored.into_iter().map(|(_, pos)| pos).collect()
            });
            if let Some(&pos) = queue.get(cursor[ci]) {
                cursor[ci] += 1;
                out.push(cands[pos]);
            }
        }
        assert!(out.len() > before, "candidate pool exhausted before b picks");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::model::LinearHead;

    #[test]
    fn supervised_takes_one_per_class() {
        let feats = vec![0.0, 0.2, 5.0, 5.3, 9.0, 9.1];
        let ds = Dataset::new("t", feats, vec![0, 0, 1, 1, 2, 2], 3, 1).unwrap();
        let head = LinearHead::zeros(3, 1);
        let ctx = StrategyContext::new(&ds, &[], &[0, 2, 4], &head, ds.labels(), 0)
            .unwrap()
            .reveal_candidate_labels(ds.labels());
        let mut got = select(&ctx, 3, Some(&[0, 1, 2]));
        got.sort_unstable();
        assert_eq!(got, vec![0, 2, 4]);
    }

    #[test]
    fn picks_the_most_typical_point_of_the_tight_cluster() {
        // Five points around 0 and one outlier at 50. With k = 1 every point
        // shares one cluster; typicality by hand (mean distance to the other 5):
        //   -0.2: (0.1+0.2+0.3+0.4+50.2)/5, 0.0: (0.2+0.1+0.1+0.2+50)/5 ...
        // The centre point 0.0 has the smallest mean distance.
        let feats = vec![-0.2, -0.1, 0.0, 0.1, 0.2, 50.0];
        let ds = Dataset::new("t", feats, vec![0, 1, 0, 1, 0, 1], 2, 1).unwrap();
        let head = LinearHead::zeros(2, 1);
        let pool: Vec<usize> = (0..6).collect();
        let ctx = StrategyContext::new(&ds, &[], &pool, &head, ds.labels(), 1).unwrap();
        assert_eq!(select(&ctx, 1, None), vec![2]);
    }

    #[test]
    fn singleton_cluster_is_maximally_typical() {
        let pts = vec![0.0, 1.0];
        assert!((typicality(&pts, 1, &[0], 0) - 1e8).abs() < 1.0);
        assert!((typicality(&pts, 1, &[0, 1], 0) - 1.0 / (1.0 + EPS)).abs() < 1e-12);
    }
}
