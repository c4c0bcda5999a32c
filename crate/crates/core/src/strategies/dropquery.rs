//! Feature-dropout inconsistency sampling.

use std::collections::BTreeMap;

use rand::Rng;

use super::kmeans::{kmeans, representatives};
use super::{fill_by_margin, StrategyContext};
use crate::linalg::argmax;
use crate::model::LinearHead;
use crate::seed;

pub const DROPOUT_REPEATS: usize = 10;
const DROP_PROB: f64 = 0.5;

/// Number of dropout copies of `x` (each coordinate zeroed with probability
/// 0.5, survivors doubled) whose argmax differs from the clean argmax.
pub fn dropout_inconsistency<R: Rng>(head: &LinearHead, x: &[f32], rng: &mut R) -> usize {
    let clean = argmax(&head.logits(x));
    let scale = (1.0 / (1.0 - DROP_PROB)) as f32;
    let mut corrupted = vec![0f32; x.len()];
    let mut logits = vec![0f32; head.num_classes()];
    (0..DROPOUT_REPEATS)
        .filter(|_| {
            for (c, &v) in corrupted.iter_mut().zip(x) {
                *c = if rng.random_bool(DROP_PROB) { 0.0 } else { v * scale };
            }
            head.logits_into(&corrupted, &mut logits);
            argmax(&logits) != clean
        })
        .count()
}

/// Unsupervised: k-means representatives of the inconsistent candidates.
/// Supervised: inconsistent candidates grouped by label, largest groups first,
/// most inconsistent first within a group, taken round-robin. Either way an
/// empty inconsistent set means the whole pool, and a short one is topped up
/// by margin.
pub(crate) fn select(ctx: &StrategyContext<'_>, b: usize, candidate_labels: Option<&[u32]>) -> Vec<usize> {
    let ds = ctx.dataset();
    let mut rng = seed::rng(ctx.rng_seed());
    let counts: Vec<usize> = ctx
        .candidates()
        .iter()
        .map(|&i| dropout_inconsistency(ctx.head(), ds.row(i), &mut rng))
        .collect();
    let mut query: Vec<usize> = (0..counts.len()).filter(|&p| counts[p] > 0).collect();
    if query.is_empty() {
        query = (0..counts.len()).collect();
    }

    let mut out: Vec<usize> = match candidate_labels {
        None if query.len() >= b => {
            let members: Vec<usize> = query.iter().map(|&p| ctx.candidates()[p]).collect();
            let points = ctx.gather(&members);
            let clustering = kmeans(&points, ds.dim(), b, &mut rng);
            representatives(&points, ds.dim(), &clustering)
                .into_iter()
                .map(|p| members[p])
                .collect()
        }
        None => query.iter().map(|&p| ctx.candidates()[p]).collect(),
        Some(labels) => {
            let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for &p in &query {
                groups.entry(labels[p]).or_default().push(p);
            }
            let mut groups: Vec<(u32, Vec<usize>)> = groups.into_iter().collect();
            groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
            for (_, members) in &mut groups {
                members.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
            }
            let mut out = Vec::with_capacity(b);
            let mut round = 0;
            while out.len() < b {
                let before = out.len();
                for (_, members) in &groups {
                    if out.len() == b {
                        break;
                    }
                    if let Some(&p) = members.get(round) {
                        out.push(ctx.candidates()[p]);
                    }
                }
                if out.len() == before {
                    break;
                }
                round += 1;
            }
            out
        }
    };
    fill_by_margin(ctx, &mut out, b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    #[test]
    fn constant_head_has_no_inconsistency() {
        let head = LinearHead::zeros(3, 4);
        let mut rng = seed::rng(0);
        assert_eq!(dropout_inconsistency(&head, &[1.0, -2.0, 3.0, 0.5], &mut rng), 0);
    }

    #[test]
    fn single_deciding_coordinate_flips_about_half_the_time() {
        // Coordinate 0 alone pushes toward class 1; the bias favours class 0.
        // Dropping coordinate 0 (probability 0.5) flips the prediction, so the
        // count is Binomial(10, 0.5) with mean 5.
        let head = LinearHead::from_parts(2, 3, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![0.5, 0.0]).unwrap();
        let x = [2.0, 7.0, -3.0];
        let mut rng = seed::rng(42);
        let trials = 2000;
        let total: usize = (0..trials).map(|_| dropout_inconsistency(&head, &x, &mut rng)).sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 5.0).abs() < 0.2, "mean flips {mean}");
        // Monte Carlo variance check: Binomial(10, 0.5) has sd ≈ 1.58, so
        // single counts stay within 5 ± 2 more often than not.
        let mut within = 0;
        for _ in 0..trials {
            let c = dropout_inconsistency(&head, &x, &mut rng) as i64;
            if (c - 5).abs() <= 2 {
                within += 1;
            }
        }
        assert!(within as f64 / trials as f64 > 0.85);
    }

    #[test]
    fn zero_head_selects_kmeans_representatives_of_whole_pool() {
        let ds = Dataset::new("d", vec![0.0, 0.1, 10.0, 10.1], vec![0, 1, 0, 1], 2, 1).unwrap();
        let head = LinearHead::zeros(2, 1);
        let ctx = StrategyContext::new(&ds, &[], &[0, 1, 2, 3], &head, ds.labels(), 9).unwrap();
        let mut got = select(&ctx, 2, None);
        got.sort_unstable();
        assert!(got[0] <= 1 && got[1] >= 2, "{got:?}");
    }

    #[test]
    fn supervised_with_b_equal_k_covers_every_class() {
        let ds = Dataset::new(
            "d",
            vec![0.1, 0.2, -0.1, -0.3, 0.05, -0.02],
            vec![0, 1, 2, 0, 1, 2],
            3,
            1,
        )
        .unwrap();
        // A constant head makes the query set the whole pool, which holds every class.
        let head = LinearHead::zeros(3, 1);
        let pool: Vec<usize> = (0..6).collect();
        let ctx = StrategyContext::new(&ds, &[], &pool, &head, ds.labels(), 3)
            .unwrap()
            .reveal_candidate_labels(ds.labels());
        let labels: Vec<u32> = pool.iter().map(|&i| ds.labels()[i]).collect();
        let got = select(&ctx, 3, Some(&labels));
        let mut classes: Vec<u32> = got.iter().map(|&i| ds.labels()[i]).collect();
        classes.sort_unstable();
        assert_eq!(classes, vec![0, 1, 2]);
    }
}
