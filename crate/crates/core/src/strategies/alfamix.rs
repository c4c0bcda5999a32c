//! Anchor-mixing inconsistency sampling with a fixed mixing coefficient.

use super::kmeans::{kmeans, representatives};
use super::{fill_by_margin, StrategyContext};
use crate::linalg::argmax;
use crate::model::LinearHead;
use crate::seed;

pub(crate) const MIX_ALPHA: f32 = 0.2;

/// Per-class mean feature of the labeled pool; `None` for absent classes.
fn anchors(ctx: &StrategyContext<'_>) -> Vec<Option<Vec<f32>>> {
    let ds = ctx.dataset();
    let (k, d) = (ds.num_classes(), ds.dim());
    let mut sums = vec![vec![0f64; d]; k];
    let mut counts = vec![0usize; k];
    for (&i, &y) in ctx.labeled().iter().zip(ctx.labeled_labels()) {
        counts[y as usize] += 1;
        for (s, &v) in sums[y as usize].iter_mut().zip(ds.row(i)) {
            *s += f64::from(v);
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s.iter().map(|v| (v / c as f64) as f32).collect()))
        .collect()
}

/// Whether mixing `x` toward any anchor changes the head's argmax.
pub(crate) fn flips_under_mixing(head: &LinearHead, x: &[f32], anchors: &[Option<Vec<f32>>]) -> bool {
    let clean = argmax(&head.logits(x));
    let mut mixed = vec![0f32; x.len()];
    anchors.iter().flatten().any(|z| {
        for ((m, &a), &v) in mixed.iter_mut().zip(z).zip(x) {
            *m = MIX_ALPHA * a + (1.0 - MIX_ALPHA) * v;
        }
        argmax(&head.logits(&mixed)) != clean
    })
}

pub(crate) fn select(ctx: &StrategyContext<'_>, b: usize) -> Vec<usize> {
    let ds = ctx.dataset();
    let anchors = anchors(ctx);
    let inconsistent: Vec<usize> = ctx
        .candidates()
        .iter()
        .copied()
        .filter(|&i| flips_under_mixing(ctx.head(), ds.row(i), &anchors))
        .collect();

    if inconsistent.len() >= b {
        let points = ctx.gather(&inconsistent);
        let mut rng = seed::rng(ctx.rng_seed());
        let clustering = kmeans(&points, ds.dim(), b, &mut rng);
        return representatives(&points, ds.dim(), &clustering)
            .into_iter()
            .map(|p| inconsistent[p])
            .collect();
    }
    let mut out = inconsistent;
    fill_by_margin(ctx, &mut out, b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::strategies::select_margin;

    fn threshold_head() -> LinearHead {
        // Class 1 iff x > 0 on a 1-D feature.
        LinearHead::from_parts(2, 1, vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn no_anchors_reduces_to_margin() {
        let ds = Dataset::new("a", vec![-3.0, -0.5, 0.2, 4.0], vec![0, 0, 1, 1], 2, 1).unwrap();
        let head = threshold_head();
        let ctx = StrategyContext::new(&ds, &[], &[0, 1, 2, 3], &head, ds.labels(), 0).unwrap();
        assert_eq!(select(&ctx, 2), select_margin(&ctx, 2));
    }

    #[test]
    fn boundary_point_flips_toward_opposite_anchor() {
        // Anchor of class 0 at -10. x = 0.5 mixes to 0.2·(-10) + 0.8·0.5 = -1.6 → flips.
        let anchors = vec![Some(vec![-10.0]), None];
        assert!(flips_under_mixing(&threshold_head(), &[0.5], &anchors));
        // x = 5 mixes to -2 + 4 = 2 → stays class 1.
        assert!(!flips_under_mixing(&threshold_head(), &[5.0], &anchors));
    }

    #[test]
    fn deep_points_fall_back_to_margin() {
        // Anchors at -10 (class 0) and 10 (class 1); every candidate is deep in
        // its class so no mix crosses zero.
        let ds = Dataset::new(
            "a",
            vec![-10.0, 10.0, -30.0, 30.0, -40.0, 45.0],
            vec![0, 1, 0, 1, 0, 1],
            2,
            1,
        )
        .unwrap();
        let head = threshold_head();
        let labeled = [0usize, 1];
        let ctx = StrategyContext::new(&ds, &labeled, &[2, 3, 4, 5], &head, ds.labels(), 0).unwrap();
        let anchors = anchors(&ctx);
        assert!([2, 3, 4, 5].iter().all(|&i| !flips_under_mixing(&head, ds.row(i), &anchors)));
        assert_eq!(select(&ctx, 2), select_margin(&ctx, 2));
    }
}
