//! Greedy k-center selection.

use super::StrategyContext;
use crate::linalg::sq_dist;

/// Repeatedly adds the candidate farthest from its nearest center, where the
/// centers are the labeled pool plus everything selected so far. With an empty
/// labeled pool the first pick is the candidate farthest from the pool mean.
pub(crate) fn select(ctx: &StrategyContext<'_>, b: usize) -> Vec<usize> {
    let ds = ctx.dataset();
    let cands = ctx.candidates();
    let mut nearest = vec![f32::INFINITY; cands.len()];
    for &l in ctx.labeled() {
        let center = ds.row(l);
        for (m, &c) in nearest.iter_mut().zip(cands) {
            *m = m.min(sq_dist(ds.row(c), center));
        }
    }

    let mut picked = vec![false; cands.len()];
    let mut out = Vec::with_capacity(b);
    if ctx.labeled().is_empty() {
        let d = ds.dim();
        let mut mean = vec![0f64; d];
        for &c in cands {
            for (m, &v) in mean.iter_mut().zip(ds.row(c)) {
                *m += f64::from(v);
            }
        }
        let mean: Vec<f32> = mean.iter().map(|m| (m / cands.len() as f64) as f32).collect();
        let first = farthest(cands.iter().map(|&c| sq_dist(ds.row(c), &mean)), &picked);
        commit(ctx, first, &mut picked, &mut nearest, &mut out);
    }
    while out.len() < b {
        let next = farthest(nearest.iter().copied(), &picked);
        commit(ctx, next, &mut picked, &mut nearest, &mut out);
    }
    out
}

fn farthest(dists: impl Iterator<Item = f32>, picked: &[bool]) -> usize {
    let mut best = None;
    let mut best_dist = f32::NEG_INFINITY;
    for (p, dist) in dists.enumerate() {
        if !picked[p] && dist > best_dist {
            best = Some(p);
            best_dist = dist;
        }
    }
    best.expect("pool holds at least b candidates")
}

fn commit(
    ctx: &StrategyContext<'_>,
    pos: usize,
    picked: &mut [bool],
    nearest: &mut [f32],
    out: &mut Vec<usize>,
) {
    let ds = ctx.dataset();
    let cands = ctx.candidates();
    picked[pos] = true;
    out.push(cands[pos]);
    let center = ds.row(cands[pos]);
    for (m, &c) in nearest.iter_mut().zip(cands) {
        *m = m.min(sq_dist(ds.row(c), center));
    }
}
