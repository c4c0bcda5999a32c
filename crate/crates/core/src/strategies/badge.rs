//! Gradient-embedding diversity via k-means++ seeding.
//!
//! The embedding of a candidate is `(p − onehot(ŷ)) ⊗ h(x)`. Squared distances
//! between outer products factor as
//! `|u_a|²|h_a|² + |u_b|²|h_b|² − 2 (u_a·u_b)(h_a·h_b)`, so the K·D vectors are
//! never materialized.

use super::kmeans::weighted_draw;
use super::StrategyContext;
use crate::linalg::{argmax, dot};
use crate::seed;

struct Embedding {
    residual: Vec<f64>,
    residual_sq: f64,
    feature_sq: f64,
}

fn embed(ctx: &StrategyContext<'_>, i: usize) -> Embedding {
    let x = ctx.dataset().row(i);
    let mut p = ctx.head().proba(x);
    let yhat = argmax(&p);
    p[yhat] -= 1.0;
    let residual_sq = p.iter().map(|v| v * v).sum();
    Embedding {
        residual: p,
        residual_sq,
        feature_sq: f64::from(dot(x, x)),
    }
}

fn sq_distance(ctx: &StrategyContext<'_>, a: (&Embedding, usize), b: (&Embedding, usize)) -> f64 {
    let ds = ctx.dataset();
    let cross_u: f64 = a.0.residual.iter().zip(&b.0.residual).map(|(x, y)| x * y).sum();
    let cross_h: f64 = ds
        .row(a.1)
        .iter()
        .zip(ds.row(b.1))
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    let dist = a.0.residual_sq * a.0.feature_sq + b.0.residual_sq * b.0.feature_sq - 2.0 * cross_u * cross_h;
    dist.max(0.0)
}

pub(crate) fn select(ctx: &StrategyContext<'_>, b: usize) -> Vec<usize> {
    let cands = ctx.candidates();
    let embeddings: Vec<Embedding> = cands.iter().map(|&i| embed(ctx, i)).collect();
    let norms: Vec<f64> = embeddings.iter().map(|e| e.residual_sq * e.feature_sq).collect();

    let mut picked = vec![false; cands.len()];
    let first = argmax(&norms);
    picked[first] = true;
    let mut out = vec![cands[first]];
    let mut nearest: Vec<f64> = (0..cands.len())
        .map(|p| sq_distance(ctx, (&embeddings[p], cands[p]), (&embeddings[first], cands[first])))
        .collect();

    let mut rng = seed::rng(ctx.rng_seed());
    while out.len() < b {
        let weights: Vec<f64> = nearest
            .iter()
            .zip(&picked)
            .map(|(&w, &p)| if p { 0.0 } else { w })
            .collect();
        let next = weighted_draw(&weights, &mut rng)
            .unwrap_or_else(|| picked.iter().position(|p| !p).expect("pool holds b candidates"));
        picked[next] = true;
        out.push(cands[next]);
        for p in 0..cands.len() {
            let dist = sq_distance(ctx, (&embeddings[p], cands[p]), (&embeddings[next], cands[next]));
            if dist < nearest[p] {
                nearest[p] = dist;
            }
        }
    }
    out
}
