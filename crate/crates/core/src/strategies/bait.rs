//! Greedy log-determinant Fisher design.
//!
//! Each instance contributes `π(x)·h̃h̃ᵀ` with `h̃ = [h(x), 1]` and uncertainty
//! weight `π(x) = 1 − max_c p(c|x)`. Starting from `M = λI + Σ_ℒ π h̃h̃ᵀ`, the
//! candidate with the largest `log(1 + π·h̃ᵀM⁻¹h̃)` is added and `M⁻¹` is
//! updated with Sherman–Morrison.

use nalgebra::{DMatrix, DVector};

use super::StrategyContext;

pub const BAIT_REGULARIZER: f64 = 1e-2;

fn augmented(x: &[f32]) -> DVector<f64> {
    DVector::from_iterator(x.len() + 1, x.iter().map(|&v| f64::from(v)).chain(std::iter::once(1.0)))
}

fn uncertainty(ctx: &StrategyContext<'_>, i: usize) -> f64 {
    let p = ctx.head().proba(ctx.dataset().row(i));
    (1.0 - p.iter().copied().fold(0.0, f64::max)).max(0.0)
}

pub(crate) fn select(ctx: &StrategyContext<'_>, b: usize) -> Vec<usize> {
    let ds = ctx.dataset();
    let labeled: Vec<(DVector<f64>, f64)> = ctx
        .labeled()
        .iter()
        .map(|&l| (augmented(ds.row(l)), uncertainty(ctx, l)))
        .collect();
    let cands = ctx.candidates();
    let candidates: Vec<(DVector<f64>, f64)> = cands
        .iter()
        .map(|&i| (augmented(ds.row(i)), uncertainty(ctx, i)))
        .collect();
    greedy_logdet(ds.dim() + 1, &labeled, &candidates, b)
        .into_iter()
        .map(|p| cands[p])
        .collect()
}

/// Greedy D-optimal selection over weighted rank-one terms; returns positions
/// into `candidates`.
fn greedy_logdet(
    dim: usize,
    labeled: &[(DVector<f64>, f64)],
    candidates: &[(DVector<f64>, f64)],
    b: usize,
) -> Vec<usize> {
    let mut m = DMatrix::<f64>::identity(dim, dim) * BAIT_REGULARIZER;
    for (v, w) in labeled {
        m.ger(*w, v, v, 1.0);
    }
    let mut m_inv = m
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| m.try_inverse())
        .expect("regularized information matrix is positive definite");

    let mut quad: Vec<f64> = candidates.iter().map(|(v, _)| v.dot(&(&m_inv * v))).collect();
    let mut picked = vec![false; candidates.len()];
    let mut out = Vec::with_capacity(b);
    while out.len() < b {
        let mut best = None;
        let mut best_gain = f64::NEG_INFINITY;
        for (p, (_, w)) in candidates.iter().enumerate() {
            if picked[p] {
                continue;
            }
            let gain = (w * quad[p].max(0.0)).ln_1p();
            if gain > best_gain {
                best_gain = gain;
                best = Some(p);
            }
        }
        let p = best.expect("pool holds b candidates");
        picked[p] = true;
        out.push(p);

        let (vp, w) = &candidates[p];
        if *w > 0.0 {
            let u = &m_inv * vp;
            let denom = 1.0 + w * quad[p];
            for (q, (v, _)) in quad.iter_mut().zip(candidates) {
                let s = v.dot(&u);
                *q -= w * s * s / denom;
            }
            m_inv.ger(-w / denom, &u, &u, 1.0);
        }
    }
    out
}
