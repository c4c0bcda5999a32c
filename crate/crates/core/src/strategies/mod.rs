//! Batch selection strategies.
//!
//! Each strategy maps a candidate pool, the labeled pool and the current head
//! to `b` distinct candidate indices. Strategies never see the labels of the
//! unlabeled pool unless their id is one of the supervised variants, in which
//! case the caller must reveal them explicitly through
//! [`StrategyContext::reveal_candidate_labels`]. All ties resolve to the lowest
//! dataset index, and all randomness comes from the context seed.

mod alfamix;
mod badge;
mod bait;
mod coreset;
mod dropquery;
pub(crate) mod kmeans;
mod typiclust;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::LinearHead;
use crate::seed;

pub use bait::BAIT_REGULARIZER;
pub use dropquery::{dropout_inconsistency, DROPOUT_REPEATS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyId {
    Random,
    Margin,
    Coreset,
    Badge,
    Bait,
    Typiclust,
    Alfamix,
    Dropquery,
    TypiclustSup,
    DropquerySup,
}

impl StrategyId {
    /// The full ensemble in canonical order.
    pub const ALL: [StrategyId; 10] = [
        StrategyId::Random,
        StrategyId::Margin,
        StrategyId::Coreset,
        StrategyId::Badge,
        StrategyId::Bait,
        StrategyId::Typiclust,
        StrategyId::Alfamix,
        StrategyId::Dropquery,
        StrategyId::TypiclustSup,
        StrategyId::DropquerySup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyId::Random => "random",
            StrategyId::Margin => "margin",
            StrategyId::Coreset => "coreset",
            StrategyId::Badge => "badge",
            StrategyId::Bait => "bait",
            StrategyId::Typiclust => "typiclust",
            StrategyId::Alfamix => "alfamix",
            StrategyId::Dropquery => "dropquery",
            StrategyId::TypiclustSup => "typiclust_sup",
            StrategyId::DropquerySup => "dropquery_sup",
        }
    }

    /// Whether the strategy reads ground-truth labels of the candidate pool.
    pub fn uses_labels(self) -> bool {
        matches!(self, StrategyId::TypiclustSup | StrategyId::DropquerySup)
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = StrategyId::ALL.iter().map(|id| id.as_str()).collect();
                Error::validation(format!(
                    "unknown strategy `{s}` (expected one of {})",
                    known.join(", ")
                ))
            })
    }
}

/// Everything a strategy may look at.
#[derive(Debug, Clone)]
pub struct StrategyContext<'a> {
    dataset: &'a Dataset,
    labeled: &'a [usize],
    labeled_labels: Vec<u32>,
    candidates: Vec<usize>,
    candidate_labels: Option<Vec<u32>>,
    head: &'a LinearHead,
    rng_seed: u64,
}

impl<'a> StrategyContext<'a> {
    /// `label_table` is a full-length table from which only the labels of
    /// `labeled` are copied. The candidate pool is stored in ascending order.
    pub fn new(
        dataset: &'a Dataset,
        labeled: &'a [usize],
        candidate_pool: &[usize],
        head: &'a LinearHead,
        label_table: &[u32],
        rng_seed: u64,
    ) -> Result<Self> {
        if label_table.len() != dataset.len() {
            return Err(Error::validation("label table length differs from dataset size"));
        }
        let labeled_set: HashSet<usize> = labeled.iter().copied().collect();
        let mut candidates = candidate_pool.to_vec();
        candidates.sort_unstable();
        for w in candidates.windows(2) {
            if w[0] == w[1] {
                return Err(Error::validation(format!(
                    "candidate {} appears twice in the pool",
                    w[0]
                )));
            }
        }
        for &i in candidates.iter().chain(labeled) {
            if i >= dataset.len() {
                return Err(Error::validation(format!("index {i} out of bounds")));
            }
        }
        if let Some(&i) = candidates.iter().find(|i| labeled_set.contains(i)) {
            return Err(Error::validation(format!(
                "candidate {i} is already labeled"
            )));
        }
        Ok(Self {
            dataset,
            labeled,
            labeled_labels: labeled.iter().map(|&i| label_table[i]).collect(),
            candidates,
            candidate_labels: None,
            head,
            rng_seed,
        })
    }

    /// Grants access to the candidate-pool labels from `label_table`.
    pub fn reveal_candidate_labels(mut self, label_table: &[u32]) -> Self {
        self.candidate_labels = Some(self.candidates.iter().map(|&i| label_table[i]).collect());
        self
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn labeled(&self) -> &'a [usize] {
        self.labeled
    }

    pub fn labeled_labels(&self) -> &[u32] {
        &self.labeled_labels
    }

    /// Candidate pool, ascending.
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn head(&self) -> &'a LinearHead {
        self.head
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    fn candidate_labels(&self, id: StrategyId) -> Result<&[u32]> {
        self.candidate_labels.as_deref().ok_or_else(|| {
            Error::validation(format!("strategy `{id}` requires candidate labels"))
        })
    }

    fn gather(&self, indices: &[usize]) -> Vec<f32> {
        let mut out = Vec::with_capacity(indices.len() * self.dataset.dim());
        for &i in indices {
            out.extend_from_slice(self.dataset.row(i));
        }
        out
    }
}

/// Runs strategy `id` on `ctx`, returning `b` distinct candidate indices.
pub fn select(id: StrategyId, ctx: &StrategyContext<'_>, b: usize) -> Result<Vec<usize>> {
    if b == 0 {
        return Err(Error::validation("batch size must be at least 1"));
    }
    if ctx.candidates.len() < b {
        return Err(Error::validation(format!(
            "candidate pool of {} is smaller than batch size {b}",
            ctx.candidates.len()
        )));
    }
    let batch = match id {
        StrategyId::Random => select_random(ctx, b),
        StrategyId::Margin => select_margin(ctx, b),
        StrategyId::Coreset => coreset::select(ctx, b),
        StrategyId::Badge => badge::select(ctx, b),
        StrategyId::Bait => bait::select(ctx, b),
        StrategyId::Typiclust => typiclust::select(ctx, b, None),
        StrategyId::TypiclustSup => typiclust::select(ctx, b, Some(ctx.candidate_labels(id)?)),
        StrategyId::Alfamix => alfamix::select(ctx, b),
        StrategyId::Dropquery => dropquery::select(ctx, b, None),
        StrategyId::DropquerySup => dropquery::select(ctx, b, Some(ctx.candidate_labels(id)?)),
    };
    debug_assert_eq!(batch.len(), b);
    Ok(batch)
}

/// Uniform sample without replacement.
pub fn select_random(ctx: &StrategyContext<'_>, b: usize) -> Vec<usize> {
    let mut rng = seed::rng(ctx.rng_seed);
    rand::seq::index::sample(&mut rng, ctx.candidates.len(), b)
        .into_iter()
        .map(|p| ctx.candidates[p])
        .collect()
}

/// Top-1 minus top-2 probability.
pub(crate) fn margin_of(probs: &[f64]) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in probs {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    if second == f64::NEG_INFINITY {
        first
    } else {
        first - second
    }
}

/// `indices` reordered by ascending margin under `head`, ties by index.
pub(crate) fn rank_by_margin(head: &LinearHead, dataset: &Dataset, indices: &[usize]) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = indices
        .iter()
        .map(|&i| (margin_of(&head.proba(dataset.row(i))), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, i)| i).collect()
}

/// The `b` smallest-margin candidates.
pub fn select_margin(ctx: &StrategyContext<'_>, b: usize) -> Vec<usize> {
    let mut ranked = rank_by_margin(ctx.head, ctx.dataset, &ctx.candidates);
    ranked.truncate(b);
    ranked
}

/// Appends margin-ranked candidates not yet in `chosen` until it holds `b`.
pub(crate) fn fill_by_margin(ctx: &StrategyContext<'_>, chosen: &mut Vec<usize>, b: usize) {
    if chosen.len() >= b {
        return;
    }
    let taken: HashSet<usize> = chosen.iter().copied().collect();
    let rest: Vec<usize> = ctx.candidates.iter().copied().filter(|i| !taken.contains(i)).collect();
    for i in rank_by_margin(ctx.head, ctx.dataset, &rest) {
        if chosen.len() == b {
            break;
        }
        chosen.push(i);
    }
}
