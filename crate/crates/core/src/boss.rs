//! Best-of-strategy batch oracle.
//!
//! Each cycle, every strategy in the ensemble proposes `⌊T/|𝒮|⌋` batches, each
//! on a candidate pool of random size `k ∈ [b, k_max]` sampled uniformly from
//! the unlabeled pool. Every proposal is assessed by retraining a fresh head on
//! `ℒ ∪ batch` for a reduced number of epochs and measuring its loss on the
//! evaluation set; the lowest-loss batch wins.
//!
//! Seeds: the batch with strategy ordinal `s` (position in
//! [`StrategyId::ALL`]) and batch ordinal `t` in cycle `c` uses
//! `mix64(&[cfg.seed, c, s, t])`. Its candidate pool is drawn from
//! `mix64(&[batch_seed, stream::POOL_SAMPLING])` and the strategy receives
//! `mix64(&[batch_seed, stream::STRATEGY])`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cycle::CycleContext;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{evaluate, LinearHead, LossKind};
use crate::seed::{self, mix64, stream};
use crate::strategies::{self, StrategyContext, StrategyId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    #[default]
    GroundTruth,
    /// Labels predicted by a reference head trained on the full train split.
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BossConfig {
    /// Total number of candidate batches `T`.
    pub num_batches: usize,
    pub strategies: Vec<StrategyId>,
    /// Largest candidate pool; `None` means `max(1000, 10·b)`.
    pub k_max: Option<usize>,
    pub assess_epochs: usize,
    pub loss: LossKind,
    pub label_source: LabelSource,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for BossConfig {
    fn default() -> Self {
        Self {
            num_batches: 100,
            strategies: StrategyId::ALL.to_vec(),
            k_max: None,
            assess_epochs: 50,
            loss: LossKind::ZeroOne,
            label_source: LabelSource::GroundTruth,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl BossConfig {
    pub const PRESETS: [&'static str; 4] = ["boss", "boss-s", "boss-xs", "boss-xxs"];

    /// Named runtime/quality trade-offs: `boss` (T=100, 50 epochs), `boss-s`
    /// (50, 25), `boss-xs` (25, 10) and `boss-xxs` (10, 5).
    pub fn preset(name: &str) -> Option<Self> {
        let (num_batches, assess_epochs) = match name {
            "boss" => (100, 50),
            "boss-s" => (50, 25),
            "boss-xs" => (25, 10),
            "boss-xxs" => (10, 5),
            _ => return None,
        };
        Some(Self {
            num_batches,
            assess_epochs,
            ..Self::default()
        })
    }

    /// `⌊T / |𝒮|⌋`
    pub fn batches_per_strategy(&self) -> usize {
        self.num_batches / self.strategies.len().max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::validation("the strategy ensemble is empty"));
        }
        let mut sorted = self.strategies.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.strategies.len() {
            return Err(Error::validation("the strategy ensemble lists a strategy twice"));
        }
        if self.num_batches < self.strategies.len() {
            return Err(Error::validation(format!(
                "num_batches T={} is smaller than the ensemble size {} (no batch per strategy)",
                self.num_batches,
                self.strategies.len()
            )));
        }
        if self.assess_epochs == 0 {
            return Err(Error::validation("assess_epochs must be at least 1"));
        }
        if self.k_max == Some(0) {
            return Err(Error::validation("k_max must be at least 1"));
        }
        Ok(())
    }

    /// Upper end of the candidate-pool size range for batch size `b` and an
    /// unlabeled pool of `unlabeled` instances, clamped to `[b, |𝒰|]`.
    pub fn pool_size_bound(&self, b: usize, unlabeled: usize) -> usize {
        self.k_max
            .unwrap_or_else(|| (10 * b).max(1000))
            .min(unlabeled)
            .max(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateBatch {
    pub indices: Vec<usize>,
    pub origin: StrategyId,
    pub candidate_pool_size: usize,
    /// Evaluation loss after assessment.
    pub score: Option<f64>,
}

fn strategy_ordinal(id: StrategyId) -> u64 {
    StrategyId::ALL.iter().position(|&s| s == id).expect("listed") as u64
}

/// Proposes `⌊T/|𝒮|⌋` batches per strategy, in ensemble order.
pub fn generate_candidate_batches(ctx: &CycleContext<'_>, cfg: &BossConfig) -> Result<Vec<CandidateBatch>> {
    cfg.validate()?;
    ctx.check()?;
    let b = ctx.batch_size;
    let unlabeled = ctx.pool.unlabeled();
    let upper = cfg.pool_size_bound(b, unlabeled.len());
    let per_strategy = cfg.batches_per_strategy();
    let jobs: Vec<(StrategyId, usize)> = cfg
        .strategies
        .iter()
        .flat_map(|&s| (0..per_strategy).map(move |t| (s, t)))
        .collect();

    cfg.exec.try_map(&jobs, |&(id, t)| {
        let batch_seed = mix64(&[cfg.seed, ctx.cycle, strategy_ordinal(id), t as u64]);
        let mut rng = seed::rng(mix64(&[batch_seed, stream::POOL_SAMPLING]));
        let k = rng.random_range(b..=upper);
        let pool: Vec<usize> = rand::seq::index::sample(&mut rng, unlabeled.len(), k)
            .into_iter()
            .map(|p| unlabeled[p])
            .collect();
        let mut sctx = StrategyContext::new(
            ctx.dataset,
            ctx.pool.labeled(),
            &pool,
            ctx.head,
            ctx.targets,
            mix64(&[batch_seed, stream::STRATEGY]),
        )?;
        if id.uses_labels() {
            sctx = sctx.reveal_candidate_labels(ctx.targets);
        }
        Ok(CandidateBatch {
            indices: strategies::select(id, &sctx, b)?,
            origin: id,
            candidate_pool_size: k,
            score: None,
        })
    })
}

/// Evaluation loss of a head retrained on `ℒ ∪ batch`.
pub fn assess_batch(ctx: &CycleContext<'_>, batch: &[usize], cfg: &BossConfig) -> Result<f64> {
    assess_extension(ctx, batch, cfg.seed, cfg.assess_epochs, cfg.loss)
}

pub(crate) fn assess_extension(
    ctx: &CycleContext<'_>,
    batch: &[usize],
    oracle_seed: u64,
    epochs: usize,
    loss: LossKind,
) -> Result<f64> {
    let head = retrain_extended(ctx, batch, oracle_seed, epochs)?;
    evaluate(&head, ctx.dataset, ctx.pool.eval(), ctx.targets, loss)
}

pub(crate) fn retrain_extended(
    ctx: &CycleContext<'_>,
    batch: &[usize],
    oracle_seed: u64,
    epochs: usize,
) -> Result<LinearHead> {
    if let Some(&i) = batch.iter().find(|&&i| ctx.pool.unlabeled().binary_search(&i).is_err()) {
        return Err(Error::validation(format!("batch index {i} is not unlabeled")));
    }
    // sorted so the score depends on the set, not on the selection order
    let mut sorted = batch.to_vec();
    sorted.sort_unstable();
    let mut extended = Vec::with_capacity(ctx.pool.labeled().len() + batch.len());
    extended.extend_from_slice(ctx.pool.labeled());
    extended.extend_from_slice(&sorted);
    let config = ctx.assessment_config(oracle_seed, epochs);
    ctx.meter.train(ctx.dataset, &extended, ctx.targets, &config)
}

/// Position of the lowest-scoring batch; ties go to the earliest.
pub fn select_best_batch(candidates: &[CandidateBatch]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::validation("no candidate batches to choose from"));
    }
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let score = c
            .score
            .ok_or_else(|| Error::validation(format!("candidate batch {i} was never assessed")))?;
        if score < best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

/// Hard pseudo-labels `argmax_c p(c | x, θ*)` for every instance.
pub fn infer_pseudo_labels(dataset: &Dataset, reference_head: &LinearHead) -> Vec<u32> {
    (0..dataset.len())
        .map(|i| reference_head.predict(dataset.row(i)) as u32)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BossSelection {
    /// All assessed candidates in generation order.
    pub candidates: Vec<CandidateBatch>,
    pub winner: usize,
}

impl BossSelection {
    pub fn winning_batch(&self) -> &CandidateBatch {
        &self.candidates[self.winner]
    }

    pub fn scores(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.score.unwrap_or(f64::NAN)).collect()
    }
}

/// Generates, assesses and picks the best candidate batch.
pub fn boss_select(ctx: &CycleContext<'_>, cfg: &BossConfig) -> Result<BossSelection> {
    let mut candidates = generate_candidate_batches(ctx, cfg)?;
    let scores = cfg
        .exec
        .try_map(&candidates, |c| assess_batch(ctx, &c.indices, cfg))?;
    for (c, s) in candidates.iter_mut().zip(scores) {
        c.score = Some(s);
    }
    let winner = select_best_batch(&candidates)?;
    Ok(BossSelection { candidates, winner })
}
