//! Active learning experiment loop and its metrics.
//!
//! A run draws an initial labeled pool of `b` instances, trains a head, then
//! for each of `A` cycles asks the selector for `b` more instances, moves them
//! into the labeled pool and retrains from scratch. Every repetition is a pure
//! function of the configuration and its repetition index.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{cdo_select, sas_select, CdoConfig, SasConfig};
use crate::boss::{boss_select, infer_pseudo_labels, BossConfig, LabelSource};
use crate::cost::CostMeter;
use crate::cycle::CycleContext;
use crate::data::{make_splits, Dataset, PoolState};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{accuracy, train_head, LinearHead, TrainConfig};
use crate::seed::{mix64, stream};
use crate::strategies::{self, StrategyContext, StrategyId};

pub const SUMMARY_FORMAT_VERSION: u32 = 1;
pub const CURVE_COLUMNS: [&str; 7] = [
    "repetition",
    "cycle",
    "labeled_size",
    "accuracy",
    "picked_strategy",
    "retrain_count",
    "processed_instances",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Strategy(StrategyId),
    Boss(BossConfig),
    Cdo(CdoConfig),
    SasBatch(SasConfig),
}

impl Selector {
    /// Identifier used in reports: the strategy name, `boss`, `cdo` or `sas-batch`.
    pub fn name(&self) -> &'static str {
        match self {
            Selector::Strategy(id) => id.as_str(),
            Selector::Boss(_) => "boss",
            Selector::Cdo(_) => "cdo",
            Selector::SasBatch(_) => "sas-batch",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Selector::Strategy(_) => Ok(()),
            Selector::Boss(c) => c.validate(),
            Selector::Cdo(c) => c.validate(),
            Selector::SasBatch(c) => c.validate(),
        }
    }

    fn with_exec(&self, exec: Exec) -> Self {
        match self {
            Selector::Boss(c) => Selector::Boss(BossConfig { exec, ..c.clone() }),
            Selector::Cdo(c) => Selector::Cdo(CdoConfig { exec, ..c.clone() }),
            other => other.clone(),
        }
    }

    fn with_seed(&self, seed: u64) -> Self {
        match self {
            Selector::Boss(c) => Selector::Boss(BossConfig { seed, ..c.clone() }),
            Selector::Cdo(c) => Selector::Cdo(CdoConfig { seed, ..c.clone() }),
            Selector::SasBatch(c) => Selector::SasBatch(SasConfig { seed, ..c.clone() }),
            other => other.clone(),
        }
    }

    fn label_source(&self) -> LabelSource {
        match self {
            Selector::Boss(c) => c.label_source,
            _ => LabelSource::GroundTruth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub batch_size: usize,
    /// Number of acquisition cycles `A`.
    pub cycles: usize,
    /// Post-cycle training; its seeds are replaced per repetition and cycle.
    pub train: TrainConfig,
    pub repetitions: usize,
    pub master_seed: u64,
    pub eval_fraction: f64,
    pub split_seed: u64,
    pub selector: Selector,
    #[serde(skip)]
    pub exec: Exec,
}

impl ExperimentConfig {
    /// Defaults: 20 cycles, 10 repetitions, 200-epoch training, 20% eval split.
    pub fn new(batch_size: usize, selector: Selector) -> Self {
        Self {
            batch_size,
            cycles: 20,
            train: TrainConfig::default(),
            repetitions: 10,
            master_seed: 0,
            eval_fraction: 0.2,
            split_seed: 0,
            selector,
            exec: Exec::default(),
        }
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        if self.cycles == 0 {
            return Err(Error::validation("cycles must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::validation("repetitions must be at least 1"));
        }
        self.train.validate()?;
        self.selector.validate()
    }

    /// Labels needed by the end of a run: `b · (A + 1)`.
    pub fn budget(&self) -> usize {
        self.batch_size * (self.cycles + 1)
    }

    fn check_budget(&self, train_size: usize) -> Result<()> {
        if self.budget() > train_size {
            return Err(Error::validation(format!(
                "labeling budget b*(A+1) = {}*({}+1) = {} exceeds the train split of {}",
                self.batch_size,
                self.cycles,
                self.budget(),
                train_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub labeled_size: usize,
    pub accuracy: f64,
    /// Origin of the winning batch (BoSS only).
    pub picked: Option<StrategyId>,
    pub retrains: u64,
    pub processed_instances: u64,
    /// Closed-form cost prediction for this cycle's selection.
    pub predicted_processed: u64,
    /// Assessed loss of the chosen batch (BoSS only).
    pub winner_score: Option<f64>,
    /// Assessed loss of every candidate batch (BoSS only).
    pub score_table: Vec<f64>,
    pub batch: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub repetition: usize,
    /// Cycle 0 (initial pool) through cycle `A`.
    pub records: Vec<CycleRecord>,
}

impl LearningCurve {
    pub fn accuracies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.accuracy).collect()
    }

    pub fn aulc(&self, regime: Regime) -> Result<f64> {
        aulc(&self.accuracies(), regime)
    }
}

/// Instances fed to selection-time retraining in one cycle, where
/// `labeled_size` is `|ℒ|` before the cycle: BoSS `T̂·|𝒮|·(|ℒ|+b)`,
/// CDO `m·(b·|ℒ| + b(b+1)/2)`, `sas-batch` `(s+g)·(|ℒ|+b)`, and zero for
/// plain strategies.
pub fn processed_instances(selector: &Selector, b: usize, labeled_size: usize) -> u64 {
    let (b, l) = (b as u64, labeled_size as u64);
    match selector {
        Selector::Strategy(_) => 0,
        Selector::Boss(c) => (c.batches_per_strategy() * c.strategies.len()) as u64 * (l + b),
        Selector::Cdo(c) => c.m as u64 * (b * l + b * (b + 1) / 2),
        Selector::SasBatch(c) => (c.anneal_steps + c.greedy_steps) as u64 * (l + b),
    }
}

/// Selection-time retrainings per cycle.
pub fn predicted_retrains(selector: &Selector, b: usize) -> u64 {
    match selector {
        Selector::Strategy(_) => 0,
        Selector::Boss(c) => (c.batches_per_strategy() * c.strategies.len()) as u64,
        Selector::Cdo(c) => (c.m * b) as u64,
        Selector::SasBatch(c) => (c.anneal_steps + c.greedy_steps) as u64,
    }
}

/// Splits the data and runs every repetition.
pub fn run_experiment(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<LearningCurve>> {
    cfg.validate()?;
    let split = make_splits(dataset, cfg.eval_fraction, cfg.split_seed)?;
    cfg.check_budget(split.unlabeled().len())?;
    let targets = match cfg.selector.label_source() {
        LabelSource::GroundTruth => None,
        LabelSource::Pseudo => Some(infer_pseudo_labels(dataset, &reference_head(dataset, &split, cfg)?)),
    };
    let reps: Vec<usize> = (0..cfg.repetitions).collect();
    cfg.exec
        .try_map(&reps, |&r| run_repetition(dataset, &split, cfg, r, targets.as_deref()))
}

/// θ*: a head trained with ground truth on the whole train split.
pub fn reference_head(dataset: &Dataset, split: &PoolState, cfg: &ExperimentConfig) -> Result<LinearHead> {
    let train = cfg.train.with_seeds(
        mix64(&[cfg.master_seed, stream::REFERENCE_HEAD, stream::TRAIN_INIT]),
        mix64(&[cfg.master_seed, stream::REFERENCE_HEAD, stream::TRAIN_SHUFFLE]),
    );
    train_head(dataset, &split.train_indices(), dataset.labels(), &train)
}

/// One repetition from the initial pool through cycle `A`. `pseudo_labels`
/// replaces ground truth during selection except on the labeled pool.
pub fn run_repetition(
    dataset: &Dataset,
    split: &PoolState,
    cfg: &ExperimentConfig,
    repetition: usize,
    pseudo_labels: Option<&[u32]>,
) -> Result<LearningCurve> {
    cfg.check_budget(split.unlabeled().len())?;
    let b = cfg.batch_size;
    let rep_seed = mix64(&[cfg.master_seed, repetition as u64]);
    let selector = cfg
        .selector
        .with_exec(cfg.exec)
        .with_seed(mix64(&[rep_seed, stream::SELECTOR]));
    let truth = dataset.labels();
    let train_for = |cycle: usize, pool: &PoolState| -> Result<LinearHead> {
        let c = cycle as u64;
        let train = cfg.train.with_seeds(
            mix64(&[rep_seed, c, stream::TRAIN_INIT]),
            mix64(&[rep_seed, c, stream::TRAIN_SHUFFLE]),
        );
        train_head(dataset, pool.labeled(), truth, &train)
    };

    let mut init_rng = crate::seed::rng(mix64(&[rep_seed, stream::INITIAL_POOL]));
    let unlabeled = split.unlabeled();
    let initial: Vec<usize> = rand::seq::index::sample(&mut init_rng, unlabeled.len(), b)
        .into_iter()
        .map(|p| unlabeled[p])
        .collect();
    let mut pool = split.acquire(&initial)?;
    let mut head = train_for(0, &pool)?;
    let mut records = vec![CycleRecord {
        cycle: 0,
        labeled_size: pool.labeled().len(),
        accuracy: accuracy(&head, dataset, pool.eval(), truth)?,
        picked: None,
        retrains: 0,
        processed_instances: 0,
        predicted_processed: 0,
        winner_score: None,
        score_table: Vec::new(),
        batch: initial,
    }];
    let mut targets: Vec<u32> = pseudo_labels.unwrap_or(truth).to_vec();

    for cycle in 1..=cfg.cycles {
        if pseudo_labels.is_some() {
            for &i in pool.labeled() {
                targets[i] = truth[i];
            }
        }
        let meter = CostMeter::new();
        let ctx = CycleContext {
            dataset,
            pool: &pool,
            head: &head,
            batch_size: b,
            cycle: cycle as u64,
            train: &cfg.train,
            targets: &targets,
            meter: &meter,
        };
        let mut picked = None;
        let mut winner_score = None;
        let mut score_table = Vec::new();
        let batch = match &selector {
            Selector::Strategy(id) => {
                let mut sctx = StrategyContext::new(
                    dataset,
                    pool.labeled(),
                    pool.unlabeled(),
                    &head,
                    &targets,
                    mix64(&[rep_seed, cycle as u64, stream::STRATEGY]),
                )?;
                if id.uses_labels() {
                    sctx = sctx.reveal_candidate_labels(&targets);
                }
                strategies::select(*id, &sctx, b)?
            }
            Selector::Boss(c) => {
                let selection = boss_select(&ctx, c)?;
                let winner = selection.winning_batch();
                picked = Some(winner.origin);
                winner_score = winner.score;
                score_table = selection.scores();
                winner.indices.clone()
            }
            Selector::Cdo(c) => cdo_select(&ctx, c)?.batch,
            Selector::SasBatch(c) => sas_select(&ctx, c)?.batch,
        };
        let cost = meter.snapshot();
        let predicted_processed = processed_instances(&selector, b, pool.labeled().len());
        pool = pool.acquire(&batch)?;
        head = train_for(cycle, &pool)?;
        records.push(CycleRecord {
            cycle,
            labeled_size: pool.labeled().len(),
            accuracy: accuracy(&head, dataset, pool.eval(), truth)?,
            picked,
            retrains: cost.retrains,
            processed_instances: cost.processed_instances,
            predicted_processed,
            winner_score,
            score_table,
            batch,
        });
    }
    Ok(LearningCurve { repetition, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Full,
    Low,
    Mid,
    High,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Full, Regime::Low, Regime::Mid, Regime::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::Low => "low",
            Regime::Mid => "mid",
            Regime::High => "high",
        }
    }

    /// Inclusive cycle window for a curve with `cycles` acquisition cycles.
    /// The budget windows overlap at cycles 7 and 14.
    pub fn window(self, cycles: usize) -> (usize, usize) {
        match self {
            Regime::Full => (1, cycles),
            Regime::Low => (1, 7),
            Regime::Mid => (7, 14),
            Regime::High => (14, 20),
        }
    }
}

/// Mean accuracy over the regime's cycle window; cycle 0 is never included.
pub fn aulc(accuracies: &[f64], regime: Regime) -> Result<f64> {
    if accuracies.len() < 2 {
        return Err(Error::validation("a learning curve needs at least one cycle after the initial pool"));
    }
    let cycles = accuracies.len() - 1;
    if regime != Regime::Full && cycles < 20 {
        return Err(Error::validation(format!(
            "the {} regime needs at least 20 cycles, curve has {cycles}",
            regime.as_str()
        )));
    }
    let (lo, hi) = regime.window(cycles);
    let window = &accuracies[lo..=hi];
    Ok(window.iter().sum::<f64>() / window.len() as f64)
}

/// Elementwise `curve − baseline`.
pub fn relative_curve(curve: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    if curve.len() != baseline.len() {
        return Err(Error::validation(format!(
            "curve lengths differ: {} vs {}",
            curve.len(),
            baseline.len()
        )));
    }
    Ok(curve.iter().zip(baseline).map(|(a, b)| a - b).collect())
}

/// Per-cycle mean accuracy over repetitions.
pub fn mean_curve(curves: &[LearningCurve]) -> Result<Vec<f64>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::validation("no learning curves to average"))?;
    let len = first.records.len();
    if curves.iter().any(|c| c.records.len() != len) {
        return Err(Error::validation("learning curves have different lengths"));
    }
    Ok((0..len)
        .map(|i| curves.iter().map(|c| c.records[i].accuracy).sum::<f64>() / curves.len() as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero for a single value.
    pub se: f64,
}

pub fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len() as f64;
    if values.is_empty() {
        return MeanSe { mean: f64::NAN, se: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return MeanSe { mean, se: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    MeanSe {
        mean,
        se: (var / n).sqrt(),
    }
}

/// Per-regime AULC mean and standard error over repetitions. Budget regimes
/// are included only for curves with at least 20 cycles.
pub fn aulc_table(curves: &[LearningCurve]) -> Result<BTreeMap<Regime, MeanSe>> {
    let cycles = mean_curve(curves)?.len() - 1;
    let mut out = BTreeMap::new();
    for regime in Regime::ALL {
        if regime != Regime::Full && cycles < 20 {
            continue;
        }
        let values = curves.iter().map(|c| c.aulc(regime)).collect::<Result<Vec<_>>>()?;
        out.insert(regime, mean_se(&values));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickTable {
    pub strategies: Vec<StrategyId>,
    /// `rows[a-1][s]`: fraction of repetitions whose cycle-`a` winner came
    /// from `strategies[s]`.
    pub rows: Vec<Vec<f64>>,
}

pub fn pick_frequencies(curves: &[LearningCurve]) -> Result<PickTable> {
    let cycles = mean_curve(curves)?.len() - 1;
    let strategies = StrategyId::ALL.to_vec();
    let mut rows = vec![vec![0.0; strategies.len()]; cycles];
    for curve in curves {
        for (a, record) in curve.records.iter().enumerate().skip(1) {
            let id = record.picked.ok_or_else(|| {
                Error::validation(format!(
                    "no pick records: repetition {} cycle {a} has no winning strategy",
                    curve.repetition
                ))
            })?;
            let s = strategies.iter().position(|&x| x == id).expect("listed");
            rows[a - 1][s] += 1.0 / curves.len() as f64;
        }
    }
    Ok(PickTable { strategies, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CurveRow {
    repetition: usize,
    cycle: usize,
    labeled_size: usize,
    accuracy: f64,
    picked_strategy: Option<StrategyId>,
    retrain_count: u64,
    processed_instances: u64,
}

/// Writes curves as CSV with the columns in [`CURVE_COLUMNS`].
pub fn write_curves_csv<W: Write>(writer: W, curves: &[LearningCurve]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for curve in curves {
        for r in &curve.records {
            out.serialize(CurveRow {
                repetition: curve.repetition,
                cycle: r.cycle,
                labeled_size: r.labeled_size,
                accuracy: r.accuracy,
                picked_strategy: r.picked,
                retrain_count: r.retrains,
                processed_instances: r.processed_instances,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads curves written by [`write_curves_csv`]. Only the CSV columns are
/// restored; score tables and batches are left empty.
pub fn read_curves_csv<R: Read>(reader: R) -> Result<Vec<LearningCurve>> {
    let mut input = csv::Reader::from_reader(reader);
    let header: Vec<String> = input.headers()?.iter().map(str::to_owned).collect();
    if header != CURVE_COLUMNS {
        return Err(Error::format("header", format!("unexpected curve columns {header:?}")));
    }
    let mut curves: Vec<LearningCurve> = Vec::new();
    for row in input.deserialize() {
        let row: CurveRow = row?;
        if curves.last().map(|c| c.repetition) != Some(row.repetition) {
            curves.push(LearningCurve {
                repetition: row.repetition,
                records: Vec::new(),
            });
        }
        let curve = curves.last_mut().expect("pushed");
        if row.cycle != curve.records.len() {
            return Err(Error::format(
                "cycle",
                format!("repetition {} jumps to cycle {}", row.repetition, row.cycle),
            ));
        }
        curve.records.push(CycleRecord {
            cycle: row.cycle,
            labeled_size: row.labeled_size,
            accuracy: row.accuracy,
            picked: row.picked_strategy,
            retrains: row.retrain_count,
            processed_instances: row.processed_instances,
            predicted_processed: 0,
            winner_score: None,
            score_table: Vec::new(),
            batch: Vec::new(),
        });
    }
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub selector: String,
    pub batch_size: usize,
    pub cycles: usize,
    pub repetitions: usize,
    pub aulc: BTreeMap<Regime, MeanSe>,
    pub mean_curve: Vec<f64>,
}

impl Summary {
    pub fn new(selector: &str, batch_size: usize, curves: &[LearningCurve]) -> Result<Self> {
        let mean = mean_curve(curves)?;
        Ok(Self {
            format_version: SUMMARY_FORMAT_VERSION,
            selector: selector.to_owned(),
            batch_size,
            cycles: mean.len() - 1,
            repetitions: curves.len(),
            aulc: aulc_table(curves)?,
            mean_curve: mean,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let summary: Summary = serde_json::from_slice(&std::fs::read(path)?)?;
        if summary.format_version != SUMMARY_FORMAT_VERSION {
            return Err(Error::format(
                "format_version",
                format!("unsupported summary version {}", summary.format_version),
            ));
        }
        Ok(summary)
    }
}
