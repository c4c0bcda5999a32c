//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use bossal::data::{generate_synthetic, make_splits, Dataset, PoolState, SyntheticSpec};
use bossal::model::{train_head, LinearHead, TrainConfig};
use bossal::{CostMeter, CycleContext};

pub fn blobs(num_classes: usize, dim: usize, per_class: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        num_classes,
        dim,
        per_class,
        cluster_spread: 1.0,
        class_separation: 4.0,
        seed,
    })
    .unwrap()
}

/// A split with `initial` labeled instances and a head trained on them.
pub struct Fixture {
    pub dataset: Dataset,
    pub pool: PoolState,
    pub head: LinearHead,
    pub train: TrainConfig,
    pub meter: CostMeter,
}

impl Fixture {
    pub fn new(dataset: Dataset, initial: usize, epochs: usize) -> Self {
        let split = make_splits(&dataset, 0.2, 0).unwrap();
        let labeled: Vec<usize> = split.unlabeled()[..initial].to_vec();
        let pool = split.acquire(&labeled).unwrap();
        let train = TrainConfig {
            epochs,
            ..TrainConfig::default()
        };
        let head = train_head(&dataset, pool.labeled(), dataset.labels(), &train).unwrap();
        Self {
            dataset,
            pool,
            head,
            train,
            meter: CostMeter::new(),
        }
    }

    pub fn ctx(&self, batch_size: usize, cycle: u64) -> CycleContext<'_> {
        CycleContext {
            dataset: &self.dataset,
            pool: &self.pool,
            head: &self.head,
            batch_size,
            cycle,
            train: &self.train,
            targets: self.dataset.labels(),
            meter: &self.meter,
        }
    }
}
