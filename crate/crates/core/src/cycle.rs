//! Inputs shared by every oracle for one selection round.

use crate::cost::CostMeter;
use crate::data::{Dataset, PoolState};
use crate::error::{Error, Result};
use crate::model::{LinearHead, TrainConfig};
use crate::seed::{self, mix64};

#[derive(Debug, Clone, Copy)]
pub struct CycleContext<'a> {
    pub dataset: &'a Dataset,
    pub pool: &'a PoolState,
    /// The head trained after the previous cycle.
    pub head: &'a LinearHead,
    pub batch_size: usize,
    pub cycle: u64,
    /// Post-cycle training settings; oracles override epochs and seeds.
    pub train: &'a TrainConfig,
    /// Labels used for retraining and evaluation during selection, either
    /// ground truth or pseudo-labels (with true labels on the labeled pool).
    pub targets: &'a [u32],
    pub meter: &'a CostMeter,
}

impl CycleContext<'_> {
    /// Training settings for selection-time retraining: `epochs` epochs and
    /// init/shuffle seeds fixed for the whole cycle.
    pub fn assessment_config(&self, oracle_seed: u64, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            init_seed: mix64(&[oracle_seed, self.cycle, seed::stream::ASSESS_INIT]),
            shuffle_seed: mix64(&[oracle_seed, self.cycle, seed::stream::ASSESS_SHUFFLE]),
            ..self.train.clone()
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be at least 1"));
        }
        if self.pool.unlabeled().len() < self.batch_size {
            return Err(Error::validation(format!(
                "unlabeled pool of {} is smaller than batch size {}",
                self.pool.unlabeled().len(),
                self.batch_size
            )));
        }
        if self.targets.len() != self.dataset.len() {
            return Err(Error::validation("target table length differs from dataset size"));
        }
        Ok(())
    }
}
