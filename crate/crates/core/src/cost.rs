//! Retraining cost accounting.
//!
//! Oracles route every selection-time retraining through a [`CostMeter`], which
//! counts retrainings and the number of training instances fed to them. The
//! closed-form predictors live in [`crate::harness::processed_instances`].

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::model::{train_head, LinearHead, TrainConfig};

#[derive(Debug, Default)]
pub struct CostMeter {
    retrains: AtomicU64,
    processed: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSnapshot {
    pub retrains: u64,
    pub processed_instances: u64,
}

impl std::ops::Sub for CostSnapshot {
    type Output = CostSnapshot;

    fn sub(self, rhs: CostSnapshot) -> CostSnapshot {
        CostSnapshot {
            retrains: self.retrains - rhs.retrains,
            processed_instances: self.processed_instances - rhs.processed_instances,
        }
    }
}

impl CostMeter {
    pub fn new() -> Self {
        Self::default()
    }

    /// [`train_head`] with the call recorded.
    pub fn train(
        &self,
        dataset: &Dataset,
        indices: &[usize],
        labels: &[u32],
        config: &TrainConfig,
    ) -> Result<LinearHead> {
        let head = train_head(dataset, indices, labels, config)?;
        self.retrains.fetch_add(1, Ordering::Relaxed);
        self.processed.fetch_add(indices.len() as u64, Ordering::Relaxed);
        Ok(head)
    }

    pub fn snapshot(&self) -> CostSnapshot {
        CostSnapshot {
            retrains: self.retrains.load(Ordering::Relaxed),
            processed_instances: self.processed.load(Ordering::Relaxed),
        }
    }
}
