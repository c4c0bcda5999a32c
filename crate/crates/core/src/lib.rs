//! Pool-based active learning simulation over precomputed feature vectors.
//!
//! The engine trains linear heads on frozen embeddings and drives the active
//! learning loop with either a single selection strategy, the best-of-strategy
//! batch oracle in [`boss`], or one of the baseline oracles in [`baselines`].
//! Every random decision is derived from explicit 64-bit seeds (see [`seed`]),
//! so runs replay bit-for-bit regardless of thread scheduling.

pub mod baselines;
pub mod boss;
pub mod cost;
pub mod cycle;
pub mod data;
pub mod error;
pub mod exec;
pub mod harness;
pub mod model;
pub mod seed;
pub mod strategies;

mod linalg;

pub use crate::cost::{CostMeter, CostSnapshot};
pub use crate::cycle::CycleContext;
pub use crate::data::{Dataset, PoolState, SyntheticSpec};
pub use crate::error::{Error, Result};
pub use crate::exec::Exec;
pub use crate::model::{LinearHead, LossKind, TrainConfig};
pub use crate::strategies::StrategyId;
