//! The eight exploration bonuses behind one watch / compute / update
//! contract.
//!
//! * `watch` sees every vectorised step and maintains the per-episode
//!   structures (memories, ellipsoids) plus observation statistics.
//! * `compute` maps a whole rollout to normalised intrinsic rewards without
//!   touching the state.
//! * `update` trains the auxiliary networks on a Bernoulli subsample of the
//!   rollout and commits reward statistics.
//!
//! Episodic bonuses and RE3 score the transition's successor observation,
//! so the reward for step `t` measures how novel `s_{t+1}` is.

mod batch;
mod checkpoint;
mod config;
mod ellipsoid;
pub mod formulas;
mod knn;
pub mod losses;
mod memory;
mod module;

pub use batch::{RolloutBatch, StepSlice};
pub use config::{beta, default_beta0, Algorithm, BonusConfig};
pub use ellipsoid::{elliptical_bonus, EllipsoidInverse};
pub use knn::{knn_distances, l2_distance, Neighbor};
pub use memory::EpisodicMemory;
pub use module::{BonusNets, RewardModule};

use crate::diffkit::Matrix;
use crate::Result;

/// Summary of one `update` call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    /// Mean auxiliary loss over minibatches (0 when nothing was trained).
    pub loss: f64,
    /// Number of rollout samples selected by the update mask.
    pub samples: usize,
    /// Mean raw bonus of the rollout before normalisation (NaN when an
    /// episodic bonus was never watched).
    pub raw_mean: f64,
}

/// Shared contract of bonus modules and their mixtures.
pub trait IntrinsicReward {
    fn watch(&mut self, slice: &StepSlice) -> Result<()>;

    /// Normalised intrinsic rewards of `batch`, time-major. Pure.
    fn compute(&self, batch: &RolloutBatch) -> Result<Vec<f64>>;

    fn update(&mut self, batch: &RolloutBatch) -> Result<UpdateStats>;

    /// Exploration coefficient after `t` environment steps.
    fn beta(&self, t: u64) -> f64;

    /// Warm-start of the observation statistics.
    fn seed_obs_moments(&mut self, obs: &Matrix) -> Result<()>;
}
