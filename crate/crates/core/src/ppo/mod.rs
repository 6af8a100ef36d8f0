//! Compact PPO: GAE, one- or two-head critics, clipped surrogate updates
//! and the rollout / bonus / update loop.

mod config;
mod gae;
mod policy;
mod train;
mod update;

pub use config::{BetaUnit, HeadMode, PpoConfig};
pub use gae::{advantages_two_head, gae, normalize_advantages, Stream, TwoHeadAdvantages};
pub use policy::{log_softmax, ActOutput, PolicyParams};
pub use train::{train_loop, RolloutRecord, RunLog, TrainOptions, TRAILING_EPISODES};
pub use update::{clipped_surrogate, ppo_update, PpoMetrics, Targets, Trajectory};
