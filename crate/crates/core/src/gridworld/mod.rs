//! Deterministic sparse-reward DoorKey gridworlds.
//!
//! A level is a square room bounded by walls and split by a vertical wall
//! with a locked door. The agent starts left of the wall next to a key and
//! must pick it up, open the door and walk to the goal in the bottom-right
//! corner. Reward is 1 on reaching the goal and 0 otherwise.

mod env;
mod level;
mod vec_env;

pub use env::{encode_obs, Action, EnvState, StepResult, ACTION_COUNT, OBS_PLANES};
pub use level::{generate_level, GridLevel, Pos};
pub use vec_env::{EnvConfig, EpisodeStats, VecEnv, VecStep};
