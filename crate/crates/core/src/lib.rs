//! Intrinsic-reward engine for exploration in reinforcement learning.
//!
//! The crate is organised bottom-up:
//!
//! * [`diffkit`]: dense matrices, MLPs with reverse-mode gradients, Adam and
//!   the orthogonal / uniform initialisers.
//! * [`normstats`]: streaming moments plus the observation and reward
//!   normalisers.
//! * [`gridworld`]: seedable sparse-reward DoorKey levels and a vectorised
//!   auto-resetting environment.
//! * [`bonus`]: the eight exploration bonuses behind a shared
//!   watch / compute / update contract.
//! * [`mixer`]: the `Fabric` combinator that sums several bonuses.
//! * [`ppo`]: a compact clipped-surrogate trainer with one- or two-head
//!   value estimation.
//! * [`harness`]: configuration, experiment runner, ablation matrix and SVG
//!   plotting.

pub mod bonus;
pub mod diffkit;
mod error;
pub mod gridworld;
pub mod harness;
pub mod mixer;
pub mod normstats;
pub mod ppo;

pub use error::{Error, Result};
