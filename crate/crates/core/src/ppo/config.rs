use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Value-estimation layout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// One critic on `R + beta * I`.
    #[default]
    Sum,
    /// Separate extrinsic and intrinsic critics whose advantages are added.
    TwoHead,
}

/// Unit in which the exploration coefficient decays.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaUnit {
    /// `t` counts environment transitions summed over all envs.
    #[default]
    EnvStep,
    /// `t` counts rollouts.
    Rollout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    /// Discount of the intrinsic stream in two-head mode.
    pub int_gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub epochs: usize,
    /// Samples per minibatch.
    pub minibatch: usize,
    pub lr: f64,
    pub rollout_len: usize,
    pub n_envs: usize,
    pub max_grad_norm: f64,
    /// Clipped value loss when set; plain MSE otherwise.
    pub value_clip: Option<f64>,
    /// Cut intrinsic bootstrapping at episode ends (two-head mode).
    pub int_episodic: bool,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            int_gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.1,
            entropy_coef: 0.01,
            value_coef: 0.5,
            epochs: 4,
            minibatch: 128,
            lr: 2.5e-4,
            rollout_len: 32,
            n_envs: 16,
            max_grad_norm: 0.5,
            value_clip: None,
            int_episodic: false,
            hidden: 64,
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.rollout_len * self.n_envs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| {
            Err(Error::Config {
                path: format!("ppo.{field}"),
                message: msg,
            })
        };
        for (name, v) in [("gamma", self.gamma), ("int_gamma", self.int_gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(name, format!("{v} is outside [0, 1]"));
            }
        }
        if !(self.clip > 0.0) {
            return bad("clip", format!("{} must be > 0", self.clip));
        }
        if !(self.lr >= 0.0) {
            return bad("lr", format!("{} must be >= 0", self.lr));
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm", format!("{} must be > 0", self.max_grad_norm));
        }
        if let Some(c) = self.value_clip {
            if !(c > 0.0) {
                return bad("value_clip", format!("{c} must be > 0"));
            }
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("minibatch", self.minibatch),
            ("rollout_len", self.rollout_len),
            ("n_envs", self.n_envs),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return bad(name, "must be at least 1".into());
            }
        }
        Ok(())
    }
}
