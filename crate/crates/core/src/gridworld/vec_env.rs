use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{encode_obs, generate_level, Action, EnvState, GridLevel, OBS_PLANES};
use crate::diffkit::{Matrix, SeededRng};
use crate::{Error, Result};

/// Environment family shared by every slot of a [`VecEnv`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub size: usize,
    /// Resample a fresh level whenever an episode ends.
    pub contextual: bool,
    /// Defaults to `4 * size^2`.
    pub max_steps: Option<usize>,
    /// Level seed of the singleton variant.
    pub level_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            size: 9,
            contextual: false,
            max_steps: None,
            level_seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn max_steps(&self) -> usize {
        self.max_steps.unwrap_or(4 * self.size * self.size)
    }

    pub fn obs_dim(&self) -> usize {
        OBS_PLANES * self.size * self.size
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    pub episode_return: f64,
    pub length: usize,
}

/// Batched result of [`VecEnv::step`]. `obs` rows of finished slots are
/// already the first observation of the next episode; the last observation
/// of the finished episode is kept in `final_obs`.
#[derive(Clone, Debug)]
pub struct VecStep {
    pub obs: Matrix,
    pub rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    pub final_obs: Vec<Option<Vec<f64>>>,
    pub episodes: Vec<Option<EpisodeStats>>,
}

impl VecStep {
    pub fn done(&self, slot: usize) -> bool {
        self.terminated[slot] || self.truncated[slot]
    }
}

/// Fixed number of independent environments stepped in lockstep with
/// automatic reset.
#[derive(Clone, Debug)]
pub struct VecEnv {
    config: EnvConfig,
    envs: Vec<EnvState>,
    rng: SeededRng,
    fixed_level: Option<Arc<GridLevel>>,
    returns: Vec<f64>,
}

impl VecEnv {
    /// Level seeds of the contextual variant are drawn from `seed`'s stream
    /// in slot order, at construction and at every reset.
    pub fn new(config: EnvConfig, n_envs: usize, seed: u64) -> Result<Self> {
        if n_envs == 0 {
            return Err(Error::InvalidArgument("VecEnv needs at least one environment".into()));
        }
        let fixed_level = if config.contextual {
            None
        } else {
            Some(Arc::new(generate_level(config.level_seed, config.size)?))
        };
        let mut venv = Self {
            envs: Vec::with_capacity(n_envs),
            rng: SeededRng::new(seed),
            returns: vec![0.0; n_envs],
            fixed_level,
            config,
        };
        for _ in 0..n_envs {
            let fresh = venv.fresh_state()?;
            venv.envs.push(fresh);
        }
        Ok(venv)
    }

    fn fresh_state(&mut self) -> Result<EnvState> {
        let level = match &self.fixed_level {
            Some(l) => Arc::clone(l),
            None => Arc::new(generate_level(self.rng.next_u64(), self.config.size)?),
        };
        Ok(EnvState::new(level, self.config.max_steps()))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn num_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.config.obs_dim()
    }

    pub fn states(&self) -> &[EnvState] {
        &self.envs
    }

    /// Current observation of every slot, one row each.
    pub fn observe(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self.envs.iter().map(encode_obs).collect();
        Matrix::from_rows(&rows).expect("equal encodings")
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<VecStep> {
        let n = self.envs.len();
        if actions.len() != n {
            return Err(Error::shape("VecEnv::step", format!("{n} actions"), actions.len()));
        }
        let mut obs = Matrix::zeros(n, self.obs_dim());
        let mut out = VecStep {
            obs: Matrix::zeros(0, 0),
            rewards: vec![0.0; n],
            terminated: vec![false; n],
            truncated: vec![false; n],
            final_obs: vec![None; n],
            episodes: vec![None; n],
        };
        for (i, &action) in actions.iter().enumerate() {
            let r = self.envs[i].step(action);
            self.returns[i] += r.reward;
            out.rewards[i] = r.reward;
            out.terminated[i] = r.terminated;
            out.truncated[i] = r.truncated;
            if r.terminated || r.truncated {
                out.episodes[i] = Some(EpisodeStats {
                    episode_return: self.returns[i],
                    length: self.envs[i].step_count,
                });
                self.returns[i] = 0.0;
                self.envs[i] = self.fresh_state()?;
                obs.row_mut(i).copy_from_slice(&encode_obs(&self.envs[i]));
                out.final_obs[i] = Some(r.obs);
            } else {
                obs.row_mut(i).copy_from_slice(&r.obs);
            }
        }
        out.obs = obs;
        Ok(out)
    }

    /// Same as [`VecEnv::step`] with raw action indices.
    pub fn step_indices(&mut self, actions: &[usize]) -> Result<VecStep> {
        let acts = actions
            .iter()
            .map(|&a| Action::from_index(a).ok_or_else(|| Error::InvalidArgument(format!("action index {a} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        self.step(&acts)
    }
}
