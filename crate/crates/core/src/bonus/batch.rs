use crate::diffkit::Matrix;
use crate::{Error, Result};

/// One vectorised environment step: row `e` of each field belongs to env `e`.
///
/// `next_obs` must be the true successor observation, i.e. the final
/// observation of the episode for slots that just finished, not the reset
/// observation the environment hands back.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSlice {
    pub obs: Matrix,
    pub actions: Vec<usize>,
    pub next_obs: Matrix,
    pub extrinsic: Vec<f64>,
    pub dones: Vec<bool>,
}

impl StepSlice {
    pub fn envs(&self) -> usize {
        self.obs.rows()
    }

    pub fn validate(&self, obs_dim: usize) -> Result<()> {
        let n = self.obs.rows();
        if self.obs.cols() != obs_dim || self.next_obs.shape() != (n, obs_dim) {
            return Err(Error::shape(
                "StepSlice",
                format!("{n} x {obs_dim} observations"),
                format!("{:?} / {:?}", self.obs.shape(), self.next_obs.shape()),
            ));
        }
        if self.actions.len() != n || self.extrinsic.len() != n || self.dones.len() != n {
            return Err(Error::shape("StepSlice", format!("{n} entries per field"), "ragged slice"));
        }
        if !self.obs.is_finite() || !self.next_obs.is_finite() {
            return Err(Error::NonFinite("StepSlice observations".into()));
        }
        Ok(())
    }
}

/// Time-major rollout: flat row `t * envs + e` holds step `t` of env `e`.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBatch {
    steps: usize,
    envs: usize,
    pub obs: Matrix,
    pub next_obs: Matrix,
    pub actions: Vec<usize>,
    pub extrinsic: Vec<f64>,
    pub dones: Vec<bool>,
}

impl RolloutBatch {
    pub fn new(
        steps: usize,
        envs: usize,
        obs: Matrix,
        next_obs: Matrix,
        actions: Vec<usize>,
        extrinsic: Vec<f64>,
        dones: Vec<bool>,
    ) -> Result<Self> {
        let n = steps * envs;
        if n == 0 {
            return Err(Error::InvalidArgument("rollout needs at least one step and one env".into()));
        }
        if obs.rows() != n || next_obs.shape() != obs.shape() {
            return Err(Error::shape(
                "RolloutBatch",
                format!("{n} rows"),
                format!("{:?} / {:?}", obs.shape(), next_obs.shape()),
            ));
        }
        if actions.len() != n || extrinsic.len() != n || dones.len() != n {
            return Err(Error::shape("RolloutBatch", format!("{n} entries per field"), "ragged rollout"));
        }
        if !obs.is_finite() || !next_obs.is_finite() {
            return Err(Error::NonFinite("RolloutBatch observations".into()));
        }
        Ok(Self {
            steps,
            envs,
            obs,
            next_obs,
            actions,
            extrinsic,
            dones,
        })
    }

    /// Stacks per-step slices in order.
    pub fn from_slices(slices: &[StepSlice]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidArgument("rollout needs at least one slice".into()))?;
        let envs = first.envs();
        let obs: Vec<&Matrix> = slices.iter().map(|s| &s.obs).collect();
        let next: Vec<&Matrix> = slices.iter().map(|s| &s.next_obs).collect();
        Self::new(
            slices.len(),
            envs,
            Matrix::vstack(&obs)?,
            Matrix::vstack(&next)?,
            slices.iter().flat_map(|s| s.actions.iter().copied()).collect(),
            slices.iter().flat_map(|s| s.extrinsic.iter().copied()).collect(),
            slices.iter().flat_map(|s| s.dones.iter().copied()).collect(),
        )
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn envs(&self) -> usize {
        self.envs
    }

    pub fn len(&self) -> usize {
        self.steps * self.envs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn obs_dim(&self) -> usize {
        self.obs.cols()
    }

    pub fn index(&self, step: usize, env: usize) -> usize {
        step * self.envs + env
    }

    pub fn slice(&self, step: usize) -> StepSlice {
        let rows: Vec<usize> = (0..self.envs).map(|e| self.index(step, e)).collect();
        let range = rows[0]..rows[0] + self.envs;
        StepSlice {
            obs: self.obs.select_rows(&rows),
            next_obs: self.next_obs.select_rows(&rows),
            actions: self.actions[range.clone()].to_vec(),
            extrinsic: self.extrinsic[range.clone()].to_vec(),
            dones: self.dones[range].to_vec(),
        }
    }
}
