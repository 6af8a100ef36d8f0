//! Streaming normalisation: per-dimension running moments, clipped
//! observation standardisation, min-max scaling and the three reward
//! normalisation modes.

use serde::{Deserialize, Serialize};

use crate::diffkit::Matrix;
use crate::{Error, Result};

/// Floor applied to every standard deviation.
pub const STD_EPSILON: f64 = 1e-8;

/// Per-dimension streaming mean and population variance.
///
/// Batches are folded in with the parallel (Chan et al.) merge, so updating
/// with `B1` then `B2` matches the statistics of `B1 ++ B2`. With `decay`
/// set, previously accumulated weight is multiplied by the decay before each
/// merge, turning the statistics into an exponential moving average and
/// making `count` fractional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    pub count: f64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
    pub epsilon: f64,
    pub decay: Option<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            epsilon: STD_EPSILON,
            decay: None,
        }
    }

    pub fn with_decay(mut self, decay: f64) -> Self {
        self.decay = Some(decay);
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_initialized(&self) -> bool {
        self.count > 0.0
    }

    /// Merges a `rows x dim` batch. An empty batch is a no-op.
    pub fn update(&mut self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.dim() {
            return Err(Error::shape("RunningMoments::update", self.dim(), batch.cols()));
        }
        let n = batch.rows();
        if n == 0 {
            return Ok(());
        }
        let mut b_mean = vec![0.0; self.dim()];
        for r in 0..n {
            for (m, &v) in b_mean.iter_mut().zip(batch.row(r)) {
                *m += v;
            }
        }
        b_mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut b_m2 = vec![0.0; self.dim()];
        for r in 0..n {
            for ((s, &v), &m) in b_m2.iter_mut().zip(batch.row(r)).zip(&b_mean) {
                *s += (v - m) * (v - m);
            }
        }
        self.merge(n as f64, &b_mean, &b_m2);
        Ok(())
    }

    /// Scalar convenience for one-dimensional moments.
    pub fn update_scalars(&mut self, values: &[f64]) -> Result<()> {
        let batch = Matrix::from_vec(values.len(), 1, values.to_vec())?;
        self.update(&batch)
    }

    fn merge(&mut self, n: f64, b_mean: &[f64], b_m2: &[f64]) {
        if let Some(d) = self.decay {
            self.count *= d;
            self.m2.iter_mut().for_each(|v| *v *= d);
        }
        let total = self.count + n;
        for i in 0..self.dim() {
            let delta = b_mean[i] - self.mean[i];
            self.mean[i] += delta * n / total;
            self.m2[i] += b_m2[i] + delta * delta * self.count * n / total;
        }
        self.count = total;
    }

    pub fn variance(&self) -> Vec<f64> {
        if self.count <= 0.0 {
            return vec![0.0; self.dim()];
        }
        self.m2.iter().map(|v| (v / self.count).max(0.0)).collect()
    }

    /// Standard deviation floored at `epsilon`.
    pub fn std(&self) -> Vec<f64> {
        self.variance().into_iter().map(|v| v.sqrt().max(self.epsilon)).collect()
    }
}

/// Clipping interval for standardised observations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipRange {
    pub low: f64,
    pub high: f64,
}

impl ClipRange {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low < high) {
            return Err(Error::InvalidArgument(format!("clip range needs low < high, got [{low}, {high}]")));
        }
        Ok(Self { low, high })
    }
}

impl Default for ClipRange {
    fn default() -> Self {
        Self { low: -5.0, high: 5.0 }
    }
}

/// Observation normalisation applied before any bonus network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsNorm {
    /// Identity for the flat gridworld encodings (image inputs would be /255).
    Vanilla,
    /// `clip((obs - running mean) / running std, -5, 5)`.
    Rms,
}

/// Normalisation of a batch of intrinsic rewards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardNorm {
    Vanilla,
    /// Division by the running standard deviation, no centring.
    RmsStd,
    MinMax,
}

impl std::str::FromStr for RewardNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(RewardNorm::Vanilla),
            "rms_std" | "rms" => Ok(RewardNorm::RmsStd),
            "minmax" | "min_max" => Ok(RewardNorm::MinMax),
            other => Err(Error::UnknownVariant {
                kind: "reward normalisation",
                value: other.to_string(),
            }),
        }
    }
}

/// `clip((obs - mean) / std, low, high)` elementwise.
pub fn normalize_obs(m: &RunningMoments, obs: &Matrix, clip: ClipRange) -> Result<Matrix> {
    if !m.is_initialized() {
        return Err(Error::MomentsNotInitialized);
    }
    if obs.cols() != m.dim() {
        return Err(Error::shape("normalize_obs", m.dim(), obs.cols()));
    }
    let std = m.std();
    let mut out = obs.clone();
    for r in 0..out.rows() {
        for ((v, &mu), &sd) in out.row_mut(r).iter_mut().zip(&m.mean).zip(&std) {
            *v = ((*v - mu) / sd).clamp(clip.low, clip.high);
        }
    }
    Ok(out)
}

/// `(x - min) / (max - min)`; a constant input maps to all zeros.
pub fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / range).collect()
}

/// Applies `mode` to a batch of rewards. `m` must be one-dimensional and,
/// for `RmsStd`, already hold reward history.
pub fn normalize_rewards(mode: RewardNorm, m: &RunningMoments, rewards: &[f64]) -> Result<Vec<f64>> {
    match mode {
        RewardNorm::Vanilla => Ok(rewards.to_vec()),
        RewardNorm::MinMax => Ok(minmax_normalize(rewards)),
        RewardNorm::RmsStd => {
            if !m.is_initialized() {
                return Err(Error::MomentsNotInitialized);
            }
            if m.dim() != 1 {
                return Err(Error::shape("normalize_rewards", 1, m.dim()));
            }
            let sd = m.std()[0];
            Ok(rewards.iter().map(|r| r / sd).collect())
        }
    }
}
