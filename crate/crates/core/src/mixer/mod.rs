//! `Fabric`: a weighted sum of several bonus modules behaving as one.

use crate::bonus::{beta, IntrinsicReward, RewardModule, RolloutBatch, StepSlice, UpdateStats};
use crate::diffkit::Matrix;
use crate::{Error, Result};

/// Mixture of bonus modules. Each member normalises its own output with its
/// configured reward normalisation; the fabric adds the weighted results.
#[derive(Clone, Debug)]
pub struct FabricState {
    members: Vec<RewardModule>,
    weights: Vec<f64>,
    pub beta0: f64,
    pub kappa: f64,
}

impl FabricState {
    /// Equal unit weights; the exploration schedule is taken from the first
    /// member's config.
    pub fn new(members: Vec<RewardModule>) -> Result<Self> {
        let weights = vec![1.0; members.len()];
        Self::with_weights(members, weights)
    }

    pub fn with_weights(members: Vec<RewardModule>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("fabric needs at least one member".into()));
        }
        if weights.len() != members.len() {
            return Err(Error::shape("FabricState", members.len(), weights.len()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("fabric weight {w} is not finite")));
        }
        let (beta0, kappa) = (members[0].config().beta0, members[0].config().kappa);
        Ok(Self {
            members,
            weights,
            beta0,
            kappa,
        })
    }

    pub fn with_schedule(mut self, beta0: f64, kappa: f64) -> Self {
        self.beta0 = beta0;
        self.kappa = kappa;
        self
    }

    pub fn members(&self) -> &[RewardModule] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [RewardModule] {
        &mut self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Combines per-member outputs. Terms of each element are summed in
    /// ascending order, so the result does not depend on member order.
    pub fn combine(outputs: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
        let n = outputs.first().map_or(0, Vec::len);
        if outputs.len() != weights.len() || outputs.iter().any(|o| o.len() != n) {
            return Err(Error::shape("FabricState::combine", weights.len(), outputs.len()));
        }
        let mut terms = Vec::with_capacity(outputs.len());
        Ok((0..n)
            .map(|i| {
                terms.clear();
                terms.extend(outputs.iter().zip(weights).filter(|(_, &w)| w != 0.0).map(|(o, &w)| w * o[i]));
                terms.sort_by(f64::total_cmp);
                terms.iter().sum()
            })
            .collect())
    }
}

impl IntrinsicReward for FabricState {
    fn watch(&mut self, slice: &StepSlice) -> Result<()> {
        self.members.iter_mut().try_for_each(|m| m.watch(slice))
    }

    fn compute(&self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        let mut outputs = Vec::with_capacity(self.members.len());
        let mut weights = Vec::with_capacity(self.members.len());
        for (m, &w) in self.members.iter().zip(&self.weights) {
            if w != 0.0 {
                outputs.push(m.compute(batch)?);
                weights.push(w);
            }
        }
        if outputs.is_empty() {
            return Ok(vec![0.0; batch.len()]);
        }
        Self::combine(&outputs, &weights)
    }

    fn update(&mut self, batch: &RolloutBatch) -> Result<UpdateStats> {
        let mut total = UpdateStats {
            loss: 0.0,
            samples: 0,
            raw_mean: 0.0,
        };
        for m in &mut self.members {
            let s = m.update(batch)?;
            total.loss += s.loss;
            total.samples += s.samples;
            total.raw_mean += s.raw_mean / self.weights.len() as f64;
        }
        Ok(total)
    }

    fn beta(&self, t: u64) -> f64 {
        beta(t, self.beta0, self.kappa)
    }

    fn seed_obs_moments(&mut self, obs: &Matrix) -> Result<()> {
        self.members.iter_mut().try_for_each(|m| m.seed_obs_moments(obs))
    }
}
