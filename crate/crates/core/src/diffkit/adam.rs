use serde::{Deserialize, Serialize};

use super::{MlpNet, NetGrads};
use crate::{Error, Result};

/// Adam optimiser state for one [`MlpNet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zeroed accumulators shaped like `net`, with betas (0.9, 0.999) and eps 1e-8.
    pub fn new(net: &MlpNet, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = net.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// One bias-corrected Adam update of `net` in place.
    ///
    /// Gradients are validated before anything is touched, so a non-finite
    /// entry leaves both the network and the optimiser state unchanged.
    pub fn step(&mut self, net: &mut MlpNet, grads: &NetGrads) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be >= 0", self.learning_rate)));
        }
        let gt = grads.tensors();
        {
            let pt = net.tensors();
            if gt.len() != pt.len() || gt.len() != self.first_moment.len() {
                return Err(Error::shape("AdamState::step", pt.len(), gt.len()));
            }
            for (i, ((g, p), m)) in gt.iter().zip(&pt).zip(&self.first_moment).enumerate() {
                if g.len() != p.len() || g.len() != m.len() {
                    return Err(Error::shape("AdamState::step", p.len(), format!("{} for {}", g.len(), MlpNet::tensor_name(i))));
                }
                if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("gradient of {}[{j}]", MlpNet::tensor_name(i))));
                }
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        for (((p, g), m), v) in net
            .tensors_mut()
            .into_iter()
            .zip(gt)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales all gradient sets jointly so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut NetGrads], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.sq_norm()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / (norm + 1e-6);
        for g in grads.iter_mut() {
            g.scale(s);
        }
    }
    norm
}
