use super::gae::normalize_advantages;
use super::policy::log_softmax;
use super::{PolicyParams, PpoConfig};
use crate::bonus::RolloutBatch;
use crate::diffkit::{clip_global_norm, Matrix, NetGrads, SeededRng};
use crate::{Error, Result};

/// A rollout together with what the behaviour policy recorded for it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub batch: RolloutBatch,
    pub log_probs: Vec<f64>,
    pub v_ext: Vec<f64>,
    pub v_int: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        let n = self.batch.len();
        if self.log_probs.len() != n || self.v_ext.len() != n || self.v_int.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::shape("Trajectory", format!("{n} entries per field"), "ragged trajectory"));
        }
        if let Some(i) = self.log_probs.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite(format!("behaviour log-probability at sample {i}")));
        }
        Ok(())
    }
}

/// Regression targets of the critics.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    pub advantages: Vec<f64>,
    pub ext_returns: Vec<f64>,
    /// Required exactly when the policy has an intrinsic head.
    pub int_returns: Option<Vec<f64>>,
}

/// Averages over every minibatch of the update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

/// Value loss `0.5 (v - R)^2` (optionally clipped around the old value) and
/// its derivative in `v`.
fn value_term(v: f64, old: f64, ret: f64, clip: Option<f64>) -> (f64, f64) {
    let plain = 0.5 * (v - ret).powi(2);
    match clip {
        None => (plain, v - ret),
        Some(c) => {
            let vc = old + (v - old).clamp(-c, c);
            let clipped = 0.5 * (vc - ret).powi(2);
            if plain >= clipped {
                (plain, v - ret)
            } else {
                let inside = if (v - old).abs() < c { 1.0 } else { 0.0 };
                (clipped, (vc - ret) * inside)
            }
        }
    }
}

/// Clipped-surrogate loss of one sample and its derivative with respect to
/// the new log-probability. The derivative is zero whenever the clipped
/// branch is the active one.
pub fn clipped_surrogate(new_log_prob: f64, old_log_prob: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let ratio = (new_log_prob - old_log_prob).exp();
    let unclipped = -advantage * ratio;
    let clipped = -advantage * ratio.clamp(1.0 - clip, 1.0 + clip);
    if unclipped >= clipped {
        (unclipped, -advantage * ratio)
    } else {
        (clipped, 0.0)
    }
}

/// `epochs` passes of shuffled minibatch updates. Advantages are
/// standardised over the whole batch first.
pub fn ppo_update(
    params: &mut PolicyParams,
    traj: &Trajectory,
    targets: &Targets,
    config: &PpoConfig,
    rng: &mut SeededRng,
) -> Result<PpoMetrics> {
    traj.validate()?;
    let n = traj.batch.len();
    if targets.advantages.len() != n || targets.ext_returns.len() != n {
        return Err(Error::shape("ppo_update", format!("{n} targets"), targets.advantages.len()));
    }
    let two_head = params.critic_int.is_some();
    if two_head != targets.int_returns.is_some() || two_head != traj.v_int.is_some() {
        return Err(Error::WrongMode {
            expected: if two_head { "two_head" } else { "sum" },
        });
    }
    let adv = normalize_advantages(&targets.advantages);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut metrics = PpoMetrics::default();
    let mut count = 0usize;
    for _ in 0..config.epochs {
        rng.shuffle(&mut idx);
        for chunk in idx.chunks(config.minibatch) {
            let m = minibatch_step(params, traj, targets, &adv, chunk, config)?;
            metrics.policy_loss += m.policy_loss;
            metrics.value_loss += m.value_loss;
            metrics.entropy += m.entropy;
            metrics.approx_kl += m.approx_kl;
            metrics.clip_fraction += m.clip_fraction;
            metrics.grad_norm += m.grad_norm;
            count += 1;
        }
    }
    let c = count.max(1) as f64;
    metrics.policy_loss /= c;
    metrics.value_loss /= c;
    metrics.entropy /= c;
    metrics.approx_kl /= c;
    metrics.clip_fraction /= c;
    metrics.grad_norm /= c;
    Ok(metrics)
}

fn minibatch_step(
    params: &mut PolicyParams,
    traj: &Trajectory,
    targets: &Targets,
    adv: &[f64],
    chunk: &[usize],
    config: &PpoConfig,
) -> Result<PpoMetrics> {
    let m = chunk.len() as f64;
    let obs = traj.batch.obs.select_rows(chunk);
    let fwd = params.forward(&obs, true)?;
    let logp = log_softmax(&fwd.logits);
    let n_actions = logp.cols();
    let mut d_logits = Matrix::zeros(chunk.len(), n_actions);
    let mut d_ext = vec![0.0; chunk.len()];
    let mut d_int = fwd.v_int.as_ref().map(|_| vec![0.0; chunk.len()]);
    let mut out = PpoMetrics::default();
    for (r, &i) in chunk.iter().enumerate() {
        let a = traj.batch.actions[i];
        let lp = logp.row(r);
        let new = lp[a];
        let (loss, g_lp) = clipped_surrogate(new, traj.log_probs[i], adv[i], config.clip);
        let ratio = (new - traj.log_probs[i]).exp();
        let entropy: f64 = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
        out.policy_loss += loss / m;
        out.entropy += entropy / m;
        out.approx_kl += ((ratio - 1.0) - (new - traj.log_probs[i])) / m;
        if (ratio - 1.0).abs() > config.clip {
            out.clip_fraction += 1.0 / m;
        }
        let dst = d_logits.row_mut(r);
        for (j, d) in dst.iter_mut().enumerate() {
            let p = lp[j].exp();
            let onehot = if j == a { 1.0 } else { 0.0 };
            *d = g_lp * (onehot - p) / m + config.entropy_coef * p * (lp[j] + entropy) / m;
        }
        let (vl, dv) = value_term(fwd.v_ext[r], traj.v_ext[i], targets.ext_returns[i], config.value_clip);
        out.value_loss += vl / m;
        d_ext[r] = config.value_coef * dv / m;
        if let (Some(d), Some(vi), Some(old), Some(ret)) = (d_int.as_mut(), &fwd.v_int, &traj.v_int, &targets.int_returns) {
            let (vl, dv) = value_term(vi[r], old[i], ret[i], config.value_clip);
            out.value_loss += vl / m;
            d[r] = config.value_coef * dv / m;
        }
    }
    let total = out.policy_loss - config.entropy_coef * out.entropy + config.value_coef * out.value_loss;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!(
            "PPO loss (policy {}, value {}, entropy {})",
            out.policy_loss, out.value_loss, out.entropy
        )));
    }
    let mut grads = params.backward(fwd, &d_logits, &d_ext, d_int.as_deref())?;
    let mut refs: Vec<&mut NetGrads> = grads.iter_mut().collect();
    out.grad_norm = clip_global_norm(&mut refs, config.max_grad_norm);
    let mut opts = std::mem::take(&mut params.opt);
    for ((net, opt), g) in params.nets_mut().into_iter().zip(opts.iter_mut()).zip(&grads) {
        opt.step(net, g)?;
    }
    params.opt = opts;
    Ok(out)
}
