use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::gae::{advantages_two_head, gae, Stream};
use super::update::{ppo_update, Targets, Trajectory};
use super::{BetaUnit, HeadMode, PolicyParams, PpoConfig};
use crate::bonus::{IntrinsicReward, RolloutBatch, StepSlice};
use crate::diffkit::{Matrix, SeededRng};
use crate::gridworld::VecEnv;
use crate::{Error, Result};

/// Episodes in the trailing window behind the success and return metrics.
pub const TRAILING_EPISODES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub total_steps: u64,
    pub seed: u64,
    pub beta_unit: BetaUnit,
    /// Random-policy rollouts used to seed the bonus observation statistics.
    pub warmup_rollouts: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            seed: 0,
            beta_unit: BetaUnit::EnvStep,
            warmup_rollouts: 1,
        }
    }
}

/// Metrics logged after every rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub global_step: u64,
    /// Mean over the trailing episode window (0 before any episode ends).
    pub episode_return_mean: f64,
    pub episode_len_mean: f64,
    /// Fraction of trailing episodes that reached the goal.
    pub success_rate: f64,
    /// Mean normalised intrinsic reward of the rollout, before `beta`.
    pub intrinsic_mean: f64,
    pub beta: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub episodes: u64,
    pub wall_time_s: f64,
}

impl RolloutRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.episode_return_mean,
            self.episode_len_mean,
            self.success_rate,
            self.intrinsic_mean,
            self.beta,
            self.policy_loss,
            self.value_loss,
            self.entropy,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<RolloutRecord>,
}

impl RunLog {
    pub fn last(&self) -> Option<&RolloutRecord> {
        self.records.last()
    }
}

/// Replaces the post-reset rows of finished slots with their final
/// observation, giving the true successor of each transition.
fn true_next_obs(obs: &Matrix, final_obs: &[Option<Vec<f64>>]) -> Matrix {
    let mut next = obs.clone();
    for (i, f) in final_obs.iter().enumerate() {
        if let Some(f) = f {
            next.row_mut(i).copy_from_slice(f);
        }
    }
    next
}

fn warmup(env: &VecEnv, bonus: &mut dyn IntrinsicReward, rollouts: usize, steps: usize, seed: u64) -> Result<()> {
    let mut env = env.clone();
    let mut rng = SeededRng::with_stream(seed, 4);
    let n = env.num_envs();
    let mut rows = vec![env.observe()];
    for _ in 0..rollouts * steps {
        let actions: Vec<usize> = (0..n).map(|_| rng.below(crate::gridworld::ACTION_COUNT)).collect();
        let s = env.step_indices(&actions)?;
        rows.push(true_next_obs(&s.obs, &s.final_obs));
    }
    let refs: Vec<&Matrix> = rows.iter().collect();
    bonus.seed_obs_moments(&Matrix::vstack(&refs)?)
}

/// Collects rollouts, scores them with the bonus, trains the bonus and then
/// the policy, until `total_steps` environment transitions have been taken.
///
/// In sum mode the policy sees `R + beta_t * I`; in two-head mode the
/// extrinsic and `beta_t * I` streams get separate critics.
pub fn train_loop(
    env: &mut VecEnv,
    mut bonus: Option<&mut dyn IntrinsicReward>,
    params: &mut PolicyParams,
    config: &PpoConfig,
    options: &TrainOptions,
) -> Result<RunLog> {
    config.validate()?;
    let envs = env.num_envs();
    if envs != config.n_envs {
        return Err(Error::shape("train_loop", format!("{} envs", config.n_envs), envs));
    }
    let start = Instant::now();
    let mut act_rng = SeededRng::with_stream(options.seed, 1);
    let mut ppo_rng = SeededRng::with_stream(options.seed, 2);
    if let Some(b) = bonus.as_deref_mut() {
        if options.warmup_rollouts > 0 {
            warmup(env, b, options.warmup_rollouts, config.rollout_len, options.seed)?;
        }
    }

    let mut log = RunLog::default();
    let mut window: VecDeque<(f64, usize)> = VecDeque::with_capacity(TRAILING_EPISODES);
    let mut episodes = 0u64;
    let mut global_step = 0u64;
    let mut rollout_idx = 0u64;
    let mut obs = env.observe();
    let t_len = config.rollout_len;

    while global_step < options.total_steps {
        let mut slices = Vec::with_capacity(t_len);
        let mut log_probs = Vec::with_capacity(t_len * envs);
        let mut v_ext = Vec::with_capacity(t_len * envs);
        let mut v_int = Vec::with_capacity(t_len * envs);
        let mut betas = Vec::with_capacity(t_len * envs);
        for t in 0..t_len {
            let act = params.act(&obs, &mut act_rng)?;
            let step = env.step_indices(&act.actions)?;
            let next = true_next_obs(&step.obs, &step.final_obs);
            let dones: Vec<bool> = (0..envs).map(|i| step.done(i)).collect();
            let slice = StepSlice {
                obs: std::mem::replace(&mut obs, step.obs),
                actions: act.actions,
                next_obs: next,
                extrinsic: step.rewards,
                dones,
            };
            if let Some(b) = bonus.as_deref_mut() {
                b.watch(&slice)?;
            }
            let beta_t = match options.beta_unit {
                BetaUnit::EnvStep => global_step + (t * envs) as u64,
                BetaUnit::Rollout => rollout_idx,
            };
            let beta = bonus.as_deref().map_or(0.0, |b| b.beta(beta_t));
            betas.extend(std::iter::repeat(beta).take(envs));
            for ep in step.episodes.into_iter().flatten() {
                if window.len() == TRAILING_EPISODES {
                    window.pop_front();
                }
                window.push_back((ep.episode_return, ep.length));
                episodes += 1;
            }
            log_probs.extend(act.log_probs);
            v_ext.extend(act.v_ext);
            if let Some(v) = act.v_int {
                v_int.extend(v);
            }
            slices.push(slice);
        }
        let batch = RolloutBatch::from_slices(&slices)?;
        drop(slices);
        global_step += (t_len * envs) as u64;
        rollout_idx += 1;

        let intrinsic = match bonus.as_deref_mut() {
            Some(b) => {
                let r = b.compute(&batch)?;
                b.update(&batch)?;
                r
            }
            None => vec![0.0; batch.len()],
        };
        let scaled: Vec<f64> = intrinsic.iter().zip(&betas).map(|(i, b)| b * i).collect();
        let (last_ext, last_int) = params.values(&obs)?;
        let shift = |v: &[f64], last: &[f64]| -> Vec<f64> { v[envs..].iter().chain(last).copied().collect() };
        let next_ext = shift(&v_ext, &last_ext);

        let two_head = params.head_mode == HeadMode::TwoHead;
        let targets = if two_head {
            let last_int = last_int.expect("two-head policy has an intrinsic critic");
            let next_int = shift(&v_int, &last_int);
            let adv = advantages_two_head(
                params.head_mode,
                Stream {
                    rewards: &batch.extrinsic,
                    values: &v_ext,
                    next_values: &next_ext,
                },
                Stream {
                    rewards: &scaled,
                    values: &v_int,
                    next_values: &next_int,
                },
                &batch.dones,
                envs,
                config,
            )?;
            Targets {
                advantages: adv.combined,
                ext_returns: adv.ext_returns,
                int_returns: Some(adv.int_returns),
            }
        } else {
            let rewards: Vec<f64> = batch.extrinsic.iter().zip(&scaled).map(|(r, i)| r + i).collect();
            let (advantages, ext_returns) =
                gae(&rewards, &v_ext, &next_ext, &batch.dones, envs, config.gamma, config.gae_lambda)?;
            Targets {
                advantages,
                ext_returns,
                int_returns: None,
            }
        };
        let traj = Trajectory {
            batch,
            log_probs,
            v_ext,
            v_int: two_head.then_some(v_int),
        };
        let metrics = ppo_update(params, &traj, &targets, config, &mut ppo_rng)?;

        let (ret, len, succ) = if window.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            let k = window.len() as f64;
            (
                window.iter().map(|w| w.0).sum::<f64>() / k,
                window.iter().map(|w| w.1 as f64).sum::<f64>() / k,
                window.iter().filter(|w| w.0 > 0.5).count() as f64 / k,
            )
        };
        let record = RolloutRecord {
            global_step,
            episode_return_mean: ret,
            episode_len_mean: len,
            success_rate: succ,
            intrinsic_mean: intrinsic.iter().sum::<f64>() / intrinsic.len() as f64,
            beta: *betas.last().expect("non-empty rollout"),
            policy_loss: metrics.policy_loss,
            value_loss: metrics.value_loss,
            entropy: metrics.entropy,
            episodes,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        if !record.is_finite() {
            return Err(Error::NonFinite(format!("rollout metrics at step {global_step}: {record:?}")));
        }
        log.records.push(record);
    }
    Ok(log)
}
