use super::{HeadMode, PpoConfig};
use crate::{Error, Result};

/// Generalised advantage estimation over a time-major `[steps x envs]`
/// layout. `next_values[i]` is the value of the observation that followed
/// sample `i`; it is masked out where `dones[i]` is set.
///
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    dones: &[bool],
    envs: usize,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || next_values.len() != n || dones.len() != n {
        return Err(Error::shape("gae", format!("{n} entries per input"), "ragged inputs"));
    }
    if envs == 0 || n % envs != 0 {
        return Err(Error::shape("gae", format!("a multiple of {envs} samples"), n));
    }
    let steps = n / envs;
    let mut adv = vec![0.0; n];
    for e in 0..envs {
        let mut running = 0.0;
        for t in (0..steps).rev() {
            let i = t * envs + e;
            let live = if dones[i] { 0.0 } else { 1.0 };
            let delta = rewards[i] + gamma * live * next_values[i] - values[i];
            running = delta + gamma * lambda * live * running;
            adv[i] = running;
        }
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Per-stream advantages of the two-head estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoHeadAdvantages {
    pub combined: Vec<f64>,
    pub ext_returns: Vec<f64>,
    pub int_returns: Vec<f64>,
}

/// Inputs of one reward stream: rewards, values and successor values.
#[derive(Clone, Copy, Debug)]
pub struct Stream<'a> {
    pub rewards: &'a [f64],
    pub values: &'a [f64],
    pub next_values: &'a [f64],
}

/// Separate GAE for the extrinsic stream (episodic) and the intrinsic
/// stream (continuing unless `config.int_episodic`), summed elementwise.
pub fn advantages_two_head(
    mode: HeadMode,
    ext: Stream<'_>,
    int: Stream<'_>,
    dones: &[bool],
    envs: usize,
    config: &PpoConfig,
) -> Result<TwoHeadAdvantages> {
    if mode != HeadMode::TwoHead {
        return Err(Error::WrongMode { expected: "two_head" });
    }
    let (a_ext, r_ext) = gae(ext.rewards, ext.values, ext.next_values, dones, envs, config.gamma, config.gae_lambda)?;
    let never = vec![false; dones.len()];
    let int_dones = if config.int_episodic { dones } else { &never };
    let (a_int, r_int) = gae(int.rewards, int.values, int.next_values, int_dones, envs, config.int_gamma, config.gae_lambda)?;
    Ok(TwoHeadAdvantages {
        combined: a_ext.iter().zip(&a_int).map(|(a, b)| a + b).collect(),
        ext_returns: r_ext,
        int_returns: r_int,
    })
}

/// Standardises to zero mean and unit population std. Batches of one, or
/// with zero spread, are only centred.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    adv.iter().map(|a| (a - mean) * scale).collect()
}
